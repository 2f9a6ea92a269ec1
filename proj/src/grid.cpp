#include "pacsbo/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pacsbo {

GridDomain::GridDomain(std::vector<std::size_t> resolution) : resolution_(std::move(resolution)) {
    if (resolution_.empty()) {
        throw std::invalid_argument("GridDomain: dimension must be positive");
    }
    std::size_t total = 1;
    for (std::size_t m : resolution_) {
        if (m == 0) {
            throw std::invalid_argument("GridDomain: every resolution must be positive");
        }
        total *= m;
        cell_volume_ /= static_cast<double>(m);
    }
    const std::size_t n = resolution_.size();
    stride_.assign(n, 1);
    for (std::size_t d = n - 1; d > 0; --d) {
        stride_[d - 1] = stride_[d] * resolution_[d];
    }
    points_.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < total; ++i) {
        const auto mi = multi_index(i);
        for (std::size_t d = 0; d < n; ++d) {
            points_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
                (static_cast<double>(mi[d]) + 0.5) / static_cast<double>(resolution_[d]);
        }
    }
}

GridDomain GridDomain::default_for_dim(std::size_t n) {
    if (n == 1) {
        return GridDomain({1000});
    }
    if (n == 2) {
        return GridDomain({50, 50});
    }
    return GridDomain(std::vector<std::size_t>(n, 10));
}

std::vector<std::size_t> GridDomain::multi_index(GridIndex i) const {
    std::vector<std::size_t> mi(resolution_.size());
    for (std::size_t d = 0; d < resolution_.size(); ++d) {
        mi[d] = (i / stride_[d]) % resolution_[d];
    }
    return mi;
}

GridIndex GridDomain::flat_index(const std::vector<std::size_t>& multi) const {
    GridIndex i = 0;
    for (std::size_t d = 0; d < resolution_.size(); ++d) {
        i += multi[d] * stride_[d];
    }
    return i;
}

GridIndex GridDomain::nearest(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != dim()) {
        throw std::invalid_argument("GridDomain::nearest: dimension mismatch");
    }
    std::vector<std::size_t> mi(dim());
    for (std::size_t d = 0; d < dim(); ++d) {
        const double m = static_cast<double>(resolution_[d]);
        const double k = std::floor(x(static_cast<Eigen::Index>(d)) * m);
        mi[d] = static_cast<std::size_t>(std::clamp(k, 0.0, m - 1.0));
    }
    return flat_index(mi);
}

std::vector<GridIndex> GridDomain::neighbors(GridIndex i) const {
    const auto base = multi_index(i);
    const std::size_t n = dim();
    std::vector<GridIndex> out;
    std::vector<int> offset(n, -1);
    for (;;) {
        bool all_zero = true;
        bool inside = true;
        std::vector<std::size_t> mi(n);
        for (std::size_t d = 0; d < n; ++d) {
            all_zero = all_zero && offset[d] == 0;
            const long v = static_cast<long>(base[d]) + offset[d];
            if (v < 0 || v >= static_cast<long>(resolution_[d])) {
                inside = false;
            } else {
                mi[d] = static_cast<std::size_t>(v);
            }
        }
        if (inside && !all_zero) {
            out.push_back(flat_index(mi));
        }
        std::size_t d = 0;
        while (d < n && offset[d] == 1) {
            offset[d] = -1;
            ++d;
        }
        if (d == n) {
            break;
        }
        ++offset[d];
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace pacsbo
