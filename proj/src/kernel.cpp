#include "pacsbo/kernel.hpp"

#include "pacsbo/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace pacsbo {

void KernelConfig::validate() const {
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
        throw std::invalid_argument("KernelConfig: lengthscale must be positive and finite");
    }
}

double matern32(double distance, double lengthscale) {
    const double z = std::sqrt(3.0) * distance / lengthscale;
    return (1.0 + z) * std::exp(-z);
}

double kernel_eval(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelConfig& cfg) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("kernel_eval: dimension mismatch");
    }
    return matern32((a - b).norm(), cfg.lengthscale);
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelConfig& cfg) {
    if (a.cols() != b.cols()) {
        throw std::invalid_argument("kernel_matrix: dimension mismatch");
    }
    Eigen::MatrixXd k(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            k(i, j) = matern32((a.row(i) - b.row(j)).norm(), cfg.lengthscale);
        }
    }
    return k;
}

GridKernel::GridKernel(const GridDomain& grid, const KernelConfig& cfg) : cfg_(cfg), res_(grid.resolution()) {
    cfg_.validate();
    const std::size_t n = res_.size();
    table_stride_.assign(n, 1);
    for (std::size_t d = n - 1; d > 0; --d) {
        table_stride_[d - 1] = table_stride_[d] * res_[d];
    }
    // Offsets range over [0, m_d - 1] per dimension; the table has the same
    // shape as the grid itself.
    table_.resize(grid.size());
    for (std::size_t t = 0; t < table_.size(); ++t) {
        double d2 = 0.0;
        for (std::size_t d = 0; d < n; ++d) {
            const double off = static_cast<double>((t / table_stride_[d]) % res_[d]) * grid.spacing(d);
            d2 += off * off;
        }
        table_[t] = matern32(std::sqrt(d2), cfg_.lengthscale);
    }
}

double GridKernel::operator()(std::size_t a, std::size_t b) const {
    if (res_.size() == 1) {
        return table_[a > b ? a - b : b - a];
    }
    std::size_t t = 0;
    for (std::size_t d = 0; d < res_.size(); ++d) {
        const std::size_t ia = (a / table_stride_[d]) % res_[d];
        const std::size_t ib = (b / table_stride_[d]) % res_[d];
        t += (ia > ib ? ia - ib : ib - ia) * table_stride_[d];
    }
    return table_[t];
}

Eigen::MatrixXd GridKernel::gram(const std::vector<std::size_t>& idx) const {
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = (*this)(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

Eigen::MatrixXd GridKernel::cross(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) const {
    Eigen::MatrixXd k(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(rows[i], cols[j]);
        }
    }
    return k;
}

}  // namespace pacsbo
