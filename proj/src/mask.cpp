#include "pacsbo/mask.hpp"

#include <algorithm>
#include <numeric>

namespace pacsbo {

std::string_view to_string(MaskLabel label) {
    switch (label) {
        case MaskLabel::Tilde: return "tilde";
        case MaskLabel::Hat: return "hat";
        case MaskLabel::Global: return "global";
    }
    return "unknown";
}

bool ConvexRegion::contains(const Eigen::VectorXd& x, double tol) const {
    switch (kind) {
        case Kind::Full:
            return true;
        case Kind::Interval:
        case Kind::Box:
            for (Eigen::Index d = 0; d < x.size(); ++d) {
                if (x(d) < lo(d) - tol || x(d) > hi(d) + tol) {
                    return false;
                }
            }
            return true;
        case Kind::Polygon: {
            const Eigen::Index m = vertices.rows();
            for (Eigen::Index k = 0; k < m; ++k) {
                const Eigen::Vector2d p = vertices.row(k).transpose();
                const Eigen::Vector2d q = vertices.row((k + 1) % m).transpose();
                const double cross = (q.x() - p.x()) * (x(1) - p.y()) - (q.y() - p.y()) * (x(0) - p.x());
                if (cross < -tol) {
                    return false;
                }
            }
            return true;
        }
    }
    return false;
}

DomainMask::DomainMask(std::size_t grid_size, MaskLabel label) : member_(grid_size, 0), label_(label) {}

DomainMask DomainMask::full(const GridDomain& grid) {
    DomainMask m(grid.size(), MaskLabel::Global);
    std::fill(m.member_.begin(), m.member_.end(), std::uint8_t{1});
    return m;
}

DomainMask DomainMask::from_region(const GridDomain& grid, const ConvexRegion& region, MaskLabel label) {
    DomainMask m(grid.size(), label);
    constexpr double tol = 1e-12;
    for (GridIndex i = 0; i < grid.size(); ++i) {
        if (region.contains(grid.point(i), tol)) {
            m.member_[i] = 1;
        }
    }
    m.region_ = region;
    return m;
}

std::size_t DomainMask::count() const {
    return static_cast<std::size_t>(std::count(member_.begin(), member_.end(), std::uint8_t{1}));
}

std::vector<GridIndex> DomainMask::indices() const {
    std::vector<GridIndex> out;
    for (GridIndex i = 0; i < member_.size(); ++i) {
        if (member_[i]) {
            out.push_back(i);
        }
    }
    return out;
}

bool DomainMask::is_subset_of(const DomainMask& other) const {
    if (other.member_.size() != member_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < member_.size(); ++i) {
        if (member_[i] && !other.member_[i]) {
            return false;
        }
    }
    return true;
}

}  // namespace pacsbo
