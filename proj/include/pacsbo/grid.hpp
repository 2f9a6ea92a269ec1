#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace pacsbo {

using GridIndex = std::size_t;

/// Uniform midpoint lattice over [0,1]^n. Point i along a dimension with
/// resolution m sits at (i + 0.5) / m, so each point owns a cell of volume
/// prod(1/m_d) and the cells tile the unit cube. Points are ordered
/// row-major (first dimension slowest).
class GridDomain {
public:
    explicit GridDomain(std::vector<std::size_t> resolution);

    /// 1000 points for n = 1, 50 x 50 for n = 2.
    static GridDomain default_for_dim(std::size_t n);

    std::size_t dim() const { return resolution_.size(); }
    std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
    const std::vector<std::size_t>& resolution() const { return resolution_; }
    double spacing(std::size_t d) const { return 1.0 / static_cast<double>(resolution_[d]); }
    double cell_volume() const { return cell_volume_; }

    /// Row i is grid point i.
    const Eigen::MatrixXd& points() const { return points_; }
    Eigen::VectorXd point(GridIndex i) const { return points_.row(static_cast<Eigen::Index>(i)).transpose(); }

    std::vector<std::size_t> multi_index(GridIndex i) const;
    GridIndex flat_index(const std::vector<std::size_t>& multi) const;

    /// Grid point closest to x (per-dimension rounding, clamped to the cube).
    GridIndex nearest(const Eigen::VectorXd& x) const;

    /// Indices whose per-dimension index differs by at most one, excluding i.
    std::vector<GridIndex> neighbors(GridIndex i) const;

private:
    std::vector<std::size_t> resolution_;
    std::vector<std::size_t> stride_;
    Eigen::MatrixXd points_;
    double cell_volume_ = 1.0;
};

}  // namespace pacsbo
