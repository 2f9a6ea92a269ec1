#pragma once

#include "pacsbo/grid.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>
#include <vector>

namespace pacsbo {

enum class MaskLabel { Tilde, Hat, Global };

std::string_view to_string(MaskLabel label);

/// Geometry behind a hull-derived mask, kept so enlargement acts on the
/// exact region rather than on its grid snapping.
struct ConvexRegion {
    enum class Kind { Full, Interval, Polygon, Box };
    Kind kind = Kind::Full;
    /// Interval: 1 x 2 [lo, hi]; Polygon: counter-clockwise vertices as rows.
    Eigen::MatrixXd vertices;
    /// Box bounds (also filled for Interval).
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    bool contains(const Eigen::VectorXd& x, double tol) const;
};

/// Membership bitset over the points of one grid.
class DomainMask {
public:
    DomainMask() = default;
    DomainMask(std::size_t grid_size, MaskLabel label);

    static DomainMask full(const GridDomain& grid);
    static DomainMask from_region(const GridDomain& grid, const ConvexRegion& region, MaskLabel label);

    MaskLabel label() const { return label_; }
    std::size_t grid_size() const { return member_.size(); }
    bool contains(GridIndex i) const { return member_[i] != 0; }
    void set(GridIndex i, bool value = true) { member_[i] = value ? 1 : 0; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
    std::vector<GridIndex> indices() const;

    /// Pointwise subset test.
    bool is_subset_of(const DomainMask& other) const;

    const ConvexRegion& region() const { return region_; }
    void set_region(ConvexRegion r) { region_ = std::move(r); }

    friend bool operator==(const DomainMask& a, const DomainMask& b) { return a.member_ == b.member_; }

private:
    std::vector<std::uint8_t> member_;
    MaskLabel label_ = MaskLabel::Global;
    ConvexRegion region_;
};

}  // namespace pacsbo
