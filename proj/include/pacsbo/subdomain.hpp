#pragma once

#include "pacsbo/gp.hpp"
#include "pacsbo/mask.hpp"

#include <array>

namespace pacsbo {

/// Grid points inside or on the convex hull of the sampled parameters.
///
/// n = 1 gives the interval [min, max]; n = 2 uses a monotone-chain hull
/// with a 1e-12 boundary tolerance. Collinear 2-D samples fall back to their
/// bounding box grown by one grid cell per side. For n >= 3 the bounding box
/// stands in for the hull.
DomainMask convex_hull_mask(const SampleSet& samples, const GridDomain& grid);

/// Homothety of the hull region about its vertex centroid, clipped to the
/// unit cube. The result always contains `hull`.
DomainMask enlarge_mask(const DomainMask& hull, double factor, const GridDomain& grid);

/// Counter-clockwise hull vertices of a 2-D point set (Andrew's monotone
/// chain). Collinear points on edges are dropped.
Eigen::MatrixXd monotone_chain_hull(const Eigen::MatrixXd& points);

/// The three nested partitions: hull, enlarged hull, whole domain.
struct PartitionTriple {
    DomainMask tilde;
    DomainMask hat;
    DomainMask global;

    const DomainMask& operator[](std::size_t p) const;
};

PartitionTriple build_partitions(const SampleSet& samples, const GridDomain& grid, double enlarge_factor = 1.1);

}  // namespace pacsbo
