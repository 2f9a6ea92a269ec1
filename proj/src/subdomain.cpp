#include "pacsbo/subdomain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pacsbo {

namespace {

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

ConvexRegion bounding_box(const Eigen::MatrixXd& pts, const GridDomain& grid, bool inflate) {
    ConvexRegion r;
    r.kind = ConvexRegion::Kind::Box;
    r.lo = pts.colwise().minCoeff().transpose();
    r.hi = pts.colwise().maxCoeff().transpose();
    if (inflate) {
        for (Eigen::Index d = 0; d < r.lo.size(); ++d) {
            const double h = grid.spacing(static_cast<std::size_t>(d));
            r.lo(d) = std::max(0.0, r.lo(d) - h);
            r.hi(d) = std::min(1.0, r.hi(d) + h);
        }
    }
    return r;
}

}  // namespace

Eigen::MatrixXd monotone_chain_hull(const Eigen::MatrixXd& points) {
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        pts.emplace_back(points(i, 0), points(i, 1));
    }
    std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(pts.size()), 2);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
        }
        return out;
    }
    std::vector<Eigen::Vector2d> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) {
            --k;
        }
        hull[k++] = p;
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = pts.size() - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) {
            --k;
        }
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(hull.size()), 2);
    for (std::size_t i = 0; i < hull.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = hull[i].transpose();
    }
    return out;
}

DomainMask convex_hull_mask(const SampleSet& samples, const GridDomain& grid) {
    if (samples.empty()) {
        throw std::invalid_argument("convex_hull_mask: no samples");
    }
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(grid.dim()));
    for (std::size_t m = 0; m < samples.size(); ++m) {
        pts.row(static_cast<Eigen::Index>(m)) = grid.points().row(static_cast<Eigen::Index>(samples.params()[m]));
    }

    ConvexRegion region;
    if (grid.dim() == 1) {
        region.kind = ConvexRegion::Kind::Interval;
        region.lo = pts.colwise().minCoeff().transpose();
        region.hi = pts.colwise().maxCoeff().transpose();
        region.vertices.resize(1, 2);
        region.vertices << region.lo(0), region.hi(0);
    } else if (grid.dim() == 2) {
        Eigen::MatrixXd hull = monotone_chain_hull(pts);
        if (hull.rows() >= 3) {
            region.kind = ConvexRegion::Kind::Polygon;
            region.vertices = std::move(hull);
        } else {
            region = bounding_box(pts, grid, true);
        }
    } else {
        region = bounding_box(pts, grid, false);
    }
    DomainMask mask = DomainMask::from_region(grid, region, MaskLabel::Tilde);
    // Generators belong to their hull regardless of rounding.
    for (GridIndex a : samples.params()) {
        mask.set(a);
    }
    return mask;
}

DomainMask enlarge_mask(const DomainMask& hull, double factor, const GridDomain& grid) {
    if (!(factor >= 1.0)) {
        throw std::invalid_argument("enlarge_mask: factor must be >= 1");
    }
    const ConvexRegion& src = hull.region();
    ConvexRegion scaled = src;
    switch (src.kind) {
        case ConvexRegion::Kind::Full:
            break;
        case ConvexRegion::Kind::Interval:
        case ConvexRegion::Kind::Box: {
            const Eigen::VectorXd center = 0.5 * (src.lo + src.hi);
            const Eigen::VectorXd half = 0.5 * (src.hi - src.lo) * factor;
            scaled.lo = (center - half).cwiseMax(0.0);
            scaled.hi = (center + half).cwiseMin(1.0);
            if (src.kind == ConvexRegion::Kind::Interval) {
                scaled.vertices.resize(1, 2);
                scaled.vertices << scaled.lo(0), scaled.hi(0);
            }
            break;
        }
        case ConvexRegion::Kind::Polygon: {
            const Eigen::RowVectorXd centroid = src.vertices.colwise().mean();
            scaled.vertices = (factor * (src.vertices.rowwise() - centroid)).rowwise() + centroid;
            break;
        }
    }
    // Polygon vertices may leave the cube; grid points never do, so masking
    // the unclipped polygon is the same as masking its clipped version.
    DomainMask out = DomainMask::from_region(grid, scaled, MaskLabel::Hat);
    for (GridIndex i = 0; i < hull.grid_size(); ++i) {
        if (hull.contains(i)) {
            out.set(i);
        }
    }
    return out;
}

const DomainMask& PartitionTriple::operator[](std::size_t p) const {
    switch (p) {
        case 0: return tilde;
        case 1: return hat;
        case 2: return global;
        default: throw std::out_of_range("PartitionTriple: index out of range");
    }
}

PartitionTriple build_partitions(const SampleSet& samples, const GridDomain& grid, double enlarge_factor) {
    DomainMask tilde = convex_hull_mask(samples, grid);
    DomainMask hat = enlarge_mask(tilde, enlarge_factor, grid);
    return {std::move(tilde), std::move(hat), DomainMask::full(grid)};
}

}  // namespace pacsbo
