#include "pacsbo/gp.hpp"
#include "pacsbo/random.hpp"
#include "pacsbo/subdomain.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace pacsbo;

namespace {

SampleSet samples_at(const std::vector<GridIndex>& idx) {
    SampleSet s(2);
    for (GridIndex a : idx) {
        s.append(a, {0.0, 0.0});
    }
    return s;
}

// Inside test for a triangle via the sign of three half-plane functions.
bool in_triangle(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                 const Eigen::Vector2d& c) {
    auto side = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v, const Eigen::Vector2d& x) {
        return (v.x() - u.x()) * (x.y() - u.y()) - (v.y() - u.y()) * (x.x() - u.x());
    };
    const double d1 = side(a, b, p), d2 = side(b, c, p), d3 = side(c, a, p);
    const bool neg = d1 < -1e-12 || d2 < -1e-12 || d3 < -1e-12;
    const bool pos = d1 > 1e-12 || d2 > 1e-12 || d3 > 1e-12;
    return !(neg && pos);
}

}  // namespace

TEST_CASE("1-D hull is the closed sample interval") {
    GridDomain g({100});
    // Points 20 and 60 sit at 0.205 and 0.605.
    const auto mask = convex_hull_mask(samples_at({60, 20, 33}), g);
    CHECK(mask.count() == 41);
    CHECK(mask.contains(20));
    CHECK(mask.contains(60));
    CHECK_FALSE(mask.contains(19));
    CHECK_FALSE(mask.contains(61));
    CHECK(mask.label() == MaskLabel::Tilde);

    const auto single = convex_hull_mask(samples_at({5, 5}), g);
    CHECK(single.indices() == std::vector<GridIndex>{5});
    CHECK_THROWS_AS(convex_hull_mask(SampleSet(2), g), std::invalid_argument);
}

TEST_CASE("1-D enlargement scales about the midpoint") {
    GridDomain g({1000});
    // [0.2005, 0.6005] grows by 0.02 on each side.
    const auto tilde = convex_hull_mask(samples_at({200, 600}), g);
    const auto hat = enlarge_mask(tilde, 1.1, g);
    const auto idx = hat.indices();
    CHECK(idx.front() == 180);
    CHECK(idx.back() == 620);
    CHECK(hat.label() == MaskLabel::Hat);
    CHECK(enlarge_mask(tilde, 1.0, g) == tilde);
    CHECK_THROWS_AS(enlarge_mask(tilde, 0.9, g), std::invalid_argument);

    // Clipping at the cube boundary.
    const auto edge = enlarge_mask(convex_hull_mask(samples_at({0, 900}), g), 1.5, g);
    CHECK(edge.contains(0));
    CHECK(edge.contains(999));
}

TEST_CASE("2-D triangle hull agrees with a half-plane oracle") {
    GridDomain g({50, 50});
    const std::vector<std::vector<std::size_t>> corners{{5, 5}, {40, 12}, {18, 44}};
    std::vector<GridIndex> idx;
    for (const auto& c : corners) {
        idx.push_back(g.flat_index(c));
    }
    idx.push_back(g.flat_index({20, 20}));  // interior point, not a vertex
    const auto mask = convex_hull_mask(samples_at(idx), g);
    const Eigen::Vector2d a = g.point(idx[0]), b = g.point(idx[1]), c = g.point(idx[2]);
    std::size_t expected = 0;
    for (GridIndex i = 0; i < g.size(); ++i) {
        const bool inside = in_triangle(g.point(i), a, b, c);
        expected += inside ? 1 : 0;
        CHECK(mask.contains(i) == inside);
    }
    CHECK(mask.count() == expected);
}

TEST_CASE("collinear 2-D samples produce a non-empty band") {
    GridDomain g({30, 30});
    const auto mask = convex_hull_mask(samples_at({g.flat_index({3, 10}), g.flat_index({4, 10}), g.flat_index({5, 10})}), g);
    CHECK(mask.contains(g.flat_index({4, 10})));
    CHECK(mask.count() >= 3);
}

TEST_CASE("monotone chain drops interior and collinear points") {
    Eigen::MatrixXd pts(6, 2);
    pts << 0, 0, 1, 0, 1, 1, 0, 1, 0.5, 0.5, 0.5, 0;
    const auto hull = monotone_chain_hull(pts);
    CHECK(hull.rows() == 4);
    // Counter-clockwise: positive signed area.
    double area = 0.0;
    for (Eigen::Index i = 0; i < hull.rows(); ++i) {
        const auto j = (i + 1) % hull.rows();
        area += hull(i, 0) * hull(j, 1) - hull(j, 0) * hull(i, 1);
    }
    CHECK(area / 2 == doctest::Approx(1.0));
}

TEST_CASE("partitions are nested and monotone in the enlargement factor") {
    Rng rng(17);
    for (std::size_t dim : {1u, 2u}) {
        GridDomain g = dim == 1 ? GridDomain({400}) : GridDomain({40, 40});
        std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<GridIndex> idx;
            const int n = 1 + rep % 6;
            for (int k = 0; k < n; ++k) {
                idx.push_back(pick(rng));
            }
            const auto s = samples_at(idx);
            const auto parts = build_partitions(s, g);
            CHECK(parts.tilde.is_subset_of(parts.hat));
            CHECK(parts.hat.is_subset_of(parts.global));
            CHECK(parts.global.count() == g.size());
            for (GridIndex a : idx) {
                CHECK(parts.tilde.contains(a));
            }
            const auto wider = enlarge_mask(parts.tilde, 1.4, g);
            CHECK(parts.hat.is_subset_of(wider));
            CHECK(&parts[2] == &parts.global);
        }
    }
}
