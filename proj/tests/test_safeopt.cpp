#include "pacsbo/gp.hpp"
#include "pacsbo/problem.hpp"
#include "pacsbo/random.hpp"
#include "pacsbo/safeopt.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace pacsbo;

namespace {

struct Fixture {
    GridModelPtr model;
    SampleSet samples{2};
    std::vector<GridIndex> seed;
    std::vector<GpPosterior> posts;
    std::vector<GridPrediction> preds;
};

Fixture make_fixture(std::uint64_t s, std::size_t m, std::size_t extra, double sigma) {
    Fixture f;
    f.model = make_grid_model(GridDomain({m}), KernelConfig{});
    Rng rng(s);
    SamplerConfig cfg;
    cfg.target_norm = 1.0;
    const auto problem = SyntheticProblem::with_safe_fraction(f.model->grid,
                                                              sample_random_function(*f.model, cfg, rng), 0.5);
    f.seed = select_seed_set(problem, f.model->grid, rng);
    f.samples = measure_seed_set(problem, f.seed, sigma, rng);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    for (std::size_t k = 0; k < extra; ++k) {
        const auto a = pick(rng);
        f.samples.append(a, problem.measure(a, sigma, rng));
    }
    for (std::size_t i = 0; i < 2; ++i) {
        f.posts.push_back(gp_fit(f.model, f.samples, i, sigma));
        f.preds.push_back(f.posts.back().predict_all());
    }
    return f;
}

}  // namespace

TEST_CASE("beta scale") {
    // 2 + 0.1 sqrt(2 (1 + ln 10)).
    CHECK(beta_scale(2.0, 0.1, 0.0, 0.1) == doctest::Approx(2.0 + 0.1 * std::sqrt(2.0 * (1.0 + std::log(10.0)))));
    CHECK(beta_scale(2.0, 0.1, 0.0, 0.1) == doctest::Approx(2.257).epsilon(1e-3));
    CHECK(beta_scale(3.0, 0.0, 5.0, 0.1) == 3.0);
    CHECK(beta_scale(1.0, 0.1, 4.0, 0.1) > beta_scale(1.0, 0.1, 1.0, 0.1));
    CHECK_THROWS_AS(beta_scale(0.0, 0.1, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(beta_scale(1.0, 0.1, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(beta_scale(1.0, 0.1, -1.0, 0.1), std::invalid_argument);
}

TEST_CASE("prior confidence bounds are plus/minus beta") {
    auto model = make_grid_model(GridDomain({30}), KernelConfig{});
    SampleSet empty(2);
    std::vector<GridPrediction> preds{gp_fit(model, empty, 0, 0.1).predict_all(),
                                      gp_fit(model, empty, 1, 0.1).predict_all()};
    DomainMask mask(30, MaskLabel::Tilde);
    mask.set(4);
    const auto field = confidence_bounds(preds, {1.0, 1.0}, mask);
    CHECK(field.lower[1](4) == doctest::Approx(-1.0));
    CHECK(field.upper[0](4) == doctest::Approx(1.0));
    CHECK(std::isnan(field.lower[0](5)));
    CHECK(field.width(4) == doctest::Approx(2.0));
    // Nothing but S0 can be certified under the prior.
    const auto s = safe_set(field, {4}, mask);
    CHECK(s.points == std::vector<GridIndex>{4});
    CHECK(safe_set(field, {7}, mask).seed_in_mask == false);
    CHECK_THROWS_AS((confidence_bounds(preds, {1.0}, mask)), std::invalid_argument);
}

TEST_CASE("safe set and maximizers match enumeration") {
    for (std::uint64_t s = 0; s < 8; ++s) {
        const auto f = make_fixture(s, 200, 6, 0.01);
        const auto mask = DomainMask::full(f.model->grid);
        for (double beta : {0.5, 2.0}) {
            const auto field = confidence_bounds(f.preds, {beta, beta}, mask);
            const auto safe = safe_set(field, f.seed, mask);
            std::vector<GridIndex> expect;
            double best = -1e300;
            for (GridIndex a = 0; a < 200; ++a) {
                const double sd = std::sqrt(f.preds[1].variance(a));
                const bool seed = std::find(f.seed.begin(), f.seed.end(), a) != f.seed.end();
                if (seed || f.preds[1].mean(a) - beta * sd >= 0.0) {
                    expect.push_back(a);
                    best = std::max(best, f.preds[0].mean(a) - beta * std::sqrt(f.preds[0].variance(a)));
                }
            }
            CHECK(safe.points == expect);
            std::vector<GridIndex> m_expect;
            for (GridIndex a : expect) {
                if (f.preds[0].mean(a) + beta * std::sqrt(f.preds[0].variance(a)) >= best) {
                    m_expect.push_back(a);
                }
            }
            CHECK(maximizers(field, safe.points) == m_expect);
        }
    }
}

TEST_CASE("safe set shrinks as the norm bound grows") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto f = make_fixture(s, 300, 5, 0.01);
        const auto mask = DomainMask::full(f.model->grid);
        std::size_t prev = 300;
        for (double b : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            const double beta = beta_scale(b, 0.01, info_gain(f.posts[1]), 0.1);
            const auto safe = safe_set(confidence_bounds(f.preds, {beta, beta}, mask), f.seed, mask);
            CHECK(safe.points.size() <= prev);
            prev = safe.points.size();
        }
    }
}

TEST_CASE("expanders agree with a dense refit oracle") {
    std::size_t total = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const double sigma = 0.05;
        const auto f = make_fixture(100 + s, 30, s % 3, sigma);
        const auto mask = DomainMask::full(f.model->grid);
        const double beta = 1.5;
        const auto field = confidence_bounds(f.preds, {beta, beta}, mask);
        const auto safe = safe_set(field, f.seed, mask);
        const auto got = expanders(f.posts, f.preds, field, safe.points, mask, ExpanderOptions{true});

        std::vector<GridIndex> expect;
        for (GridIndex a : safe.points) {
            SampleSet refit = f.samples;
            refit.append(a, {f.preds[0].mean(a), field.upper[1](a)});
            const auto pred = gp_fit(f.model, refit, 1, sigma).predict_all();
            double margin = -1e300;
            for (GridIndex x = 0; x < 30; ++x) {
                if (!std::binary_search(safe.points.begin(), safe.points.end(), x)) {
                    margin = std::max(margin, pred.mean(x) - beta * std::sqrt(std::max(pred.variance(x), 0.0)));
                }
            }
            if (std::abs(margin) < 1e-9) {
                continue;  // too close to call
            }
            if (margin >= 0.0) {
                expect.push_back(a);
            }
            const bool listed = std::find(got.begin(), got.end(), a) != got.end();
            CHECK(listed == (margin >= 0.0));
        }
        total += expect.size();

        // The boundary shortcut only ever drops points from the exact set.
        const auto fast = expanders(f.posts, f.preds, field, safe.points, mask);
        for (GridIndex a : fast) {
            CHECK(std::find(got.begin(), got.end(), a) != got.end());
        }
    }
    CHECK(total > 0);
}

TEST_CASE("acquisition takes the widest candidate and breaks ties low") {
    ConfidenceField field;
    field.lower = {Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(5)};
    field.upper = {Eigen::VectorXd::Constant(5, 1.0), Eigen::VectorXd::Constant(5, 1.0)};
    field.beta = {1.0, 1.0};
    CHECK(acquire(field, {3, 1, 4}) == GridIndex{1});
    field.upper[1](4) = 2.0;
    CHECK(acquire(field, {3, 1, 4}) == GridIndex{4});
    CHECK_FALSE(acquire(field, {}).has_value());
}

TEST_CASE("plain SafeOpt step picks a safe candidate") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto f = make_fixture(s, 200, 2, 0.01);
        const auto plan = plan_safeopt_step(f.model, f.samples, 0.01, 0.1, {1.0, 1.0}, f.seed);
        REQUIRE(plan.next.has_value());
        const auto cand = plan.state.candidates();
        CHECK(std::find(cand.begin(), cand.end(), *plan.next) != cand.end());
        CHECK(std::binary_search(plan.state.safe.points.begin(), plan.state.safe.points.end(), *plan.next));
        CHECK(std::is_sorted(cand.begin(), cand.end()));
        CHECK_THROWS_AS((plan_safeopt_step(f.model, f.samples, 0.01, 0.1, {1.0}, f.seed)), std::invalid_argument);
    }
}
