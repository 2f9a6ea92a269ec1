#include "pacsbo/gp.hpp"
#include "pacsbo/random.hpp"
#include "pacsbo/rkhs_function.hpp"

#include <doctest.h>

#include <cmath>

using namespace pacsbo;

namespace {

GridModelPtr line_model(std::size_t m = 500) {
    return make_grid_model(GridDomain({m}), KernelConfig{});
}

}  // namespace

TEST_CASE("norm of a two-center expansion") {
    RkhsFunction f;
    f.centers.resize(2, 1);
    f.centers << 0.3, 0.4;
    f.coefficients.resize(2);
    f.coefficients << 1.0, -2.0;
    const double k = matern32(0.1, 0.1);
    CHECK(rkhs_norm(f) == doctest::Approx(std::sqrt(1.0 + 4.0 - 4.0 * k)));
    Eigen::VectorXd x(1);
    x << 0.3;
    CHECK(evaluate(f, x) == doctest::Approx(1.0 - 2.0 * k));
    const auto g = scale_to_norm(f, 2.5);
    CHECK(rkhs_norm(g) == doctest::Approx(2.5));
    CHECK(g.coefficients(0) / g.coefficients(1) == doctest::Approx(-0.5));
    f.coefficients.setZero();
    CHECK_THROWS_AS(scale_to_norm(f, 1.0), std::invalid_argument);
}

TEST_CASE("validation") {
    RkhsFunction f;
    f.centers.resize(1, 1);
    f.centers << 1.5;
    f.coefficients = Eigen::VectorXd::Ones(1);
    CHECK_THROWS_AS(f.validate(), std::invalid_argument);
    CHECK_THROWS_AS((SamplerConfig{0, 1.0, {}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SamplerConfig{10, -1.0, {}}.validate()), std::invalid_argument);
}

TEST_CASE("random functions are deterministic per seed and honor the target norm") {
    auto model = line_model();
    SamplerConfig cfg;
    cfg.target_norm = 2.0;
    Rng a(7), b(7), c(8);
    const auto fa = sample_random_function(*model, cfg, a);
    const auto fb = sample_random_function(*model, cfg, b);
    const auto fc = sample_random_function(*model, cfg, c);
    CHECK(fa.size() == 100);
    CHECK(rkhs_norm(fa) == doctest::Approx(2.0));
    CHECK(fa.coefficients == fb.coefficients);
    CHECK(fa.centers == fb.centers);
    CHECK(fa.coefficients != fc.coefficients);
    const Eigen::VectorXd on_grid = evaluate_on_grid(fa, model->grid);
    for (GridIndex i = 0; i < 500; i += 61) {
        CHECK(on_grid(i) == doctest::Approx(evaluate(fa, model->grid.point(i))));
    }
    // |f(x)| <= ||f|| k(x,x)^{1/2}.
    CHECK(on_grid.cwiseAbs().maxCoeff() <= 2.0 + 1e-12);
}

TEST_CASE("interpolating draws pass within two noise levels of each sample") {
    auto model = line_model();
    const double sigma = 0.01;
    SampleSet s(1);
    s.append(100, {0.4});
    s.append(250, {-0.2});
    s.append(251, {-0.15});
    s.append(100, {0.6});  // repeated parameter: target is the average 0.5
    std::vector<GridIndex> all(500);
    for (GridIndex i = 0; i < 500; ++i) {
        all[i] = i;
    }
    InterpolatingSampler sampler(model, s, 0, sigma, all, SamplerConfig{});
    CHECK(sampler.nodes() == std::vector<GridIndex>{100, 250, 251});
    CHECK(sampler.node_targets()(0) == doctest::Approx(0.5));
    Rng rng(3);
    for (int rep = 0; rep < 25; ++rep) {
        const auto d = sampler.draw(rng);
        CHECK(d.centers.size() == 100);
        const auto f = sampler.to_function(d);
        CHECK(sampler.norm(d) == doctest::Approx(rkhs_norm(f)).epsilon(1e-8));
        for (std::size_t m = 0; m < 3; ++m) {
            const double at = evaluate(f, model->grid.point(sampler.nodes()[m]));
            CHECK(std::abs(d.node_noise(static_cast<Eigen::Index>(m))) <= 2.0 * sigma);
            CHECK(at == doctest::Approx(sampler.node_targets()(static_cast<Eigen::Index>(m)) +
                                        d.node_noise(static_cast<Eigen::Index>(m)))
                            .epsilon(1e-6));
        }
        for (std::size_t k = 3; k < d.centers.size(); ++k) {
            CHECK(std::abs(d.coefficients(static_cast<Eigen::Index>(k))) <= 1.0);
        }
    }
}

TEST_CASE("interpolating sampler restricts tail centers to the candidates") {
    auto model = line_model();
    SampleSet s(2);
    s.append(10, {0.1, 0.2});
    const std::vector<GridIndex> cand{20, 21, 22};
    SamplerConfig cfg;
    cfg.num_centers = 5;
    InterpolatingSampler sampler(model, s, 1, 0.0, cand, cfg);
    Rng rng(1);
    const auto d = sampler.draw(rng);
    CHECK(d.centers[0] == 10);
    for (std::size_t k = 1; k < 5; ++k) {
        CHECK(d.centers[k] >= 20);
        CHECK(d.centers[k] <= 22);
    }
    CHECK(d.node_noise(0) == 0.0);
    CHECK(evaluate(sampler.to_function(d), model->grid.point(10)) == doctest::Approx(0.2).epsilon(1e-8));
    cfg.num_centers = 1;
    CHECK_THROWS_AS(InterpolatingSampler(model, s, 0, 0.0, cand, cfg), std::invalid_argument);
    CHECK_THROWS_AS(InterpolatingSampler(model, SampleSet(2), 0, 0.0, cand, SamplerConfig{}), std::invalid_argument);
}

TEST_CASE("json round trip") {
    auto model = make_grid_model(GridDomain({20, 20}), KernelConfig{KernelFamily::Matern32, 0.2});
    Rng rng(11);
    SamplerConfig cfg;
    cfg.num_centers = 7;
    const auto f = sample_random_function(*model, cfg, rng);
    const auto j = to_json(f);
    const auto g = rkhs_function_from_json(nlohmann::json::parse(j.dump()));
    CHECK(g.centers == f.centers);
    CHECK(g.coefficients == f.coefficients);
    CHECK(g.kernel.lengthscale == 0.2);
    auto bad = j;
    bad["version"] = 2;
    CHECK_THROWS_AS(rkhs_function_from_json(bad), std::invalid_argument);
}
