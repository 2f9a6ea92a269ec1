#include "pacsbo/gp.hpp"
#include "pacsbo/rkhs_function.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace pacsbo;

namespace {

GridModelPtr line_model(std::size_t m = 200) {
    return make_grid_model(GridDomain({m}), KernelConfig{});
}

double oracle_k(double a, double b) {
    const double r = std::sqrt(3.0) * std::abs(a - b) / 0.1;
    return (1.0 + r) * std::exp(-r);
}

}  // namespace

TEST_CASE("scalar posterior, sigma = 0.1") {
    auto model = line_model();
    SampleSet s(1);
    s.append(40, {1.0});
    const auto post = gp_fit(model, s, 0, 0.1);
    CHECK(post.weights()(0) == doctest::Approx(1.0 / 1.01).epsilon(1e-12));
    const auto p = post.predict({40});
    CHECK(p.mean(0) == doctest::Approx(0.990099).epsilon(1e-6));
    CHECK(p.variance(0) == doctest::Approx(1.0 - 1.0 / 1.01).epsilon(1e-9));
    CHECK(mean_rkhs_norm(post) == doctest::Approx(1.0 / 1.01));
    CHECK(info_gain(post) == doctest::Approx(0.5 * std::log(101.0)).epsilon(1e-10));
}

TEST_CASE("duplicated parameter is regularized by the noise") {
    auto model = line_model();
    SampleSet s(1);
    s.append(10, {1.0});
    s.append(10, {0.5});
    const auto post = gp_fit(model, s, 0, 0.1);
    // 2x2 system [[1.01, 1], [1, 1.01]] w = [1, 0.5].
    const double det = 1.01 * 1.01 - 1.0;
    CHECK(post.weights()(0) == doctest::Approx((1.01 * 1.0 - 0.5) / det));
    CHECK(post.weights()(1) == doctest::Approx((1.01 * 0.5 - 1.0) / det));
}

TEST_CASE("prior is returned for an empty sample set") {
    auto model = line_model(50);
    SampleSet s(2);
    const auto post = gp_fit(model, s, 1, 0.01);
    const auto p = post.predict_all();
    CHECK(p.mean.cwiseAbs().maxCoeff() == 0.0);
    CHECK((p.variance.array() == 1.0).all());
    CHECK_THROWS_AS(mean_rkhs_norm(post), std::invalid_argument);
    CHECK(reciprocal_cov_integral(post, DomainMask::full(model->grid)) == doctest::Approx(1.0));
    CHECK(info_gain(post) == 0.0);
}

TEST_CASE("argument errors") {
    auto model = line_model(50);
    SampleSet s(2);
    CHECK_THROWS_AS(s.append(3, {1.0}), std::invalid_argument);
    s.append(3, {1.0, 2.0});
    CHECK_THROWS_AS(gp_fit(model, s, 0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(gp_fit(model, s, 2, 0.1), std::out_of_range);
    const auto post = gp_fit(model, s, 0, 0.1);
    CHECK_THROWS_AS(reciprocal_cov_integral(post, DomainMask(model->grid.size(), MaskLabel::Tilde)),
                    std::invalid_argument);
}

TEST_CASE("cholesky reports the failing pivot") {
    Eigen::MatrixXd m(3, 3);
    m << 1, 0, 0, 0, 1, 0, 0, 0, -1;
    const auto pivot = cholesky_in_place(m);
    REQUIRE(pivot.has_value());
    CHECK(*pivot == 2);
    Eigen::MatrixXd spd = Eigen::MatrixXd::Identity(4, 4) * 2.0;
    CHECK_FALSE(cholesky_in_place(spd).has_value());
    CHECK(spd(3, 3) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("posterior matches a dense-solve oracle") {
    auto model = line_model(300);
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> pick(0, 299);
    std::normal_distribution<double> nrm(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 1 + rep % 8;
        SampleSet s(1);
        for (std::size_t k = 0; k < n; ++k) {
            s.append(pick(rng), {nrm(rng)});
        }
        const double sigma = 0.05;
        const auto post = gp_fit(model, s, 0, sigma);
        const auto pred = post.predict_all();

        Eigen::MatrixXd k(n, n);
        Eigen::VectorXd y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y(i) = s.values(0)[i];
            for (std::size_t j = 0; j < n; ++j) {
                k(i, j) = oracle_k(model->grid.point(s.params()[i])(0), model->grid.point(s.params()[j])(0));
            }
            k(i, i) += sigma * sigma;
        }
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
        const Eigen::VectorXd w = lu.solve(y);
        for (GridIndex a = 0; a < 300; a += 7) {
            Eigen::VectorXd ka(n);
            for (std::size_t i = 0; i < n; ++i) {
                ka(i) = oracle_k(model->grid.point(a)(0), model->grid.point(s.params()[i])(0));
            }
            CHECK(pred.mean(a) == doctest::Approx(ka.dot(w)).epsilon(1e-9));
            CHECK(pred.variance(a) == doctest::Approx(1.0 - ka.dot(lu.solve(ka))).epsilon(1e-9));
        }
        CHECK(mean_rkhs_norm(post) == doctest::Approx(std::sqrt(w.dot((k - sigma * sigma * Eigen::MatrixXd::Identity(n, n)) * w))));
    }
}

TEST_CASE("variance never increases when a sample is added") {
    auto model = line_model(150);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> pick(0, 149);
    for (int rep = 0; rep < 10; ++rep) {
        SampleSet s(1);
        Eigen::VectorXd prev = Eigen::VectorXd::Ones(150);
        for (int k = 0; k < 8; ++k) {
            s.append(pick(rng), {0.0});
            const auto var = gp_fit(model, s, 0, 0.01).predict_all().variance;
            CHECK(((var.array() - prev.array()) <= 1e-12).all());
            CHECK((var.array() >= 0.0).all());
            CHECK((var.array() <= 1.0).all());
            prev = var;
        }
    }
}

TEST_CASE("reciprocal covariance integral over a mask") {
    auto model = line_model(100);
    SampleSet s(1);
    s.append(50, {0.2});
    const auto post = gp_fit(model, s, 0, 0.01);
    const auto var = post.predict_all().variance;
    DomainMask mask(100, MaskLabel::Hat);
    double total = 0.0;
    for (GridIndex a = 40; a < 60; ++a) {
        mask.set(a);
        total += var(a) * 0.01;
    }
    CHECK(reciprocal_cov_integral(post, mask) == doctest::Approx(1.0 / total).epsilon(1e-12));
    CHECK(reciprocal_cov_integral(var, mask, 0.01) == doctest::Approx(1.0 / total).epsilon(1e-12));
    // A smaller mask covers less variance mass.
    CHECK(reciprocal_cov_integral(post, mask) > reciprocal_cov_integral(post, DomainMask::full(model->grid)));
}

TEST_CASE("mean function norm equals the norm of its kernel expansion") {
    auto model = line_model(400);
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::size_t> pick(0, 399);
    std::normal_distribution<double> nrm(0.0, 1.0);
    SampleSet s(1);
    for (int k = 0; k < 6; ++k) {
        s.append(pick(rng), {nrm(rng)});
    }
    const auto post = gp_fit(model, s, 0, 0.01);
    RkhsFunction f;
    f.kernel = KernelConfig{};
    f.centers.resize(6, 1);
    for (int k = 0; k < 6; ++k) {
        f.centers(k, 0) = model->grid.point(s.params()[k])(0);
    }
    f.coefficients = post.weights();
    CHECK(mean_rkhs_norm(post) == doctest::Approx(rkhs_norm(f)).epsilon(1e-12));
    const auto mu = post.predict_all().mean;
    for (GridIndex a = 0; a < 400; a += 37) {
        CHECK(evaluate(f, model->grid.point(a)) == doctest::Approx(mu(a)).epsilon(1e-10));
    }
}
