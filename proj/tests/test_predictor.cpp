#include "pacsbo/gp.hpp"
#include "pacsbo/predictor.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

using namespace pacsbo;

TEST_CASE("trace window keeps the newest pairs") {
    NormTrace t(3);
    for (int k = 1; k <= 5; ++k) {
        t.append(k, 10.0 * k);
    }
    CHECK(t.size() == 3);
    CHECK(t.truncated());
    CHECK(t.pairs().front().first == 3.0);
    CHECK(t.pairs().back().second == 50.0);
    CHECK_THROWS_AS(t.append(-1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(t.append(1.0, 0.0), std::invalid_argument);
    const auto u = append_trace(t, 6.0, 60.0);
    CHECK(u.pairs().back().first == 6.0);
    CHECK(t.pairs().back().first == 5.0);
}

TEST_CASE("encoding pads zeros in front") {
    NormTrace t(4);
    t.append(1.5, 2.0);
    t.append(2.5, 3.0);
    const auto x = encode_trace(t, 8);
    Eigen::VectorXd expect(8);
    expect << 0, 0, 0, 0, 1.5, 2.0, 2.5, 3.0;
    CHECK(x == expect);
    CHECK(encode_trace(NormTrace(4), 8).isZero());
}

TEST_CASE("softplus is positive and matches its closed form") {
    CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
    CHECK(softplus(40.0) == doctest::Approx(40.0));
    CHECK(softplus(-800.0) > 0.0);
    CHECK(softplus(-3.0) == doctest::Approx(std::log1p(std::exp(-3.0))));
}

TEST_CASE("backpropagation matches finite differences") {
    Rng rng(5);
    MlpArchitecture arch{6, {5, 4}};
    const MlpNetwork net = init_network(arch, rng);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd x(6, 7);
    Eigen::RowVectorXd y(7);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = n(rng);
    }
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y(i) = 1.0 + std::abs(n(rng));
    }
    std::vector<DenseLayer> grad;
    net.loss(x, y, &grad);
    REQUIRE(grad.size() == 3);
    const double h = 1e-6;
    for (std::size_t l = 0; l < 3; ++l) {
        for (Eigen::Index e = 0; e < net.layers[l].weights.size(); e += 3) {
            MlpNetwork p = net, m = net;
            p.layers[l].weights.data()[e] += h;
            m.layers[l].weights.data()[e] -= h;
            const double fd = (p.loss(x, y, nullptr) - m.loss(x, y, nullptr)) / (2 * h);
            CHECK(grad[l].weights.data()[e] == doctest::Approx(fd).epsilon(1e-5));
        }
        for (Eigen::Index e = 0; e < net.layers[l].bias.size(); ++e) {
            MlpNetwork p = net, m = net;
            p.layers[l].bias(e) += h;
            m.layers[l].bias(e) -= h;
            const double fd = (p.loss(x, y, nullptr) - m.loss(x, y, nullptr)) / (2 * h);
            CHECK(grad[l].bias(e) == doctest::Approx(fd).epsilon(1e-5));
        }
    }
    CHECK((net.forward(x).array() > 0.0).all());
}

namespace {

TrainingSet toy_data(std::size_t n, std::size_t len, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TrainingSet d;
    for (std::size_t k = 0; k < n; ++k) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(len));
        for (auto& v : x) {
            v = u(rng);
        }
        d.inputs.push_back(x);
        d.labels.push_back(scale * (1.0 + 2.0 * x(0) + x(1) * x(1)));
    }
    return d;
}

}  // namespace

TEST_CASE("training lowers the loss and round-trips through json") {
    const auto data = toy_data(300, 10, 1);
    MlpArchitecture arch{10, {16, 16}};
    TrainingHyper hyper{150, 32, 3e-3};
    const auto eta = train_mlp(data, arch, hyper, 9);
    REQUIRE(eta.loss_curve.size() == 150);
    CHECK(eta.loss_curve.back() < 0.2 * eta.loss_curve.front());
    CHECK(eta.final_loss < 0.05);

    NormTrace t(5);
    t.append(0.3, 0.8);
    t.append(0.5, 0.2);
    const double before = predict_norm(eta, t);
    CHECK(before > 0.0);

    const std::string path = "test_predictor_roundtrip.json";
    save_predictor(eta, path);
    const auto back = load_predictor(path);
    std::remove(path.c_str());
    CHECK(predict_norm(back, t) == before);
    CHECK(back.input_length() == 10);

    auto j = to_json(eta);
    CHECK(j["format"] == "pacsbo-predictor");
    j["schema_version"] = 2;
    CHECK_THROWS_AS(predictor_from_json(j), std::invalid_argument);
    j = to_json(eta);
    j["layers"][0]["rows"] = 3;
    CHECK_THROWS_AS(predictor_from_json(j), std::invalid_argument);
    CHECK_THROWS(load_predictor("does/not/exist.json"));

    NormTrace wrong(7);
    for (int k = 0; k < 6; ++k) {
        wrong.append(1.0, 1.0);
    }
    CHECK_THROWS_AS(predict_norm(eta, wrong), std::invalid_argument);
}

TEST_CASE("training is deterministic for a seed") {
    const auto data = toy_data(80, 4, 2);
    MlpArchitecture arch{4, {8}};
    TrainingHyper hyper{20, 16, 1e-2};
    const auto a = train_mlp(data, arch, hyper, 3);
    const auto b = train_mlp(data, arch, hyper, 3);
    CHECK(a.final_loss == b.final_loss);
    CHECK(a.network.layers[0].weights == b.network.layers[0].weights);
}

TEST_CASE("divergent training is reported") {
    const auto data = toy_data(50, 4, 3);
    MlpArchitecture arch{4, {8}};
    TrainingHyper hyper{50, 8, 1e200};
    CHECK_THROWS_AS(train_mlp(data, arch, hyper, 1), TrainingDivergence);
    TrainingSet bad = data;
    bad.labels[0] = -1.0;
    CHECK_THROWS_AS((train_mlp(bad, arch, TrainingHyper{}, 1)), std::invalid_argument);
}

TEST_CASE("training data rollouts label every prefix with the true norm") {
    auto model = make_grid_model(GridDomain({200}), KernelConfig{});
    TrainingDataConfig cfg;
    cfg.num_functions = 3;
    cfg.steps = 4;
    cfg.trace_capacity = 5;
    cfg.label_multiplier = 2.0;
    const auto d = generate_training_data(model, cfg, 4);
    REQUIRE(d.size() > 0);
    CHECK(d.size() <= 12);
    for (std::size_t k = 0; k < d.size(); ++k) {
        CHECK(d.inputs[k].size() == 10);
        CHECK(d.labels[k] > 0.0);
        // Last pair is always filled.
        CHECK(d.inputs[k](9) > 0.0);
    }
    const auto again = generate_training_data(model, cfg, 4);
    CHECK(again.labels == d.labels);
}
