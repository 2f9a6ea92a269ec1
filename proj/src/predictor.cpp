#include "pacsbo/predictor.hpp"

#include "pacsbo/problem.hpp"
#include "pacsbo/safeopt.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pacsbo {

void NormTrace::append(double norm, double r) {
    if (!(norm >= 0.0) || !(r > 0.0)) {
        throw std::invalid_argument("NormTrace::append: need norm >= 0 and r > 0");
    }
    if (capacity_ == 0) {
        truncated_ = true;
        return;
    }
    if (pairs_.size() == capacity_) {
        pairs_.erase(pairs_.begin());
        truncated_ = true;
    }
    pairs_.emplace_back(norm, r);
}

NormTrace append_trace(const NormTrace& trace, double norm, double r) {
    NormTrace out = trace;
    out.append(norm, r);
    return out;
}

Eigen::VectorXd encode_trace(const NormTrace& trace, std::size_t length) {
    if (2 * trace.size() > length) {
        throw std::invalid_argument("encode_trace: trace of " + std::to_string(trace.size()) +
                                    " pairs does not fit length " + std::to_string(length));
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(length));
    auto pos = static_cast<Eigen::Index>(length - 2 * trace.size());
    for (const auto& [n, r] : trace.pairs()) {
        x(pos++) = n;
        x(pos++) = r;
    }
    return x;
}

double softplus(double z) {
    const double v = z > 30.0 ? z : std::log1p(std::exp(z));
    return std::max(v, std::numeric_limits<double>::min());
}

namespace {

double sigmoid(double z) {
    return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace

Eigen::RowVectorXd MlpNetwork::forward(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z = layers[l].weights * a;
        z.colwise() += layers[l].bias;
        a = (l + 1 < layers.size()) ? Eigen::MatrixXd(z.array().tanh()) : z;
    }
    Eigen::RowVectorXd out(a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        out(j) = softplus(a(0, j));
    }
    return out;
}

double MlpNetwork::loss(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y, std::vector<DenseLayer>* grad) const {
    const Eigen::Index batch = x.cols();
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(layers.size() + 1);
    acts.push_back(x);
    Eigen::RowVectorXd z_out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z = layers[l].weights * acts.back();
        z.colwise() += layers[l].bias;
        if (l + 1 < layers.size()) {
            acts.emplace_back(z.array().tanh());
        } else {
            z_out = z.row(0);
        }
    }
    Eigen::RowVectorXd pred(batch);
    for (Eigen::Index j = 0; j < batch; ++j) {
        pred(j) = softplus(z_out(j));
    }
    const Eigen::RowVectorXd diff = pred - y;
    const double value = diff.squaredNorm() / static_cast<double>(batch);
    if (grad == nullptr) {
        return value;
    }

    grad->resize(layers.size());
    Eigen::MatrixXd delta(1, batch);
    for (Eigen::Index j = 0; j < batch; ++j) {
        delta(0, j) = 2.0 * diff(j) / static_cast<double>(batch) * sigmoid(z_out(j));
    }
    for (std::size_t l = layers.size(); l-- > 0;) {
        (*grad)[l].weights = delta * acts[l].transpose();
        (*grad)[l].bias = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = layers[l].weights.transpose() * delta;
            delta = back.array() * (1.0 - acts[l].array().square());
        }
    }
    return value;
}

MlpNetwork init_network(const MlpArchitecture& arch, Rng& rng) {
    if (arch.input_length == 0) {
        throw std::invalid_argument("MlpArchitecture: input_length must be positive");
    }
    std::vector<std::size_t> sizes{arch.input_length};
    sizes.insert(sizes.end(), arch.hidden.begin(), arch.hidden.end());
    sizes.push_back(1);
    MlpNetwork net;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        if (sizes[l + 1] == 0) {
            throw std::invalid_argument("MlpArchitecture: hidden layers must be nonempty");
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
        std::uniform_real_distribution<double> u(-limit, limit);
        DenseLayer layer;
        layer.weights.resize(static_cast<Eigen::Index>(sizes[l + 1]), static_cast<Eigen::Index>(sizes[l]));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = u(rng);
            }
        }
        layer.bias = Eigen::VectorXd::Zero(layer.weights.rows());
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Eigen::VectorXd MlpPredictor::normalize(const Eigen::VectorXd& raw) const {
    return ((raw - feature_mean).array() / feature_scale.array()).matrix();
}

MlpPredictor train_mlp(const TrainingSet& data, const MlpArchitecture& arch, const TrainingHyper& hyper,
                       std::uint64_t seed) {
    if (data.size() == 0 || data.inputs.size() != data.labels.size()) {
        throw std::invalid_argument("train_mlp: need a nonempty training set with one label per input");
    }
    if (hyper.batch_size == 0 || hyper.epochs == 0 || !(hyper.step_size > 0.0)) {
        throw std::invalid_argument("train_mlp: epochs, batch_size and step_size must be positive");
    }
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto dim = static_cast<Eigen::Index>(arch.input_length);
    Eigen::MatrixXd x(dim, n);
    Eigen::RowVectorXd y(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& in = data.inputs[static_cast<std::size_t>(j)];
        if (in.size() != dim) {
            throw std::invalid_argument("train_mlp: input length does not match the architecture");
        }
        if (!(data.labels[static_cast<std::size_t>(j)] > 0.0)) {
            throw std::invalid_argument("train_mlp: labels must be positive");
        }
        x.col(j) = in;
        y(j) = data.labels[static_cast<std::size_t>(j)];
    }

    MlpPredictor eta;
    eta.feature_mean = x.rowwise().mean();
    eta.feature_scale = ((x.colwise() - eta.feature_mean).array().square().rowwise().mean().sqrt()).matrix();
    for (Eigen::Index d = 0; d < dim; ++d) {
        if (!(eta.feature_scale(d) > 1e-12)) {
            eta.feature_scale(d) = 1.0;
        }
    }
    const Eigen::MatrixXd xs =
        ((x.colwise() - eta.feature_mean).array().colwise() / eta.feature_scale.array()).matrix();

    Rng rng(seed);
    eta.network = init_network(arch, rng);
    // Start the output at the mean label.
    eta.network.layers.back().bias(0) = std::log(std::expm1(std::max(y.mean(), 1e-6)));

    const double b1 = 0.9;
    const double b2 = 0.999;
    const double eps = 1e-8;
    std::vector<DenseLayer> m1;
    std::vector<DenseLayer> m2;
    for (const auto& l : eta.network.layers) {
        m1.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    m2 = m1;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::vector<DenseLayer> grad;
    std::size_t t = 0;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
            const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
            const auto b = static_cast<Eigen::Index>(stop - start);
            Eigen::MatrixXd xb(dim, b);
            Eigen::RowVectorXd yb(b);
            for (Eigen::Index k = 0; k < b; ++k) {
                xb.col(k) = xs.col(order[start + static_cast<std::size_t>(k)]);
                yb(k) = y(order[start + static_cast<std::size_t>(k)]);
            }
            const double loss = eta.network.loss(xb, yb, &grad);
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "train_mlp: non-finite loss at epoch " << epoch << " (step size " << hyper.step_size << ")";
                throw TrainingDivergence(msg.str());
            }
            epoch_loss += loss * static_cast<double>(b);
            ++t;
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
            for (std::size_t l = 0; l < grad.size(); ++l) {
                auto& layer = eta.network.layers[l];
                m1[l].weights = b1 * m1[l].weights + (1.0 - b1) * grad[l].weights;
                m2[l].weights = b2 * m2[l].weights + (1.0 - b2) * grad[l].weights.cwiseAbs2();
                m1[l].bias = b1 * m1[l].bias + (1.0 - b1) * grad[l].bias;
                m2[l].bias = b2 * m2[l].bias + (1.0 - b2) * grad[l].bias.cwiseAbs2();
                layer.weights.array() -=
                    hyper.step_size * (m1[l].weights.array() / c1) / ((m2[l].weights.array() / c2).sqrt() + eps);
                layer.bias.array() -=
                    hyper.step_size * (m1[l].bias.array() / c1) / ((m2[l].bias.array() / c2).sqrt() + eps);
            }
        }
        eta.loss_curve.push_back(epoch_loss / static_cast<double>(n));
    }
    eta.final_loss = eta.network.loss(xs, y, nullptr);
    if (!std::isfinite(eta.final_loss)) {
        throw TrainingDivergence("train_mlp: non-finite final loss");
    }
    return eta;
}

double predict_norm(const MlpPredictor& eta, const NormTrace& trace) {
    const Eigen::VectorXd x = eta.normalize(encode_trace(trace, eta.input_length()));
    return eta.network.forward(x)(0);
}

nlohmann::json to_json(const MlpPredictor& eta) {
    nlohmann::json layers = nlohmann::json::array();
    std::vector<std::size_t> hidden;
    for (std::size_t l = 0; l < eta.network.layers.size(); ++l) {
        const auto& layer = eta.network.layers[l];
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(layer.weights.size()));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                w.push_back(layer.weights(r, c));
            }
        }
        layers.push_back({{"rows", layer.weights.rows()},
                          {"cols", layer.weights.cols()},
                          {"weights", w},
                          {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
        if (l + 1 < eta.network.layers.size()) {
            hidden.push_back(static_cast<std::size_t>(layer.weights.rows()));
        }
    }
    const auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return {
        {"format", "pacsbo-predictor"},
        {"schema_version", MlpPredictor::kSchemaVersion},
        {"architecture",
         {{"input_length", eta.input_length()}, {"hidden", hidden}, {"activation", "tanh"}, {"output", "softplus"}}},
        {"normalization", {{"mean", vec(eta.feature_mean)}, {"scale", vec(eta.feature_scale)}}},
        {"layers", layers},
        {"final_loss", eta.final_loss},
    };
}

MlpPredictor predictor_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "pacsbo-predictor") {
        throw std::invalid_argument("predictor file: unknown format");
    }
    if (j.value("schema_version", -1) != MlpPredictor::kSchemaVersion) {
        throw std::invalid_argument("predictor file: schema_version " + j.value("schema_version", nlohmann::json()).dump() +
                                    " is not supported (expected " + std::to_string(MlpPredictor::kSchemaVersion) + ")");
    }
    const auto& arch = j.at("architecture");
    if (arch.at("activation") != "tanh" || arch.at("output") != "softplus") {
        throw std::invalid_argument("predictor file: unsupported activation or output transform");
    }
    MlpPredictor eta;
    const auto input = arch.at("input_length").get<std::size_t>();
    const auto mean = j.at("normalization").at("mean").get<std::vector<double>>();
    const auto scale = j.at("normalization").at("scale").get<std::vector<double>>();
    if (mean.size() != input || scale.size() != input) {
        throw std::invalid_argument("predictor file: normalization length does not match input_length");
    }
    eta.feature_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    eta.feature_scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    if ((eta.feature_scale.array() <= 0.0).any()) {
        throw std::invalid_argument("predictor file: normalization scale must be positive");
    }
    std::size_t prev = input;
    for (const auto& lj : j.at("layers")) {
        const auto rows = lj.at("rows").get<std::size_t>();
        const auto cols = lj.at("cols").get<std::size_t>();
        const auto w = lj.at("weights").get<std::vector<double>>();
        const auto b = lj.at("bias").get<std::vector<double>>();
        if (cols != prev || w.size() != rows * cols || b.size() != rows) {
            throw std::invalid_argument("predictor file: inconsistent layer shapes");
        }
        DenseLayer layer;
        layer.weights.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                layer.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[r * cols + c];
            }
        }
        layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
        eta.network.layers.push_back(std::move(layer));
        prev = rows;
    }
    if (eta.network.layers.empty() || prev != 1) {
        throw std::invalid_argument("predictor file: network must end in a single output");
    }
    eta.final_loss = j.value("final_loss", 0.0);
    return eta;
}

void save_predictor(const MlpPredictor& eta, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write predictor file " + path);
    }
    out << to_json(eta).dump(1) << '\n';
}

MlpPredictor load_predictor(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read predictor file " + path);
    }
    return predictor_from_json(nlohmann::json::parse(in));
}

TrainingSet generate_training_data(const GridModelPtr& model, const TrainingDataConfig& cfg, std::uint64_t seed) {
    TrainingSet data;
    const std::size_t length = 2 * cfg.trace_capacity;
    const DomainMask everything = DomainMask::full(model->grid);
    for (std::size_t j = 0; j < cfg.num_functions; ++j) {
        Rng rng = make_rng(seed, {j});
        RkhsFunction rho = sample_random_function(*model, cfg.sampler, rng);
        const double true_norm = rkhs_norm(rho);
        if (!(true_norm > 0.0)) {
            spdlog::info("training rollout {} discarded: zero-norm function", j);
            continue;
        }
        const auto problem = SyntheticProblem::with_safe_fraction(model->grid, std::move(rho), cfg.safe_fraction);
        const auto seed_set = select_seed_set(problem, model->grid, rng);
        SampleSet samples = measure_seed_set(problem, seed_set, cfg.sigma, rng);

        TrainingSet rollout;
        NormTrace trace(cfg.trace_capacity);
        const std::vector<double> bounds(problem.num_functions(), true_norm);
        try {
            for (std::size_t t = 0; t < cfg.steps; ++t) {
                const GpPosterior reward = gp_fit(model, samples, 0, cfg.sigma);
                const double r = reciprocal_cov_integral(reward.predict_all().variance, everything,
                                                         model->grid.cell_volume());
                trace.append(mean_rkhs_norm(reward), r);
                rollout.inputs.push_back(encode_trace(trace, length));
                rollout.labels.push_back(cfg.label_multiplier * true_norm);

                const auto plan = plan_safeopt_step(model, samples, cfg.sigma, cfg.delta, bounds, seed_set);
                if (!plan.next) {
                    spdlog::debug("training rollout {} stalled after {} steps", j, t);
                    break;
                }
                samples.append(*plan.next, problem.measure(*plan.next, cfg.sigma, rng));
            }
        } catch (const NumericError& e) {
            spdlog::warn("training rollout {} discarded: {}", j, e.what());
            continue;
        }
        data.inputs.insert(data.inputs.end(), rollout.inputs.begin(), rollout.inputs.end());
        data.labels.insert(data.labels.end(), rollout.labels.begin(), rollout.labels.end());
    }
    return data;
}

}  // namespace pacsbo
