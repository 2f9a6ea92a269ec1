#pragma once

#include "pacsbo/gp.hpp"
#include "pacsbo/random.hpp"
#include "pacsbo/rkhs_function.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace pacsbo {

/// Chronological (mean-function norm, reciprocal covariance integral) pairs.
/// Holds at most `capacity` pairs; older pairs fall out of the window.
class NormTrace {
public:
    explicit NormTrace(std::size_t capacity = 50) : capacity_(capacity) {}

    void append(double norm, double r);

    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }
    std::size_t capacity() const { return capacity_; }
    bool truncated() const { return truncated_; }
    const std::vector<std::pair<double, double>>& pairs() const { return pairs_; }

private:
    std::size_t capacity_;
    std::vector<std::pair<double, double>> pairs_;
    bool truncated_ = false;
};

/// Returns a copy of `trace` with one more pair.
NormTrace append_trace(const NormTrace& trace, double norm, double r);

/// Raw fixed-length encoding [0, ..., 0, n1, r1, ..., nk, rk], zero-padded
/// at the front.
Eigen::VectorXd encode_trace(const NormTrace& trace, std::size_t length);

/// Fully connected layer, y = W x + b.
struct DenseLayer {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
};

/// tanh hidden layers, linear last layer followed by softplus.
struct MlpNetwork {
    std::vector<DenseLayer> layers;

    std::size_t input_size() const { return static_cast<std::size_t>(layers.front().weights.cols()); }

    /// Output for each column of `x`.
    Eigen::RowVectorXd forward(const Eigen::MatrixXd& x) const;

    /// Mean squared error over the columns of `x` against `y`; fills `grad`
    /// (same shapes as `layers`) when non-null.
    double loss(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y, std::vector<DenseLayer>* grad) const;
};

double softplus(double z);

struct MlpArchitecture {
    std::size_t input_length = 100;
    std::vector<std::size_t> hidden = {64, 64};
};

MlpNetwork init_network(const MlpArchitecture& arch, Rng& rng);

struct TrainingHyper {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double step_size = 1e-3;
};

/// Encoded traces with positive labels.
struct TrainingSet {
    std::vector<Eigen::VectorXd> inputs;
    std::vector<double> labels;

    std::size_t size() const { return labels.size(); }
};

/// Trained norm predictor: standardization followed by the network.
struct MlpPredictor {
    static constexpr int kSchemaVersion = 1;

    MlpNetwork network;
    Eigen::VectorXd feature_mean;
    Eigen::VectorXd feature_scale;
    double final_loss = 0.0;
    std::vector<double> loss_curve;

    std::size_t input_length() const { return network.input_size(); }
    Eigen::VectorXd normalize(const Eigen::VectorXd& raw) const;
};

class TrainingDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Minimizes the mean squared error with mini-batch Adam. Throws
/// TrainingDivergence on a non-finite loss.
MlpPredictor train_mlp(const TrainingSet& data, const MlpArchitecture& arch, const TrainingHyper& hyper,
                       std::uint64_t seed);

/// Strictly positive norm estimate for a trace.
double predict_norm(const MlpPredictor& eta, const NormTrace& trace);

nlohmann::json to_json(const MlpPredictor& eta);
/// Rejects unknown formats and schema versions.
MlpPredictor predictor_from_json(const nlohmann::json& j);
void save_predictor(const MlpPredictor& eta, const std::string& path);
MlpPredictor load_predictor(const std::string& path);

/// Rollout settings for building the predictor's training data.
struct TrainingDataConfig {
    std::size_t num_functions = 200;  ///< random RKHS functions (q_train)
    std::size_t steps = 30;           ///< SafeOpt iterations per rollout (T)
    std::size_t trace_capacity = 50;  ///< T_max; input length is twice this
    SamplerConfig sampler;            ///< generator of the training functions
    double sigma = 0.001;
    double delta = 0.1;
    double safe_fraction = 0.6;
    double label_multiplier = 1.0;
};

/// Runs fixed-bound SafeOpt (bound = true norm) on random RKHS functions and
/// emits every prefix of each rollout's trace with label
/// multiplier * true norm. Trace pairs are computed from the reward GP on
/// the current samples before each step.
TrainingSet generate_training_data(const GridModelPtr& model, const TrainingDataConfig& cfg, std::uint64_t seed);

}  // namespace pacsbo
