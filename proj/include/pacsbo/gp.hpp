#pragma once

#include "pacsbo/grid.hpp"
#include "pacsbo/kernel.hpp"
#include "pacsbo/mask.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pacsbo {

/// Thrown when a linear-algebra step fails on numerically degenerate input.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A grid together with the kernel evaluated on it. Shared read-only by all
/// posteriors built over the same domain.
struct GridModel {
    GridModel(GridDomain g, const KernelConfig& cfg) : grid(std::move(g)), kernel(grid, cfg) {}

    GridDomain grid;
    GridKernel kernel;
};

using GridModelPtr = std::shared_ptr<const GridModel>;

inline GridModelPtr make_grid_model(GridDomain grid, const KernelConfig& cfg) {
    return std::make_shared<const GridModel>(std::move(grid), cfg);
}

/// Evaluated parameters and their measurements, one measurement list per
/// function index (0 = reward, 1.. = constraints). Append-only.
class SampleSet {
public:
    SampleSet() : SampleSet(2) {}
    explicit SampleSet(std::size_t num_functions) : values_(num_functions) {}

    void append(GridIndex param, const std::vector<double>& measurements);

    std::size_t size() const { return params_.size(); }
    bool empty() const { return params_.empty(); }
    std::size_t num_functions() const { return values_.size(); }
    const std::vector<GridIndex>& params() const { return params_; }
    const std::vector<double>& values(std::size_t i) const { return values_.at(i); }

private:
    std::vector<GridIndex> params_;
    std::vector<std::vector<double>> values_;
};

/// Lower Cholesky factor of a symmetric matrix, in place. Returns the index
/// of the first non-positive pivot on failure.
std::optional<std::size_t> cholesky_in_place(Eigen::MatrixXd& m);

struct GridPrediction {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

/// Zero-mean GP conditioned on the samples of one function index:
///   mean(a) = k_A(a)^T (K_A + s^2 I)^{-1} y
///   var(a)  = k(a,a) - k_A(a)^T (K_A + s^2 I)^{-1} k_A(a)
class GpPosterior {
public:
    GpPosterior(GridModelPtr model, std::vector<GridIndex> params, Eigen::VectorXd y, double sigma);

    std::size_t size() const { return params_.size(); }
    double sigma() const { return sigma_; }
    double jitter() const { return jitter_; }
    const GridModel& model() const { return *model_; }
    const GridModelPtr& model_ptr() const { return model_; }
    const std::vector<GridIndex>& params() const { return params_; }
    const Eigen::VectorXd& targets() const { return y_; }
    /// (K_A + s^2 I)^{-1} y.
    const Eigen::VectorXd& weights() const { return weights_; }
    /// L with L L^T = K_A + (s^2 + jitter) I.
    const Eigen::MatrixXd& factor() const { return factor_; }

    GridPrediction predict(const std::vector<GridIndex>& query) const;
    /// Prediction at every grid point.
    GridPrediction predict_all() const;

    /// Posterior covariance between a and each query point.
    Eigen::VectorXd covariance_with(GridIndex a, const std::vector<GridIndex>& query) const;

private:
    GridModelPtr model_;
    std::vector<GridIndex> params_;
    Eigen::VectorXd y_;
    double sigma_;
    double jitter_ = 0.0;
    Eigen::MatrixXd factor_;
    Eigen::VectorXd weights_;
};

/// Fit on measurements of function index i. sigma must be positive; an
/// empty sample set yields the prior.
GpPosterior gp_fit(const GridModelPtr& model, const SampleSet& samples, std::size_t i, double sigma);

/// Equivalent to post.predict(query).
GridPrediction gp_predict(const GpPosterior& post, const std::vector<GridIndex>& query);

/// sqrt(w^T K_A w). Throws std::invalid_argument for the prior.
double mean_rkhs_norm(const GpPosterior& post);

/// (sum_{a in mask} var(a) * cell_volume)^{-1}.
double reciprocal_cov_integral(const GpPosterior& post, const DomainMask& mask);
/// Same, from variances already evaluated over the whole grid.
double reciprocal_cov_integral(const Eigen::VectorXd& grid_variance, const DomainMask& mask, double cell_volume);

/// 0.5 * log det(I + s^{-2} K_A).
double info_gain(const GpPosterior& post);

}  // namespace pacsbo
