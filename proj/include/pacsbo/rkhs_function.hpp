#pragma once

#include "pacsbo/gp.hpp"
#include "pacsbo/kernel.hpp"
#include "pacsbo/random.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace pacsbo {

/// Finite kernel expansion f(.) = sum_s alpha_s k(x_s, .). Its RKHS norm is
/// exactly sqrt(alpha^T K alpha).
struct RkhsFunction {
    Eigen::MatrixXd centers;       ///< one center per row, in [0,1]^n
    Eigen::VectorXd coefficients;  ///< one coefficient per center
    KernelConfig kernel;

    std::size_t size() const { return static_cast<std::size_t>(coefficients.size()); }
    std::size_t dim() const { return static_cast<std::size_t>(centers.cols()); }
    void validate() const;
};

struct SamplerConfig {
    std::size_t num_centers = 100;  ///< total expansion length
    double coeff_bound = 1.0;       ///< free coefficients ~ U[-bound, bound]
    /// When set, sample_random_function rescales its draw to this norm.
    std::optional<double> target_norm;

    void validate() const;
};

double evaluate(const RkhsFunction& f, const Eigen::VectorXd& a);
/// Values at every grid point.
Eigen::VectorXd evaluate_on_grid(const RkhsFunction& f, const GridDomain& grid);

double rkhs_norm(const RkhsFunction& f);

/// Coefficients multiplied by target / rkhs_norm(f).
RkhsFunction scale_to_norm(const RkhsFunction& f, double target);

/// Centers drawn uniformly (with replacement) from the grid, coefficients
/// uniformly from [-bound, bound]. A zero-norm draw is returned unscaled.
RkhsFunction sample_random_function(const GridModel& model, const SamplerConfig& cfg, Rng& rng);

/// One draw of an interpolating function, expressed on grid indices.
struct InterpolationDraw {
    std::vector<GridIndex> centers;  ///< interpolation nodes first, then the free tail
    Eigen::VectorXd coefficients;
    Eigen::VectorXd node_noise;      ///< epsilon added to each node target
};

/// Generator of random expansions that pass through the (noise-perturbed)
/// measurements of one function index.
///
/// The first centers are the distinct sampled parameters. Repeated
/// evaluations of one parameter collapse into a single node whose target is
/// the mean of its measurements. The remaining num_centers - nodes centers
/// are drawn uniformly from `candidates`, with coefficients uniform in
/// [-bound, bound]. The node coefficients then solve
///   K_nn alpha_n = (target + eps) - K_nt alpha_t,
/// with eps truncated Gaussian (std sigma, |eps| <= 2 sigma), so the draw
/// equals target + eps exactly at every node. K_nn is factorized once and
/// reused for every draw.
class InterpolatingSampler {
public:
    InterpolatingSampler(GridModelPtr model, const SampleSet& samples, std::size_t function_index, double sigma,
                         std::vector<GridIndex> candidates, const SamplerConfig& cfg);

    InterpolationDraw draw(Rng& rng) const;
    double norm(const InterpolationDraw& d) const;
    RkhsFunction to_function(const InterpolationDraw& d) const;

    const std::vector<GridIndex>& nodes() const { return nodes_; }
    const Eigen::VectorXd& node_targets() const { return targets_; }

private:
    GridModelPtr model_;
    std::vector<GridIndex> nodes_;
    Eigen::VectorXd targets_;
    double sigma_;
    std::vector<GridIndex> candidates_;
    SamplerConfig cfg_;
    Eigen::MatrixXd node_factor_;
};

/// Single interpolating draw with tail centers from the whole grid.
RkhsFunction sample_interpolating_function(const GridModelPtr& model, const SampleSet& samples,
                                           std::size_t function_index, double sigma, const SamplerConfig& cfg,
                                           Rng& rng);

nlohmann::json to_json(const RkhsFunction& f);
RkhsFunction rkhs_function_from_json(const nlohmann::json& j);

}  // namespace pacsbo
