#pragma once

#include "pacsbo/gp.hpp"
#include "pacsbo/mask.hpp"

#include <optional>
#include <vector>

namespace pacsbo {

/// beta^{1/2} = B + sigma * sqrt(2 (gamma + 1 + ln(1/delta))).
double beta_scale(double norm_bound, double sigma, double info_gain, double delta);

/// Lower/upper confidence bounds per function index over one mask.
/// Entries outside the mask are NaN.
struct ConfidenceField {
    std::vector<Eigen::VectorXd> lower;
    std::vector<Eigen::VectorXd> upper;
    std::vector<double> beta;

    std::size_t num_functions() const { return lower.size(); }
    /// max_i (u(a,i) - l(a,i)).
    double width(GridIndex a) const;
};

ConfidenceField confidence_bounds(const std::vector<GridPrediction>& predictions, const std::vector<double>& beta,
                                  const DomainMask& mask);

struct SafeSet {
    std::vector<GridIndex> points;  ///< sorted
    bool seed_in_mask = true;       ///< false when S0 and the mask are disjoint
};

/// S = (S0 n mask) u { a in mask : l(a,i) >= 0 for every constraint i >= 1 }.
SafeSet safe_set(const ConfidenceField& field, const std::vector<GridIndex>& seed, const DomainMask& mask);

/// M = { a in S : u(a,0) >= max_{a' in S} l(a',0) }.
std::vector<GridIndex> maximizers(const ConfidenceField& field, const std::vector<GridIndex>& safe);

struct ExpanderOptions {
    /// Test every safe point instead of only those next to the safe-set boundary.
    bool exact = false;
};

/// Safe points whose optimistic observation u(a,i) for every constraint,
/// once conditioned on, makes at least one point of mask \ S safe.
/// `posteriors` share one sample set; only their common covariance is used
/// for the refit, `predictions` supply the current means and variances.
std::vector<GridIndex> expanders(const std::vector<GpPosterior>& posteriors,
                                 const std::vector<GridPrediction>& predictions, const ConfidenceField& field,
                                 const std::vector<GridIndex>& safe, const DomainMask& mask,
                                 const ExpanderOptions& options = {});

/// Candidate with the widest confidence interval; lowest index wins ties.
std::optional<GridIndex> acquire(const ConfidenceField& field, const std::vector<GridIndex>& candidates);

struct SafeOptState {
    MaskLabel label = MaskLabel::Global;
    SafeSet safe;
    std::vector<GridIndex> maximizers;
    std::vector<GridIndex> expanders;
    ConfidenceField field;

    /// Sorted union of maximizers and expanders.
    std::vector<GridIndex> candidates() const;
};

/// One SafeOpt subroutine evaluation on a mask for fixed beta per function.
SafeOptState safeopt_subroutine(const std::vector<GpPosterior>& posteriors,
                                const std::vector<GridPrediction>& predictions, const std::vector<double>& beta,
                                const std::vector<GridIndex>& seed, const DomainMask& mask,
                                const ExpanderOptions& options = {});

/// Everything computed while planning one fixed-bound SafeOpt iteration.
struct SafeOptPlan {
    std::vector<GpPosterior> posteriors;
    std::vector<GridPrediction> predictions;
    SafeOptState state;
    std::optional<GridIndex> next;
};

/// Plain single-domain SafeOpt step: fit one GP per function index, scale
/// the confidence intervals with beta_scale(bound_i, ...) and pick the most
/// uncertain maximizer or expander.
SafeOptPlan plan_safeopt_step(const GridModelPtr& model, const SampleSet& samples, double sigma, double delta,
                              const std::vector<double>& bounds, const std::vector<GridIndex>& seed,
                              const ExpanderOptions& options = {});

}  // namespace pacsbo
