#pragma once

#include "pacsbo/gp.hpp"
#include "pacsbo/mask.hpp"
#include "pacsbo/predictor.hpp"
#include "pacsbo/rkhs_function.hpp"

#include <cstdint>
#include <vector>

namespace pacsbo {

struct PacConfig {
    double delta = 0.1;
    std::size_t q_init = 500;
    std::size_t q_max = 5000;
    double safety_factor = 1.5;
    SamplerConfig sampler;

    void validate() const;
};

struct PacResult {
    double bound = 0.0;           ///< returned B
    double predicted = 0.0;       ///< predictor output before any escalation
    std::size_t q_used = 0;
    double empirical_mean = 0.0;
    double width = 0.0;
    double range = 0.0;           ///< max - min of the drawn norms
    bool escalated = false;       ///< safety factor applied at least once
};

/// sqrt(ln(2/delta) * range^2 / (2q)).
double hoeffding_width(double delta, std::size_t q, double range);

/// Pairwise (cascade) summation; rounding does not grow with the length.
double pairwise_sum(const double* data, std::size_t n);

/// Norms of draws [begin, end); draw j uses the stream derive_seed(seed, {j}).
std::vector<double> draw_norms(const InterpolatingSampler& sampler, std::size_t begin, std::size_t end,
                               std::uint64_t seed);

struct ThresholdStats {
    double mean = 0.0;
    double width = 0.0;
    double range = 0.0;
    double threshold() const { return mean + width; }
};

ThresholdStats threshold_stats(const std::vector<double>& norms, double delta);

/// Acceptance threshold mean + w over the first q draws of `sampler`.
ThresholdStats acceptance_threshold(const InterpolatingSampler& sampler, std::size_t q, double delta,
                                    std::uint64_t seed);

/// The over-estimation loop for a given predictor output. Draws grow by
/// q_init until the test B >= mean + w passes or q_max is exhausted; from
/// then on B is multiplied by the safety factor and retested on the
/// existing draws until it passes.
PacResult pac_overestimate(double predicted, const InterpolatingSampler& sampler, const PacConfig& cfg,
                           std::uint64_t seed);

/// Predictor output on `trace`, then pac_overestimate with interpolating
/// functions through the samples of index i inside `mask`, tail centers
/// drawn from the mask.
PacResult estimate_upper_bound(const MlpPredictor& eta, const NormTrace& trace, const GridModelPtr& model,
                               const SampleSet& samples, std::size_t i, double sigma, const DomainMask& mask,
                               const PacConfig& cfg, std::uint64_t seed);

/// Samples of `samples` whose parameter lies in `mask`.
SampleSet restrict_samples(const SampleSet& samples, const DomainMask& mask);

}  // namespace pacsbo
