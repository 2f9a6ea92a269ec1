#pragma once

#include "pacsbo/gp.hpp"
#include "pacsbo/mask.hpp"
#include "pacsbo/pac_estimator.hpp"
#include "pacsbo/predictor.hpp"
#include "pacsbo/problem.hpp"
#include "pacsbo/safeopt.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace pacsbo {

enum class Algorithm { Pacsbo, SafeOpt };

std::string_view to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view s);

struct RunConfig {
    GridModelPtr model;
    double sigma = 0.001;
    double delta = 0.1;
    std::vector<GridIndex> seed_set;
    std::size_t iterations = 20;
    Algorithm algorithm = Algorithm::Pacsbo;
    PacConfig pac;
    std::shared_ptr<const MlpPredictor> predictor;  ///< pacsbo only
    double fixed_bound = 0.0;                       ///< safeopt only
    bool use_subdomains = true;  ///< false: the global partition alone
    double enlarge_factor = 1.1;
    ExpanderOptions expander;
    std::uint64_t seed = 0;

    void validate() const;
};

struct PartitionRecord {
    MaskLabel label = MaskLabel::Global;
    bool active = false;              ///< S0 meets the mask
    std::size_t mask_size = 0;
    std::vector<PacResult> bounds;    ///< one per function index
    std::size_t safe = 0;
    std::size_t maximizers = 0;
    std::size_t expanders = 0;
    std::optional<GridIndex> proposal;
    double proposal_width = 0.0;
};

struct IterationRecord {
    std::size_t iteration = 0;  ///< 1-based
    GridIndex chosen = 0;
    MaskLabel chosen_from = MaskLabel::Global;
    std::vector<double> measurement;
    std::vector<PartitionRecord> partitions;
    double best_safe_reward = 0.0;  ///< over all measurements so far
    bool unsafe = false;            ///< true constraint value negative
    double wall_seconds = 0.0;
};

enum class RunStatus { Completed, Stalled };
std::string_view to_string(RunStatus s);

struct RunHistory {
    std::vector<IterationRecord> iterations;
    RunStatus status = RunStatus::Completed;
    SampleSet samples;
    std::vector<GridIndex> seed_set;
    /// Best measured reward among parameters with nonnegative constraint
    /// measurements (the seed set included).
    std::optional<GridIndex> best_param;
    double best_reward = 0.0;
    double initial_best = 0.0;  ///< from the seed set alone

    bool any_unsafe() const;
    /// Best safe reward after `k` iterations (k = 0: seed set only).
    double best_after(std::size_t k) const;
};

/// What the loop saw while planning one iteration.
struct IterationSnapshot {
    std::size_t iteration;
    const SampleSet& samples;                    ///< before the new measurement
    const std::vector<GridPrediction>& predictions;
    const std::vector<SafeOptState>& states;     ///< one per active partition
    const IterationRecord& record;
};

using SnapshotObserver = std::function<void(const IterationSnapshot&)>;

/// Stepwise driver for one run. The seed set is measured on construction.
class Runner {
public:
    Runner(RunConfig config, const SyntheticProblem& problem);

    /// One iteration; nullopt when no partition offers a candidate.
    std::optional<IterationRecord> step(const SnapshotObserver& observer = {});

    const SampleSet& samples() const { return samples_; }
    const RunConfig& config() const { return config_; }
    /// Traces per partition (tilde, hat, global) and function index.
    const std::vector<std::vector<NormTrace>>& traces() const { return traces_; }

private:
    std::vector<PacResult> bounds_for(std::size_t p, const DomainMask& mask, const std::vector<GridPrediction>& preds,
                                      const std::vector<GpPosterior>& posts);

    RunConfig config_;
    const SyntheticProblem& problem_;
    Rng noise_;
    SampleSet samples_;
    std::vector<std::vector<NormTrace>> traces_;
    std::size_t iteration_ = 0;
    std::optional<GridIndex> best_param_;
    double best_ = 0.0;

    void note_measurement(GridIndex a, const std::vector<double>& m);
    friend RunHistory run(const RunConfig&, const SyntheticProblem&, const SnapshotObserver&);
};

/// Runs the configured number of iterations or until a stall.
RunHistory run(const RunConfig& config, const SyntheticProblem& problem, const SnapshotObserver& observer = {});

}  // namespace pacsbo
