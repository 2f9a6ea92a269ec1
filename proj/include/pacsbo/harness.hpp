#pragma once

#include "pacsbo/pac_estimator.hpp"
#include "pacsbo/pacsbo_loop.hpp"
#include "pacsbo/predictor.hpp"
#include "pacsbo/problem.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pacsbo {

/// Invalid configuration file; the message names the file, line and field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parsed configuration text plus the bookkeeping needed for precise error
/// messages. Unknown keys are rejected by finish().
class ConfigNode {
public:
    static ConfigNode parse(const std::string& text, const std::string& source);
    static ConfigNode load(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    ConfigNode child(const std::string& key) const;
    /// Child if present, otherwise an empty object.
    ConfigNode child_or_empty(const std::string& key) const;

    template <typename T>
    T get(const std::string& key, const T& fallback) const {
        return has(key) ? convert<T>(key) : fallback;
    }
    template <typename T>
    T require(const std::string& key) const {
        if (!has(key)) {
            fail("missing required field '" + key + "'", key);
        }
        return convert<T>(key);
    }

    /// Throws ConfigError for keys never asked about.
    void finish() const;
    [[noreturn]] void fail(const std::string& what, const std::string& key = {}) const;

    const nlohmann::json& json() const { return *value_; }
    const std::string& path() const { return path_; }

private:
    template <typename T>
    T convert(const std::string& key) const {
        try {
            return value_->at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            fail("field '" + key + "' has the wrong type", key);
        }
    }

    std::shared_ptr<const std::string> text_;
    std::string source_;
    std::string path_;
    std::shared_ptr<const nlohmann::json> root_;
    const nlohmann::json* value_ = nullptr;
    std::shared_ptr<std::set<std::string>> seen_;
    std::shared_ptr<std::map<std::string, std::shared_ptr<std::set<std::string>>>> registry_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);

GridModelPtr make_model(std::size_t dim, const std::vector<std::size_t>& resolution, double lengthscale);

// ---------------------------------------------------------------- training

struct TrainSpec {
    std::size_t dim = 1;
    std::vector<std::size_t> resolution;  ///< empty: default for dim
    double lengthscale = 0.1;
    TrainingDataConfig data;
    MlpArchitecture architecture;
    TrainingHyper hyper;
    std::uint64_t seed = 0;
};

TrainSpec parse_train_spec(const ConfigNode& node);

struct TrainOutcome {
    MlpPredictor predictor;
    std::size_t examples = 0;
};

TrainOutcome train_predictor(const TrainSpec& spec);

// ---------------------------------------------------------------- experiments

enum class Scenario { Fig3Thresholds, CompareConservative, CompareOptimistic, Synthetic2d, HoeffdingMc };
std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view s);

struct ExperimentSpec {
    Scenario scenario = Scenario::CompareConservative;
    std::vector<std::uint64_t> seeds;
    std::size_t dim = 1;
    std::vector<std::size_t> resolution;
    double lengthscale = 0.1;

    // Ground truth.
    double truth_norm = 2.0;
    SamplerConfig truth_sampler;
    double safe_fraction = 0.6;
    std::optional<double> threshold;  ///< overrides safe_fraction

    // Loop.
    double sigma = 0.001;
    double delta = 0.1;
    std::size_t iterations = 20;
    PacConfig pac;
    std::string predictor_path;
    double safeopt_bound = 10.0;
    bool use_subdomains = true;
    double enlarge_factor = 1.1;
    bool exact_expanders = false;
    std::vector<Algorithm> algorithms;  ///< empty: scenario default
    bool snapshots = false;
    double reach_fraction = 0.9;
    std::size_t explored_after = 15;  ///< synthetic2d mask dump

    // fig3_thresholds.
    std::vector<std::size_t> sample_counts = {5, 20, 50};
    std::size_t draws = 5000;

    // hoeffding_mc.
    std::size_t replicates = 500;
    std::size_t mc_draws = 200;
    std::vector<double> deltas = {0.1, 0.5};
    std::string distribution = "uniform";
};

/// Scenario-specific defaults are applied before the file's values.
ExperimentSpec parse_experiment_spec(const ConfigNode& node, std::optional<Scenario> forced = std::nullopt);

/// Ground truth and seed set for one seed.
struct Instance {
    SyntheticProblem problem;
    std::vector<GridIndex> seed_set;
};

Instance make_instance(const GridModelPtr& model, const ExperimentSpec& spec, std::uint64_t seed);

RunConfig make_run_config(const ExperimentSpec& spec, const GridModelPtr& model, Algorithm algorithm,
                          std::shared_ptr<const MlpPredictor> predictor, const Instance& inst, std::uint64_t seed);

// ---------------------------------------------------------------- records

inline constexpr int kRunRecordSchema = 1;

/// One row of the run-record CSV. Iteration 0 rows hold the seed set.
struct RunRecordRow {
    std::uint64_t seed = 0;
    std::string algorithm;
    std::size_t iteration = 0;
    std::vector<double> x;
    std::vector<double> measurement;
    bool unsafe = false;
    std::string chosen_from;  ///< "seed" for iteration 0
    /// Per partition (tilde, hat, global): bound, q, escalated for each
    /// function index, then |S|, |M|, |G|. Missing partitions are NaN.
    std::vector<std::vector<double>> partition_fields;
    double best_so_far = 0.0;
};

std::vector<std::string> run_record_header(std::size_t dim, std::size_t num_functions);
std::vector<RunRecordRow> to_rows(const RunHistory& h, const SyntheticProblem& problem, const GridDomain& grid,
                                  std::uint64_t seed, Algorithm algorithm);
void write_run_records(const std::filesystem::path& path, const std::vector<RunRecordRow>& rows, std::size_t dim,
                       std::size_t num_functions);
/// Validates the header and schema version.
std::vector<RunRecordRow> read_run_records(const std::filesystem::path& path);

struct SummaryRow {
    std::uint64_t seed = 0;
    std::string algorithm;
    std::size_t iterations = 0;
    std::string status;
    double threshold = 0.0;
    double safe_optimum = 0.0;
    double best_reward = 0.0;
    bool any_unsafe = false;
    long iterations_to_fraction = -1;  ///< -1: never reached
};

/// First iteration whose best safe reward closes `fraction` of the gap
/// between the threshold and the safe optimum.
long iterations_to_fraction(const std::vector<RunRecordRow>& rows, double threshold, double optimum, double fraction);
SummaryRow summarize(const std::vector<RunRecordRow>& rows, double threshold, double optimum, double fraction,
                     const std::string& status);
void write_summary(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary(const std::filesystem::path& path);

/// Grid dump: coordinates followed by named columns.
void write_grid_csv(const std::filesystem::path& path, const GridDomain& grid,
                    const std::vector<std::pair<std::string, Eigen::VectorXd>>& columns);

void write_manifest(const std::filesystem::path& dir, const std::string& command, const nlohmann::json& config,
                    const std::vector<std::uint64_t>& seeds, const nlohmann::json& extra);

// ---------------------------------------------------------------- scenarios

struct ComparisonResult {
    std::uint64_t seed = 0;
    Algorithm algorithm = Algorithm::Pacsbo;
    Instance instance;
    RunHistory history;
};

/// One run; writes snapshots under `snapshot_dir` when set.
ComparisonResult run_single(const ExperimentSpec& spec, const GridModelPtr& model, Algorithm algorithm,
                            std::shared_ptr<const MlpPredictor> predictor, std::uint64_t seed,
                            const std::optional<std::filesystem::path>& snapshot_dir = std::nullopt);

struct Fig3Row {
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    ThresholdStats stats;
};

/// Acceptance thresholds mean + w on nested uniform sample sets of a
/// norm-`truth_norm` function, for each sample count.
std::vector<Fig3Row> fig3_thresholds(const ExperimentSpec& spec, const GridModelPtr& model, std::uint64_t seed);

struct CoverageRow {
    double delta = 0.0;
    std::size_t replicates = 0;
    std::size_t draws = 0;
    std::size_t covered = 0;
    double coverage() const { return static_cast<double>(covered) / static_cast<double>(replicates); }
};

/// Fraction of replicates whose empirical mean lies within the Hoeffding
/// width (true range) of the known expectation.
CoverageRow hoeffding_coverage(double delta, std::size_t replicates, std::size_t draws,
                               const std::string& distribution, std::uint64_t seed);

/// Runs a scenario for every seed on up to `threads` workers and writes all
/// outputs to `out`. Returns a short text report.
std::string run_experiment(const ExperimentSpec& spec, const nlohmann::json& raw_config,
                           const std::filesystem::path& out, unsigned threads, const std::string& command);

}  // namespace pacsbo
