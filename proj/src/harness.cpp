#include "pacsbo/harness.hpp"

#include "pacsbo/subdomain.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#ifndef PACSBO_VERSION
#define PACSBO_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace pacsbo {

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(path.string() + ": cannot open file");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t offset) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t k = 0; k < std::min(offset, text.size()); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

/// Line of the first `"key":` in the text, 0 if absent.
std::size_t line_of_key(const std::string& text, const std::string& key) {
    const std::string quoted = '"' + key + '"';
    for (std::size_t pos = text.find(quoted); pos != std::string::npos; pos = text.find(quoted, pos + 1)) {
        std::size_t k = pos + quoted.size();
        while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) {
            ++k;
        }
        if (k < text.size() && text[k] == ':') {
            return line_col(text, pos).first;
        }
    }
    return 0;
}

std::string fmt_double(double v) {
    if (std::isnan(v)) {
        return "NA";
    }
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

double parse_double(const std::string& s) {
    if (s == "NA") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) {
        throw std::runtime_error("malformed number '" + s + "'");
    }
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string join(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k > 0) {
            s += ',';
        }
        s += cells[k];
    }
    return s;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    return out;
}

constexpr const char* kPartitionNames[] = {"tilde", "hat", "global"};

std::size_t partition_slot(MaskLabel label) {
    switch (label) {
        case MaskLabel::Tilde: return 0;
        case MaskLabel::Hat: return 1;
        case MaskLabel::Global: return 2;
    }
    return 2;
}

/// Runs f(k) for k in [0, n) on up to `threads` workers; rethrows the
/// exception of the lowest failing k.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < n; k = next++) {
            try {
                f(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < count; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace

// ---------------------------------------------------------------- config

ConfigNode ConfigNode::parse(const std::string& text, const std::string& source) {
    ConfigNode node;
    node.text_ = std::make_shared<const std::string>(text);
    node.source_ = source;
    try {
        node.root_ = std::make_shared<const nlohmann::json>(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": syntax error: " +
                          e.what());
    }
    if (!node.root_->is_object()) {
        throw ConfigError(source + ":1: top level must be an object");
    }
    node.value_ = node.root_.get();
    node.seen_ = std::make_shared<std::set<std::string>>();
    return node;
}

ConfigNode ConfigNode::load(const fs::path& path) {
    return parse(read_file(path), path.string());
}

bool ConfigNode::has(const std::string& key) const {
    seen_->insert(key);
    return value_->contains(key) && !value_->at(key).is_null();
}

ConfigNode ConfigNode::child(const std::string& key) const {
    if (!has(key)) {
        fail("missing required section '" + key + "'", key);
    }
    if (!value_->at(key).is_object()) {
        fail("section '" + key + "' must be an object", key);
    }
    ConfigNode c = *this;
    c.path_ = path_.empty() ? key : path_ + "." + key;
    c.value_ = &value_->at(key);
    c.seen_ = std::make_shared<std::set<std::string>>();
    return c;
}

ConfigNode ConfigNode::child_or_empty(const std::string& key) const {
    if (has(key)) {
        return child(key);
    }
    static const nlohmann::json empty = nlohmann::json::object();
    ConfigNode c = *this;
    c.path_ = path_.empty() ? key : path_ + "." + key;
    c.value_ = &empty;
    c.seen_ = std::make_shared<std::set<std::string>>();
    return c;
}

void ConfigNode::finish() const {
    for (const auto& [key, _] : value_->items()) {
        if (seen_->count(key) == 0) {
            fail("unknown field '" + key + "'", key);
        }
    }
}

void ConfigNode::fail(const std::string& what, const std::string& key) const {
    std::size_t line = key.empty() ? 0 : line_of_key(*text_, key);
    if (line == 0 && !path_.empty()) {
        const auto dot = path_.rfind('.');
        line = line_of_key(*text_, dot == std::string::npos ? path_ : path_.substr(dot + 1));
    }
    std::string where = source_ + ":" + (line == 0 ? std::string("1") : std::to_string(line));
    std::string scope = path_.empty() ? "" : " (in '" + path_ + "')";
    throw ConfigError(where + ": " + what + scope);
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

GridModelPtr make_model(std::size_t dim, const std::vector<std::size_t>& resolution, double lengthscale) {
    KernelConfig kc;
    kc.lengthscale = lengthscale;
    kc.validate();
    if (resolution.empty()) {
        return make_grid_model(GridDomain::default_for_dim(dim), kc);
    }
    if (resolution.size() != dim) {
        throw std::invalid_argument("grid resolution needs one entry per dimension");
    }
    return make_grid_model(GridDomain(resolution), kc);
}

namespace {

void read_grid(const ConfigNode& root, std::size_t& dim, std::vector<std::size_t>& res, double& ell) {
    const ConfigNode g = root.child_or_empty("grid");
    dim = g.get<std::size_t>("dim", dim);
    res = g.get<std::vector<std::size_t>>("resolution", res);
    ell = g.get<double>("lengthscale", ell);
    if (dim == 0) {
        g.fail("field 'dim' must be at least 1", "dim");
    }
    if (!res.empty() && res.size() != dim) {
        g.fail("field 'resolution' needs one entry per dimension", "resolution");
    }
    if (std::any_of(res.begin(), res.end(), [](std::size_t m) { return m < 3; })) {
        g.fail("every resolution entry must be at least 3", "resolution");
    }
    if (!(ell > 0.0)) {
        g.fail("field 'lengthscale' must be positive", "lengthscale");
    }
    g.finish();
}

void read_sampler(const ConfigNode& n, SamplerConfig& s) {
    s.num_centers = n.get<std::size_t>("num_centers", s.num_centers);
    s.coeff_bound = n.get<double>("coeff_bound", s.coeff_bound);
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        n.fail(e.what());
    }
}

}  // namespace

TrainSpec parse_train_spec(const ConfigNode& root) {
    TrainSpec spec;
    read_grid(root, spec.dim, spec.resolution, spec.lengthscale);
    spec.seed = root.get<std::uint64_t>("seed", spec.seed);

    const ConfigNode t = root.child_or_empty("training");
    auto& d = spec.data;
    d.num_functions = t.get<std::size_t>("num_functions", d.num_functions);
    d.steps = t.get<std::size_t>("steps", d.steps);
    d.trace_capacity = t.get<std::size_t>("trace_capacity", d.trace_capacity);
    d.sigma = t.get<double>("sigma", d.sigma);
    d.delta = t.get<double>("delta", d.delta);
    d.safe_fraction = t.get<double>("safe_fraction", d.safe_fraction);
    d.label_multiplier = t.get<double>("label_multiplier", d.label_multiplier);
    read_sampler(t.child_or_empty("sampler"), d.sampler);
    if (d.num_functions == 0 || d.steps == 0 || d.trace_capacity == 0) {
        t.fail("num_functions, steps and trace_capacity must be positive");
    }
    if (!(d.sigma > 0.0)) {
        t.fail("field 'sigma' must be positive", "sigma");
    }
    if (!(d.delta > 0.0 && d.delta < 1.0)) {
        t.fail("field 'delta' must lie in (0, 1)", "delta");
    }
    if (!(d.safe_fraction > 0.0 && d.safe_fraction <= 1.0)) {
        t.fail("field 'safe_fraction' must lie in (0, 1]", "safe_fraction");
    }
    if (!(d.label_multiplier > 0.0)) {
        t.fail("field 'label_multiplier' must be positive", "label_multiplier");
    }
    t.finish();

    const ConfigNode a = root.child("architecture");
    spec.architecture.input_length = a.require<std::size_t>("input_length");
    spec.architecture.hidden = a.require<std::vector<std::size_t>>("hidden");
    if (spec.architecture.input_length != 2 * d.trace_capacity) {
        a.fail("field 'input_length' must be twice training.trace_capacity", "input_length");
    }
    if (spec.architecture.hidden.empty() ||
        std::any_of(spec.architecture.hidden.begin(), spec.architecture.hidden.end(),
                    [](std::size_t h) { return h == 0; })) {
        a.fail("field 'hidden' must list positive layer widths", "hidden");
    }
    a.finish();

    const ConfigNode o = root.child_or_empty("optimizer");
    spec.hyper.epochs = o.get<std::size_t>("epochs", spec.hyper.epochs);
    spec.hyper.batch_size = o.get<std::size_t>("batch_size", spec.hyper.batch_size);
    spec.hyper.step_size = o.get<double>("step_size", spec.hyper.step_size);
    if (spec.hyper.epochs == 0 || spec.hyper.batch_size == 0 || !(spec.hyper.step_size > 0.0)) {
        o.fail("epochs, batch_size and step_size must be positive");
    }
    o.finish();
    root.finish();
    return spec;
}

TrainOutcome train_predictor(const TrainSpec& spec) {
    const GridModelPtr model = make_model(spec.dim, spec.resolution, spec.lengthscale);
    const TrainingSet data = generate_training_data(model, spec.data, derive_seed(spec.seed, {10}));
    if (data.size() == 0) {
        throw NumericError("train_predictor: every training rollout failed");
    }
    TrainOutcome out;
    out.examples = data.size();
    out.predictor = train_mlp(data, spec.architecture, spec.hyper, derive_seed(spec.seed, {11}));
    return out;
}

// ---------------------------------------------------------------- experiment spec

std::string_view to_string(Scenario s) {
    switch (s) {
        case Scenario::Fig3Thresholds: return "fig3_thresholds";
        case Scenario::CompareConservative: return "compare_conservative";
        case Scenario::CompareOptimistic: return "compare_optimistic";
        case Scenario::Synthetic2d: return "synthetic2d";
        case Scenario::HoeffdingMc: return "hoeffding_mc";
    }
    return "unknown";
}

Scenario scenario_from_string(std::string_view s) {
    for (Scenario c : {Scenario::Fig3Thresholds, Scenario::CompareConservative, Scenario::CompareOptimistic,
                       Scenario::Synthetic2d, Scenario::HoeffdingMc}) {
        if (to_string(c) == s) {
            return c;
        }
    }
    throw std::invalid_argument("unknown scenario '" + std::string(s) + "'");
}

namespace {

void apply_scenario_defaults(ExperimentSpec& s) {
    switch (s.scenario) {
        case Scenario::Fig3Thresholds:
            s.truth_norm = 1.0;
            break;
        case Scenario::CompareConservative:
            s.pac.sampler.coeff_bound = 1.0;
            s.safeopt_bound = 10.0;
            s.algorithms = {Algorithm::Pacsbo, Algorithm::SafeOpt};
            break;
        case Scenario::CompareOptimistic:
            s.pac.sampler.coeff_bound = 0.04;
            s.safeopt_bound = 0.4;
            s.algorithms = {Algorithm::Pacsbo, Algorithm::SafeOpt};
            break;
        case Scenario::Synthetic2d:
            s.dim = 2;
            s.iterations = 15;
            s.algorithms = {Algorithm::Pacsbo};
            break;
        case Scenario::HoeffdingMc:
            break;
    }
}

}  // namespace

ExperimentSpec parse_experiment_spec(const ConfigNode& root, std::optional<Scenario> forced) {
    ExperimentSpec s;
    if (forced) {
        s.scenario = *forced;
        if (root.has("scenario")) {
            const auto name = root.get<std::string>("scenario", "");
            if (name != to_string(*forced)) {
                root.fail("this command only runs scenario '" + std::string(to_string(*forced)) + "'", "scenario");
            }
        }
    } else {
        const auto name = root.require<std::string>("scenario");
        try {
            s.scenario = scenario_from_string(name);
        } catch (const std::invalid_argument& e) {
            root.fail(e.what(), "scenario");
        }
    }
    apply_scenario_defaults(s);

    s.seeds = root.require<std::vector<std::uint64_t>>("seeds");
    if (s.seeds.empty()) {
        root.fail("field 'seeds' must be nonempty", "seeds");
    }
    read_grid(root, s.dim, s.resolution, s.lengthscale);
    if (s.scenario == Scenario::Synthetic2d && s.dim != 2) {
        root.fail("synthetic2d needs a 2-D grid", "grid");
    }
    if (s.scenario == Scenario::Fig3Thresholds && s.dim != 1) {
        root.fail("fig3_thresholds needs a 1-D grid", "grid");
    }

    const ConfigNode t = root.child_or_empty("truth");
    s.truth_norm = t.get<double>("norm", s.truth_norm);
    read_sampler(t, s.truth_sampler);
    s.safe_fraction = t.get<double>("safe_fraction", s.safe_fraction);
    if (t.has("threshold")) {
        s.threshold = t.get<double>("threshold", 0.0);
    }
    if (!(s.truth_norm > 0.0)) {
        t.fail("field 'norm' must be positive", "norm");
    }
    if (!(s.safe_fraction > 0.0 && s.safe_fraction <= 1.0)) {
        t.fail("field 'safe_fraction' must lie in (0, 1]", "safe_fraction");
    }
    t.finish();

    const ConfigNode r = root.child_or_empty("run");
    s.sigma = r.get<double>("sigma", s.sigma);
    s.delta = r.get<double>("delta", s.delta);
    s.iterations = r.get<std::size_t>("iterations", s.iterations);
    s.safeopt_bound = r.get<double>("safeopt_bound", s.safeopt_bound);
    s.use_subdomains = r.get<bool>("use_subdomains", s.use_subdomains);
    s.enlarge_factor = r.get<double>("enlarge_factor", s.enlarge_factor);
    s.exact_expanders = r.get<bool>("exact_expanders", s.exact_expanders);
    s.snapshots = r.get<bool>("snapshots", s.snapshots);
    s.reach_fraction = r.get<double>("reach_fraction", s.reach_fraction);
    s.explored_after = r.get<std::size_t>("explored_after", s.explored_after);
    if (r.has("algorithms")) {
        s.algorithms.clear();
        for (const auto& name : r.get<std::vector<std::string>>("algorithms", {})) {
            try {
                s.algorithms.push_back(algorithm_from_string(name));
            } catch (const std::invalid_argument& e) {
                r.fail(e.what(), "algorithms");
            }
        }
    }
    if (!(s.sigma > 0.0)) {
        r.fail("field 'sigma' must be positive", "sigma");
    }
    if (!(s.delta > 0.0 && s.delta < 1.0)) {
        r.fail("field 'delta' must lie in (0, 1)", "delta");
    }
    if (s.iterations == 0) {
        r.fail("field 'iterations' must be at least 1", "iterations");
    }
    if (!(s.safeopt_bound > 0.0)) {
        r.fail("field 'safeopt_bound' must be positive", "safeopt_bound");
    }
    if (!(s.enlarge_factor >= 1.0)) {
        r.fail("field 'enlarge_factor' must be at least 1", "enlarge_factor");
    }
    if (!(s.reach_fraction > 0.0 && s.reach_fraction <= 1.0)) {
        r.fail("field 'reach_fraction' must lie in (0, 1]", "reach_fraction");
    }
    r.finish();

    const ConfigNode p = root.child_or_empty("pac");
    s.pac.delta = s.delta;
    s.pac.q_init = p.get<std::size_t>("q_init", s.pac.q_init);
    s.pac.q_max = p.get<std::size_t>("q_max", s.pac.q_max);
    s.pac.safety_factor = p.get<double>("safety_factor", s.pac.safety_factor);
    read_sampler(p, s.pac.sampler);
    try {
        s.pac.validate();
    } catch (const std::invalid_argument& e) {
        p.fail(e.what());
    }
    p.finish();

    s.predictor_path = root.get<std::string>("predictor", "");
    const bool needs_predictor =
        (s.scenario == Scenario::CompareConservative || s.scenario == Scenario::CompareOptimistic ||
         s.scenario == Scenario::Synthetic2d) &&
        std::find(s.algorithms.begin(), s.algorithms.end(), Algorithm::Pacsbo) != s.algorithms.end();
    if (needs_predictor && s.predictor_path.empty()) {
        root.fail("missing required field 'predictor' (path of a trained predictor file)", "predictor");
    }

    const ConfigNode f = root.child_or_empty("fig3");
    s.sample_counts = f.get<std::vector<std::size_t>>("sample_counts", s.sample_counts);
    s.draws = f.get<std::size_t>("draws", s.draws);
    if (s.sample_counts.empty() || s.draws == 0) {
        f.fail("sample_counts and draws must be nonempty / positive");
    }
    f.finish();

    const ConfigNode h = root.child_or_empty("hoeffding");
    s.replicates = h.get<std::size_t>("replicates", s.replicates);
    s.mc_draws = h.get<std::size_t>("draws", s.mc_draws);
    s.deltas = h.get<std::vector<double>>("deltas", s.deltas);
    s.distribution = h.get<std::string>("distribution", s.distribution);
    if (s.replicates == 0) {
        h.fail("field 'replicates' must be at least 1", "replicates");
    }
    if (s.mc_draws == 0) {
        h.fail("field 'draws' must be at least 1", "draws");
    }
    if (s.deltas.empty() ||
        std::any_of(s.deltas.begin(), s.deltas.end(), [](double d) { return !(d > 0.0 && d < 1.0); })) {
        h.fail("field 'deltas' must list values in (0, 1)", "deltas");
    }
    if (s.distribution != "uniform" && s.distribution != "bernoulli" && s.distribution != "beta") {
        h.fail("field 'distribution' must be uniform, bernoulli or beta", "distribution");
    }
    h.finish();
    root.finish();
    return s;
}

Instance make_instance(const GridModelPtr& model, const ExperimentSpec& spec, std::uint64_t seed) {
    Rng rng = make_rng(seed, {2});
    SamplerConfig sc = spec.truth_sampler;
    sc.target_norm = spec.truth_norm;
    RkhsFunction truth = sample_random_function(*model, sc, rng);
    if (!(rkhs_norm(truth) > 0.0)) {
        throw NumericError("make_instance: drew a zero-norm ground truth");
    }
    SyntheticProblem problem = spec.threshold
                                   ? SyntheticProblem(model->grid, std::move(truth), *spec.threshold)
                                   : SyntheticProblem::with_safe_fraction(model->grid, std::move(truth),
                                                                          spec.safe_fraction);
    auto seed_set = select_seed_set(problem, model->grid, rng);
    return Instance{std::move(problem), std::move(seed_set)};
}

RunConfig make_run_config(const ExperimentSpec& spec, const GridModelPtr& model, Algorithm algorithm,
                          std::shared_ptr<const MlpPredictor> predictor, const Instance& inst, std::uint64_t seed) {
    RunConfig rc;
    rc.model = model;
    rc.sigma = spec.sigma;
    rc.delta = spec.delta;
    rc.seed_set = inst.seed_set;
    rc.iterations = spec.iterations;
    rc.algorithm = algorithm;
    rc.pac = spec.pac;
    rc.pac.delta = spec.delta;
    rc.expander.exact = spec.exact_expanders;
    rc.enlarge_factor = spec.enlarge_factor;
    rc.seed = derive_seed(seed, {3});
    if (algorithm == Algorithm::Pacsbo) {
        rc.predictor = std::move(predictor);
        rc.use_subdomains = spec.use_subdomains;
    } else {
        rc.fixed_bound = spec.safeopt_bound;
        rc.use_subdomains = false;
    }
    return rc;
}

// ---------------------------------------------------------------- records

std::vector<std::string> run_record_header(std::size_t dim, std::size_t num_functions) {
    std::vector<std::string> h{"schema_version", "seed", "algorithm", "iteration"};
    for (std::size_t d = 0; d < dim; ++d) {
        h.push_back("x" + std::to_string(d));
    }
    for (std::size_t i = 0; i < num_functions; ++i) {
        h.push_back("h" + std::to_string(i));
    }
    h.push_back("unsafe");
    h.push_back("chosen_from");
    for (const char* p : kPartitionNames) {
        for (std::size_t i = 0; i < num_functions; ++i) {
            const std::string suffix = std::string("_") + p + "_" + std::to_string(i);
            h.push_back("B" + suffix);
            h.push_back("q" + suffix);
            h.push_back("escalated" + suffix);
        }
        h.push_back(std::string("S_") + p);
        h.push_back(std::string("M_") + p);
        h.push_back(std::string("G_") + p);
    }
    h.push_back("best_so_far");
    return h;
}

std::vector<RunRecordRow> to_rows(const RunHistory& h, const SyntheticProblem& problem, const GridDomain& grid,
                                  std::uint64_t seed, Algorithm algorithm) {
    const std::size_t nf = h.samples.num_functions();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::size_t width = 3 * nf + 3;
    std::vector<RunRecordRow> rows;
    bool have = false;
    double best = 0.0;
    for (std::size_t k = 0; k < h.seed_set.size(); ++k) {
        RunRecordRow r;
        r.seed = seed;
        r.algorithm = std::string(to_string(algorithm));
        r.iteration = 0;
        const GridIndex a = h.samples.params()[k];
        const auto p = grid.point(a);
        r.x.assign(p.data(), p.data() + p.size());
        for (std::size_t i = 0; i < nf; ++i) {
            r.measurement.push_back(h.samples.values(i)[k]);
        }
        r.unsafe = problem.unsafe(a);
        r.chosen_from = "seed";
        r.partition_fields.assign(3, std::vector<double>(width, nan));
        const bool safe = std::all_of(r.measurement.begin() + 1, r.measurement.end(), [](double v) { return v >= 0.0; });
        if (safe && (!have || r.measurement[0] > best)) {
            best = r.measurement[0];
            have = true;
        }
        r.best_so_far = best;
        rows.push_back(std::move(r));
    }
    for (const auto& it : h.iterations) {
        RunRecordRow r;
        r.seed = seed;
        r.algorithm = std::string(to_string(algorithm));
        r.iteration = it.iteration;
        const auto p = grid.point(it.chosen);
        r.x.assign(p.data(), p.data() + p.size());
        r.measurement = it.measurement;
        r.unsafe = it.unsafe;
        r.chosen_from = std::string(to_string(it.chosen_from));
        r.partition_fields.assign(3, std::vector<double>(width, nan));
        for (const auto& pr : it.partitions) {
            auto& f = r.partition_fields[partition_slot(pr.label)];
            for (std::size_t i = 0; i < pr.bounds.size(); ++i) {
                f[3 * i] = pr.bounds[i].bound;
                f[3 * i + 1] = static_cast<double>(pr.bounds[i].q_used);
                f[3 * i + 2] = pr.bounds[i].escalated ? 1.0 : 0.0;
            }
            f[3 * nf] = static_cast<double>(pr.safe);
            f[3 * nf + 1] = static_cast<double>(pr.maximizers);
            f[3 * nf + 2] = static_cast<double>(pr.expanders);
        }
        r.best_so_far = it.best_safe_reward;
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_run_records(const fs::path& path, const std::vector<RunRecordRow>& rows, std::size_t dim,
                       std::size_t num_functions) {
    const auto header = run_record_header(dim, num_functions);
    auto out = open_out(path);
    out << join(header) << '\n';
    for (const auto& r : rows) {
        if (r.x.size() != dim || r.measurement.size() != num_functions || r.partition_fields.size() != 3) {
            throw std::invalid_argument("write_run_records: row shape does not match the header");
        }
        std::vector<std::string> cells{std::to_string(kRunRecordSchema), std::to_string(r.seed), r.algorithm,
                                       std::to_string(r.iteration)};
        for (double v : r.x) {
            cells.push_back(fmt_double(v));
        }
        for (double v : r.measurement) {
            cells.push_back(fmt_double(v));
        }
        cells.push_back(r.unsafe ? "1" : "0");
        cells.push_back(r.chosen_from);
        for (const auto& f : r.partition_fields) {
            if (f.size() != 3 * num_functions + 3) {
                throw std::invalid_argument("write_run_records: partition field count mismatch");
            }
            for (double v : f) {
                cells.push_back(fmt_double(v));
            }
        }
        cells.push_back(fmt_double(r.best_so_far));
        if (cells.size() != header.size()) {
            throw std::logic_error("write_run_records: column count mismatch");
        }
        out << join(cells) << '\n';
    }
}

std::vector<RunRecordRow> read_run_records(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error(path.string() + ": empty run record file");
    }
    const auto header = split_csv(line);
    const auto count = [&](char prefix) {
        return static_cast<std::size_t>(std::count_if(header.begin(), header.end(), [&](const std::string& h) {
            return h.size() > 1 && h[0] == prefix && std::isdigit(static_cast<unsigned char>(h[1]));
        }));
    };
    const std::size_t dim = count('x');
    const std::size_t nf = count('h');
    if (header != run_record_header(dim, nf)) {
        throw std::runtime_error(path.string() + ": unexpected run record header");
    }
    std::vector<RunRecordRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto c = split_csv(line);
        if (c.size() != header.size()) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": wrong number of columns");
        }
        if (c[0] != std::to_string(kRunRecordSchema)) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": unsupported schema version " +
                                     c[0]);
        }
        RunRecordRow r;
        std::size_t k = 1;
        r.seed = std::stoull(c[k++]);
        r.algorithm = c[k++];
        r.iteration = std::stoul(c[k++]);
        for (std::size_t d = 0; d < dim; ++d) {
            r.x.push_back(parse_double(c[k++]));
        }
        for (std::size_t i = 0; i < nf; ++i) {
            r.measurement.push_back(parse_double(c[k++]));
        }
        r.unsafe = c[k++] == "1";
        r.chosen_from = c[k++];
        for (std::size_t p = 0; p < 3; ++p) {
            std::vector<double> f;
            for (std::size_t m = 0; m < 3 * nf + 3; ++m) {
                f.push_back(parse_double(c[k++]));
            }
            r.partition_fields.push_back(std::move(f));
        }
        r.best_so_far = parse_double(c[k++]);
        rows.push_back(std::move(r));
    }
    return rows;
}

long iterations_to_fraction(const std::vector<RunRecordRow>& rows, double threshold, double optimum,
                            double fraction) {
    const double target = threshold + fraction * (optimum - threshold);
    for (const auto& r : rows) {
        if (r.best_so_far >= target) {
            return static_cast<long>(r.iteration);
        }
    }
    return -1;
}

SummaryRow summarize(const std::vector<RunRecordRow>& rows, double threshold, double optimum, double fraction,
                     const std::string& status) {
    if (rows.empty()) {
        throw std::invalid_argument("summarize: no rows");
    }
    SummaryRow s;
    s.seed = rows.front().seed;
    s.algorithm = rows.front().algorithm;
    s.status = status;
    s.threshold = threshold;
    s.safe_optimum = optimum;
    for (const auto& r : rows) {
        s.iterations = std::max(s.iterations, r.iteration);
        s.any_unsafe = s.any_unsafe || r.unsafe;
    }
    s.best_reward = rows.back().best_so_far;
    s.iterations_to_fraction = iterations_to_fraction(rows, threshold, optimum, fraction);
    return s;
}

namespace {

const std::vector<std::string> kSummaryHeader{"seed",          "algorithm", "iterations", "status",
                                              "threshold",     "safe_optimum", "best_reward", "any_unsafe",
                                              "iterations_to_fraction"};

}  // namespace

void write_summary(const fs::path& path, const std::vector<SummaryRow>& rows) {
    auto out = open_out(path);
    out << join(kSummaryHeader) << '\n';
    for (const auto& s : rows) {
        out << join({std::to_string(s.seed), s.algorithm, std::to_string(s.iterations), s.status,
                     fmt_double(s.threshold), fmt_double(s.safe_optimum), fmt_double(s.best_reward),
                     s.any_unsafe ? "1" : "0", std::to_string(s.iterations_to_fraction)})
            << '\n';
    }
}

std::vector<SummaryRow> read_summary(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || split_csv(line) != kSummaryHeader) {
        throw std::runtime_error(path.string() + ": unexpected summary header");
    }
    std::vector<SummaryRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto c = split_csv(line);
        if (c.size() != kSummaryHeader.size()) {
            throw std::runtime_error(path.string() + ": wrong number of summary columns");
        }
        SummaryRow s;
        s.seed = std::stoull(c[0]);
        s.algorithm = c[1];
        s.iterations = std::stoul(c[2]);
        s.status = c[3];
        s.threshold = parse_double(c[4]);
        s.safe_optimum = parse_double(c[5]);
        s.best_reward = parse_double(c[6]);
        s.any_unsafe = c[7] == "1";
        s.iterations_to_fraction = std::stol(c[8]);
        rows.push_back(std::move(s));
    }
    return rows;
}

void write_grid_csv(const fs::path& path, const GridDomain& grid,
                    const std::vector<std::pair<std::string, Eigen::VectorXd>>& columns) {
    std::vector<std::string> header;
    for (std::size_t d = 0; d < grid.dim(); ++d) {
        header.push_back("x" + std::to_string(d));
    }
    for (const auto& [name, values] : columns) {
        if (values.size() != static_cast<Eigen::Index>(grid.size())) {
            throw std::invalid_argument("write_grid_csv: column '" + name + "' has the wrong length");
        }
        header.push_back(name);
    }
    auto out = open_out(path);
    out << join(header) << '\n';
    for (GridIndex a = 0; a < grid.size(); ++a) {
        std::vector<std::string> cells;
        for (std::size_t d = 0; d < grid.dim(); ++d) {
            cells.push_back(fmt_double(grid.points()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(d))));
        }
        for (const auto& [_, values] : columns) {
            cells.push_back(fmt_double(values(static_cast<Eigen::Index>(a))));
        }
        out << join(cells) << '\n';
    }
}

void write_manifest(const fs::path& dir, const std::string& command, const nlohmann::json& config,
                    const std::vector<std::uint64_t>& seeds, const nlohmann::json& extra) {
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(config.dump());
    const nlohmann::json m = {
        {"command", command},
        {"version", PACSBO_VERSION},
        {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
        {"config_hash", "fnv1a64:" + hash.str()},
        {"config", config},
        {"seeds", seeds},
        {"schemas", {{"run_record", kRunRecordSchema}, {"predictor", MlpPredictor::kSchemaVersion}}},
        {"details", extra},
    };
    auto out = open_out(dir / "manifest.json");
    out << m.dump(2) << '\n';
}

// ---------------------------------------------------------------- scenarios

ComparisonResult run_single(const ExperimentSpec& spec, const GridModelPtr& model, Algorithm algorithm,
                            std::shared_ptr<const MlpPredictor> predictor, std::uint64_t seed,
                            const std::optional<fs::path>& snapshot_dir) {
    ComparisonResult res{seed, algorithm, make_instance(model, spec, seed), {}};
    const RunConfig rc = make_run_config(spec, model, algorithm, std::move(predictor), res.instance, seed);
    SnapshotObserver observer;
    if (snapshot_dir) {
        observer = [&](const IterationSnapshot& snap) {
            std::vector<std::pair<std::string, Eigen::VectorXd>> cols;
            for (std::size_t i = 0; i < snap.predictions.size(); ++i) {
                cols.emplace_back("mu_h" + std::to_string(i), snap.predictions[i].mean);
            }
            cols.emplace_back("var", snap.predictions[0].variance);
            for (const auto& st : snap.states) {
                const std::string p(to_string(st.label));
                for (std::size_t i = 0; i < st.field.num_functions(); ++i) {
                    cols.emplace_back("l_h" + std::to_string(i) + "_" + p, st.field.lower[i]);
                    cols.emplace_back("u_h" + std::to_string(i) + "_" + p, st.field.upper[i]);
                }
            }
            std::ostringstream name;
            name << "seed" << seed << "_" << to_string(algorithm) << "_iter" << std::setw(3) << std::setfill('0')
                 << snap.iteration << ".csv";
            write_grid_csv(*snapshot_dir / name.str(), model->grid, cols);
        };
    }
    res.history = run(rc, res.instance.problem, observer);
    return res;
}

std::vector<Fig3Row> fig3_thresholds(const ExperimentSpec& spec, const GridModelPtr& model, std::uint64_t seed) {
    const std::size_t largest = *std::max_element(spec.sample_counts.begin(), spec.sample_counts.end());
    const std::size_t n = model->grid.size();
    if (largest > n) {
        throw std::invalid_argument("fig3_thresholds: more samples than grid points");
    }
    Rng rng = make_rng(seed, {4});
    SamplerConfig sc = spec.truth_sampler;
    sc.target_norm = spec.truth_norm;
    const RkhsFunction truth = sample_random_function(*model, sc, rng);
    const Eigen::VectorXd values = evaluate_on_grid(truth, model->grid);

    // Distinct uniform parameters; each sample set is a prefix of the next.
    std::vector<GridIndex> order(n);
    for (GridIndex a = 0; a < n; ++a) {
        order[a] = a;
    }
    for (std::size_t k = 0; k < largest; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, n - 1);
        std::swap(order[k], order[pick(rng)]);
    }
    std::vector<double> noisy(largest);
    for (std::size_t k = 0; k < largest; ++k) {
        noisy[k] = values(static_cast<Eigen::Index>(order[k])) + truncated_normal(rng, spec.sigma);
    }

    std::vector<GridIndex> everything(n);
    for (GridIndex a = 0; a < n; ++a) {
        everything[a] = a;
    }
    std::vector<Fig3Row> out;
    for (std::size_t c = 0; c < spec.sample_counts.size(); ++c) {
        const std::size_t count = spec.sample_counts[c];
        SampleSet samples(1);
        for (std::size_t k = 0; k < count; ++k) {
            samples.append(order[k], {noisy[k]});
        }
        const InterpolatingSampler sampler(model, samples, 0, spec.sigma, everything, spec.pac.sampler);
        out.push_back({seed, count, acceptance_threshold(sampler, spec.draws, spec.delta, derive_seed(seed, {5, c}))});
    }
    return out;
}

CoverageRow hoeffding_coverage(double delta, std::size_t replicates, std::size_t draws,
                               const std::string& distribution, std::uint64_t seed) {
    if (replicates == 0 || draws == 0) {
        throw std::invalid_argument("hoeffding_coverage: replicates and draws must be positive");
    }
    // All three laws live on [0, 1] with expectation 1/2 (beta: Beta(2, 2)).
    const double expectation = 0.5;
    const double width = hoeffding_width(delta, draws, 1.0);
    CoverageRow row{delta, replicates, draws, 0};
    for (std::size_t r = 0; r < replicates; ++r) {
        Rng rng = make_rng(seed, {6, r});
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::gamma_distribution<double> g(2.0, 1.0);
        std::vector<double> x(draws);
        for (auto& v : x) {
            if (distribution == "uniform") {
                v = u(rng);
            } else if (distribution == "bernoulli") {
                v = u(rng) < 0.5 ? 1.0 : 0.0;
            } else if (distribution == "beta") {
                const double a = g(rng);
                v = a / (a + g(rng));
            } else {
                throw std::invalid_argument("hoeffding_coverage: unknown distribution " + distribution);
            }
        }
        const double mean = pairwise_sum(x.data(), x.size()) / static_cast<double>(draws);
        if (std::abs(mean - expectation) <= width) {
            ++row.covered;
        }
    }
    return row;
}

namespace {

std::shared_ptr<const MlpPredictor> load_predictor_for(const ExperimentSpec& spec) {
    if (spec.predictor_path.empty()) {
        return nullptr;
    }
    if (!fs::exists(spec.predictor_path)) {
        throw ConfigError("predictor file '" + spec.predictor_path + "' does not exist");
    }
    try {
        return std::make_shared<const MlpPredictor>(load_predictor(spec.predictor_path));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(spec.predictor_path + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(spec.predictor_path + ": " + e.what());
    }
}

std::string run_comparison(const ExperimentSpec& spec, const GridModelPtr& model, const fs::path& out,
                           unsigned threads, nlohmann::json& details) {
    const auto predictor = load_predictor_for(spec);
    std::vector<std::pair<std::uint64_t, Algorithm>> jobs;
    for (auto s : spec.seeds) {
        for (auto a : spec.algorithms) {
            jobs.emplace_back(s, a);
        }
    }
    std::vector<std::optional<ComparisonResult>> results(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t k) {
        const auto [seed, alg] = jobs[k];
        std::optional<fs::path> snap;
        if (spec.snapshots) {
            snap = out / "snapshots";
        }
        results[k] = run_single(spec, model, alg, predictor, seed, snap);
        spdlog::info("seed {} {}: {} iterations, best {:.4f}{}", seed, to_string(alg),
                     results[k]->history.iterations.size(), results[k]->history.best_reward,
                     results[k]->history.any_unsafe() ? ", UNSAFE evaluations" : "");
    });

    std::vector<SummaryRow> summary;
    std::ostringstream report;
    std::map<std::string, std::pair<std::size_t, double>> per_alg;
    nlohmann::json thresholds = nlohmann::json::object();
    for (const auto& r : results) {
        const auto rows = to_rows(r->history, r->instance.problem, model->grid, r->seed, r->algorithm);
        write_run_records(out / "runs" / ("seed" + std::to_string(r->seed) + "_" +
                                          std::string(to_string(r->algorithm)) + ".csv"),
                          rows, model->grid.dim(), r->history.samples.num_functions());
        summary.push_back(summarize(rows, r->instance.problem.threshold(), r->instance.problem.safe_optimum(),
                                    spec.reach_fraction, std::string(to_string(r->history.status))));
        auto& agg = per_alg[summary.back().algorithm];
        agg.first += summary.back().any_unsafe ? 1 : 0;
        agg.second += summary.back().best_reward;
        thresholds[std::to_string(r->seed)] = r->instance.problem.threshold();
    }
    write_summary(out / "summary.csv", summary);
    details["thresholds"] = thresholds;
    for (const auto& [alg, agg] : per_alg) {
        report << alg << ": seeds with unsafe evaluations " << agg.first << "/" << spec.seeds.size()
               << ", mean best safe reward " << agg.second / static_cast<double>(spec.seeds.size()) << "\n";
    }
    if (spec.scenario == Scenario::Synthetic2d) {
        for (const auto& r : results) {
            // Re-run the first explored_after iterations to capture the explored region.
            ExperimentSpec cut = spec;
            cut.iterations = std::min(spec.explored_after, spec.iterations);
            std::vector<std::pair<std::string, Eigen::VectorXd>> cols;
            const RunConfig rc = make_run_config(cut, model, r->algorithm, predictor, r->instance, r->seed);
            run(rc, r->instance.problem, [&](const IterationSnapshot& snap) {
                if (snap.iteration != cut.iterations) {
                    return;
                }
                cols.clear();
                Eigen::VectorXd sampled = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model->grid.size()));
                for (GridIndex a : snap.samples.params()) {
                    sampled(static_cast<Eigen::Index>(a)) = 1.0;
                }
                sampled(static_cast<Eigen::Index>(snap.record.chosen)) = 1.0;
                for (const auto& st : snap.states) {
                    Eigen::VectorXd safe = Eigen::VectorXd::Zero(sampled.size());
                    for (GridIndex a : st.safe.points) {
                        safe(static_cast<Eigen::Index>(a)) = 1.0;
                    }
                    cols.emplace_back("safe_" + std::string(to_string(st.label)), safe);
                }
                cols.emplace_back("sampled", sampled);
                cols.emplace_back("reward", r->instance.problem.reward_on_grid());
            });
            write_grid_csv(out / ("explored_seed" + std::to_string(r->seed) + ".csv"), model->grid, cols);
        }
    }
    return report.str();
}

}  // namespace

std::string run_experiment(const ExperimentSpec& spec, const nlohmann::json& raw_config, const fs::path& out,
                           unsigned threads, const std::string& command) {
    fs::create_directories(out);
    nlohmann::json details = nlohmann::json::object();
    details["scenario"] = std::string(to_string(spec.scenario));
    std::ostringstream report;
    report << "scenario " << to_string(spec.scenario) << "\n";

    if (spec.scenario == Scenario::HoeffdingMc) {
        std::vector<CoverageRow> rows(spec.deltas.size());
        const std::uint64_t seed = spec.seeds.front();
        parallel_for(rows.size(), threads, [&](std::size_t k) {
            rows[k] = hoeffding_coverage(spec.deltas[k], spec.replicates, spec.mc_draws, spec.distribution,
                                         derive_seed(seed, {k}));
        });
        auto csv = open_out(out / "hoeffding_mc.csv");
        csv << "delta,replicates,draws,covered,coverage,target\n";
        for (const auto& r : rows) {
            csv << fmt_double(r.delta) << ',' << r.replicates << ',' << r.draws << ',' << r.covered << ','
                << fmt_double(r.coverage()) << ',' << fmt_double(1.0 - r.delta) << '\n';
            report << "delta " << r.delta << ": coverage " << r.coverage() << " (target >= " << 1.0 - r.delta
                   << ") " << (r.coverage() >= 1.0 - r.delta ? "ok" : "BELOW TARGET") << "\n";
        }
        write_manifest(out, command, raw_config, spec.seeds, details);
        return report.str();
    }

    const GridModelPtr model = make_model(spec.dim, spec.resolution, spec.lengthscale);
    if (spec.scenario == Scenario::Fig3Thresholds) {
        std::vector<std::vector<Fig3Row>> per_seed(spec.seeds.size());
        parallel_for(per_seed.size(), threads,
                     [&](std::size_t k) { per_seed[k] = fig3_thresholds(spec, model, spec.seeds[k]); });
        auto csv = open_out(out / "fig3_thresholds.csv");
        csv << "seed,samples,mean,width,range,threshold\n";
        std::vector<double> sums(spec.sample_counts.size(), 0.0);
        std::size_t decreasing = 0;
        for (const auto& rows : per_seed) {
            bool dec = true;
            for (std::size_t c = 0; c < rows.size(); ++c) {
                const auto& r = rows[c];
                csv << r.seed << ',' << r.samples << ',' << fmt_double(r.stats.mean) << ','
                    << fmt_double(r.stats.width) << ',' << fmt_double(r.stats.range) << ','
                    << fmt_double(r.stats.threshold()) << '\n';
                sums[c] += r.stats.threshold();
                dec = dec && (c == 0 || r.stats.threshold() < rows[c - 1].stats.threshold());
            }
            decreasing += dec ? 1 : 0;
        }
        for (std::size_t c = 0; c < sums.size(); ++c) {
            report << spec.sample_counts[c] << " samples: mean threshold "
                   << sums[c] / static_cast<double>(spec.seeds.size()) << "\n";
        }
        report << "strictly decreasing in " << decreasing << "/" << spec.seeds.size() << " seeds\n";
        write_manifest(out, command, raw_config, spec.seeds, details);
        return report.str();
    }

    report << run_comparison(spec, model, out, threads, details);
    write_manifest(out, command, raw_config, spec.seeds, details);
    return report.str();
}

}  // namespace pacsbo
