// Command-line front end: train-predictor, run, hoeffding-mc, synthetic2d.

#include "pacsbo/harness.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace pacsbo;

namespace {

struct CommonArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config, "configuration file (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "output directory");
    cmd->add_option("--seed", a.seed, "run this single seed instead of the configured ones");
    cmd->add_option("--threads", a.threads, "worker threads for independent seeds")->check(CLI::PositiveNumber);
}

/// PACSBO_OUT and PACSBO_THREADS override the output directory and thread count.
void apply_env(CommonArgs& a, const std::string& fallback_out) {
    if (const char* env = std::getenv("PACSBO_OUT"); env != nullptr && *env != '\0') {
        a.out = env;
    }
    if (const char* env = std::getenv("PACSBO_THREADS"); env != nullptr && *env != '\0') {
        a.threads = static_cast<unsigned>(std::max(1L, std::strtol(env, nullptr, 10)));
    }
    if (a.out.empty()) {
        a.out = fallback_out;
    }
}

int cmd_train(CommonArgs a) {
    apply_env(a, "out/predictor");
    const ConfigNode cfg = ConfigNode::load(a.config);
    TrainSpec spec = parse_train_spec(cfg);
    if (a.seed) {
        spec.seed = *a.seed;
    }
    const auto start = std::chrono::steady_clock::now();
    const TrainOutcome outcome = train_predictor(spec);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const fs::path out(a.out);
    fs::create_directories(out);
    save_predictor(outcome.predictor, (out / "predictor.json").string());
    const nlohmann::json report = {
        {"examples", outcome.examples},
        {"functions", spec.data.num_functions},
        {"steps", spec.data.steps},
        {"epochs", spec.hyper.epochs},
        {"final_loss", outcome.predictor.final_loss},
        {"loss_curve", outcome.predictor.loss_curve},
    };
    std::ofstream(out / "training_report.json") << report.dump(2) << '\n';
    write_manifest(out, "train-predictor", cfg.json(), {spec.seed}, {{"examples", outcome.examples}});
    std::cout << "trained on " << outcome.examples << " traces, final loss " << outcome.predictor.final_loss
              << " (" << seconds << " s)\nwrote " << (out / "predictor.json").string() << "\n";
    return 0;
}

int cmd_experiment(CommonArgs a, std::optional<Scenario> forced, const std::string& command) {
    apply_env(a, "out/" + command);
    const ConfigNode cfg = ConfigNode::load(a.config);
    ExperimentSpec spec = parse_experiment_spec(cfg, forced);
    if (a.seed) {
        spec.seeds = {*a.seed};
    }
    if (!spec.predictor_path.empty() && !fs::exists(spec.predictor_path)) {
        // Relative paths may also be given relative to the config file.
        const fs::path beside = fs::path(a.config).parent_path() / spec.predictor_path;
        if (fs::exists(beside)) {
            spec.predictor_path = beside.string();
        }
    }
    std::cout << run_experiment(spec, cfg.json(), a.out, a.threads, command);
    std::cout << "outputs in " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PACSBO safe Bayesian optimization with PAC norm estimates"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");

    CommonArgs train_args;
    CommonArgs run_args;
    CommonArgs mc_args;
    CommonArgs s2d_args;
    auto* train = app.add_subcommand("train-predictor", "generate rollouts and train the norm predictor");
    auto* runc = app.add_subcommand("run", "run an experiment scenario");
    auto* mc = app.add_subcommand("hoeffding-mc", "Monte Carlo check of the Hoeffding width");
    auto* s2d = app.add_subcommand("synthetic2d", "PACSBO on a synthetic 2-D ground truth");
    add_common(train, train_args);
    add_common(runc, run_args);
    add_common(mc, mc_args);
    add_common(s2d, s2d_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        if (*train) {
            return cmd_train(train_args);
        }
        if (*runc) {
            return cmd_experiment(run_args, std::nullopt, "run");
        }
        if (*mc) {
            return cmd_experiment(mc_args, Scenario::HoeffdingMc, "hoeffding-mc");
        }
        return cmd_experiment(s2d_args, Scenario::Synthetic2d, "synthetic2d");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingDivergence& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
