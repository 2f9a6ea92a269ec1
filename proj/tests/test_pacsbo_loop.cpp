#include "pacsbo/pacsbo_loop.hpp"
#include "pacsbo/problem.hpp"

#include <doctest.h>

#include <algorithm>

using namespace pacsbo;

namespace {

struct Instance {
    GridModelPtr model = make_grid_model(GridDomain({200}), KernelConfig{});
    SyntheticProblem problem;
    std::vector<GridIndex> seed;

    explicit Instance(std::uint64_t s) : problem(make_problem(model, s)) {
        Rng rng(s + 1000);
        seed = select_seed_set(problem, model->grid, rng);
    }

    static SyntheticProblem make_problem(const GridModelPtr& model, std::uint64_t s) {
        Rng rng(s);
        SamplerConfig cfg;
        cfg.target_norm = 1.0;
        return SyntheticProblem::with_safe_fraction(model->grid, sample_random_function(*model, cfg, rng), 0.5);
    }
};

std::shared_ptr<const MlpPredictor> tiny_predictor(std::size_t input_length) {
    Rng rng(3);
    auto eta = std::make_shared<MlpPredictor>();
    eta->network = init_network(MlpArchitecture{input_length, {4}}, rng);
    eta->feature_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input_length));
    eta->feature_scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(input_length));
    return eta;
}

RunConfig pacsbo_config(const Instance& inst, std::size_t iterations) {
    RunConfig c;
    c.model = inst.model;
    c.seed_set = inst.seed;
    c.iterations = iterations;
    c.predictor = tiny_predictor(2 * (iterations + 1));
    c.pac.q_init = 50;
    c.pac.q_max = 100;
    c.seed = 77;
    return c;
}

}  // namespace

TEST_CASE("algorithm names") {
    CHECK(to_string(Algorithm::Pacsbo) == "pacsbo");
    CHECK(algorithm_from_string("safeopt") == Algorithm::SafeOpt);
    CHECK_THROWS_AS(algorithm_from_string("bo"), std::invalid_argument);
}

TEST_CASE("configuration is validated") {
    Instance inst(1);
    auto c = pacsbo_config(inst, 3);
    c.iterations = 0;
    CHECK_THROWS_AS(run(c, inst.problem), std::invalid_argument);
    c = pacsbo_config(inst, 3);
    c.predictor.reset();
    CHECK_THROWS_AS(run(c, inst.problem), std::invalid_argument);
    c = pacsbo_config(inst, 3);
    c.seed_set.clear();
    CHECK_THROWS_AS(run(c, inst.problem), std::invalid_argument);
    c = pacsbo_config(inst, 3);
    c.algorithm = Algorithm::SafeOpt;
    CHECK_THROWS_AS(run(c, inst.problem), std::invalid_argument);
}

TEST_CASE("a budget of one iteration runs once") {
    Instance inst(2);
    const auto h = run(pacsbo_config(inst, 1), inst.problem);
    CHECK(h.iterations.size() <= 1);
    CHECK(h.samples.size() == inst.seed.size() + h.iterations.size());
}

TEST_CASE("every iteration adds one sample from a safe candidate") {
    Instance inst(3);
    const auto cfg = pacsbo_config(inst, 6);
    Runner runner(cfg, inst.problem);
    std::size_t calls = 0;
    for (std::size_t k = 0; k < cfg.iterations; ++k) {
        const std::size_t before = runner.samples().size();
        const auto rec = runner.step([&](const IterationSnapshot& snap) {
            ++calls;
            CHECK(snap.samples.size() == before);
            CHECK(snap.iteration == k + 1);
            const auto it = std::find_if(snap.states.begin(), snap.states.end(),
                                         [&](const SafeOptState& st) { return st.label == snap.record.chosen_from; });
            REQUIRE(it != snap.states.end());
            const auto cand = it->candidates();
            CHECK(std::binary_search(cand.begin(), cand.end(), snap.record.chosen));
            CHECK(std::binary_search(it->safe.points.begin(), it->safe.points.end(), snap.record.chosen));
        });
        if (!rec) {
            CHECK(runner.samples().size() == before);
            break;
        }
        CHECK(runner.samples().size() == before + 1);
        CHECK(runner.samples().params().back() == rec->chosen);
        CHECK(rec->partitions.size() == 3);
        for (const auto& p : rec->partitions) {
            if (!p.active) {
                continue;
            }
            for (const auto& b : p.bounds) {
                CHECK(b.bound >= b.predicted);
                CHECK(b.bound >= b.empirical_mean + b.width);
            }
        }
    }
    CHECK(calls > 0);

    // The global trace sees the variance integral shrink, so r never drops.
    const auto& global = runner.traces()[2][0].pairs();
    for (std::size_t k = 1; k < global.size(); ++k) {
        CHECK(global[k].second >= global[k - 1].second * (1.0 - 1e-12));
    }
}

TEST_CASE("runs are deterministic for a seed") {
    Instance inst(4);
    const auto cfg = pacsbo_config(inst, 4);
    const auto a = run(cfg, inst.problem);
    const auto b = run(cfg, inst.problem);
    CHECK(a.samples.params() == b.samples.params());
    CHECK(a.samples.values(0) == b.samples.values(0));
    REQUIRE(a.iterations.size() == b.iterations.size());
    for (std::size_t k = 0; k < a.iterations.size(); ++k) {
        CHECK(a.iterations[k].partitions[2].bounds[0].bound == b.iterations[k].partitions[2].bounds[0].bound);
    }
}

TEST_CASE("safeopt mode matches a hand-rolled fixed-bound loop") {
    for (std::uint64_t s = 0; s < 3; ++s) {
        Instance inst(10 + s);
        RunConfig cfg;
        cfg.model = inst.model;
        cfg.seed_set = inst.seed;
        cfg.iterations = 8;
        cfg.algorithm = Algorithm::SafeOpt;
        cfg.fixed_bound = 2.0;
        cfg.use_subdomains = false;
        cfg.seed = s;
        const auto h = run(cfg, inst.problem);

        Rng noise = make_rng(s, {0});
        SampleSet samples(2);
        for (GridIndex a : inst.seed) {
            samples.append(a, inst.problem.measure(a, cfg.sigma, noise));
        }
        std::vector<GridIndex> chosen;
        for (std::size_t k = 0; k < cfg.iterations; ++k) {
            const auto plan = plan_safeopt_step(inst.model, samples, cfg.sigma, cfg.delta, {2.0, 2.0}, inst.seed);
            if (!plan.next) {
                break;
            }
            chosen.push_back(*plan.next);
            samples.append(*plan.next, inst.problem.measure(*plan.next, cfg.sigma, noise));
        }
        REQUIRE(h.iterations.size() == chosen.size());
        for (std::size_t k = 0; k < chosen.size(); ++k) {
            CHECK(h.iterations[k].chosen == chosen[k]);
        }
        CHECK(h.samples.values(1) == samples.values(1));
        CHECK(h.best_after(0) == h.initial_best);
        CHECK(h.best_after(h.iterations.size()) == h.best_reward);
    }
}
