#include "pacsbo/pacsbo_loop.hpp"

#include "pacsbo/subdomain.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <string>

namespace pacsbo {

std::string_view to_string(Algorithm a) {
    return a == Algorithm::Pacsbo ? "pacsbo" : "safeopt";
}

Algorithm algorithm_from_string(std::string_view s) {
    if (s == "pacsbo") {
        return Algorithm::Pacsbo;
    }
    if (s == "safeopt") {
        return Algorithm::SafeOpt;
    }
    throw std::invalid_argument("unknown algorithm '" + std::string(s) + "' (expected pacsbo or safeopt)");
}

std::string_view to_string(RunStatus s) {
    return s == RunStatus::Completed ? "completed" : "stalled";
}

void RunConfig::validate() const {
    if (!model) {
        throw std::invalid_argument("RunConfig: grid model missing");
    }
    if (seed_set.empty()) {
        throw std::invalid_argument("RunConfig: seed set S0 must be nonempty");
    }
    for (GridIndex a : seed_set) {
        if (a >= model->grid.size()) {
            throw std::invalid_argument("RunConfig: seed point outside the grid");
        }
    }
    if (iterations == 0) {
        throw std::invalid_argument("RunConfig: iteration budget must be at least 1");
    }
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("RunConfig: sigma must be positive");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("RunConfig: delta must lie in (0, 1)");
    }
    if (!(enlarge_factor >= 1.0)) {
        throw std::invalid_argument("RunConfig: enlarge_factor must be at least 1");
    }
    if (algorithm == Algorithm::SafeOpt) {
        if (!(fixed_bound > 0.0)) {
            throw std::invalid_argument("RunConfig: safeopt mode requires a positive fixed bound");
        }
    } else {
        if (!predictor) {
            throw std::invalid_argument("RunConfig: pacsbo mode requires a trained predictor");
        }
        if (predictor->input_length() % 2 != 0) {
            throw std::invalid_argument("RunConfig: predictor input length must be even");
        }
        pac.validate();
    }
}

bool RunHistory::any_unsafe() const {
    return std::any_of(iterations.begin(), iterations.end(), [](const IterationRecord& r) { return r.unsafe; });
}

double RunHistory::best_after(std::size_t k) const {
    if (k == 0 || iterations.empty()) {
        return initial_best;
    }
    return iterations[std::min(k, iterations.size()) - 1].best_safe_reward;
}

Runner::Runner(RunConfig config, const SyntheticProblem& problem)
    : config_(std::move(config)),
      problem_(problem),
      noise_(make_rng(config_.seed, {0})),
      samples_(problem.num_functions()) {
    config_.validate();
    if (problem.reward_on_grid().size() != static_cast<Eigen::Index>(config_.model->grid.size())) {
        throw std::invalid_argument("Runner: problem and model use different grids");
    }
    const std::size_t partitions = config_.use_subdomains ? 3 : 1;
    const std::size_t capacity = config_.predictor ? config_.predictor->input_length() / 2 : 0;
    traces_.assign(partitions, std::vector<NormTrace>(problem.num_functions(), NormTrace(capacity)));
    for (GridIndex a : config_.seed_set) {
        const auto m = problem_.measure(a, config_.sigma, noise_);
        samples_.append(a, m);
        note_measurement(a, m);
    }
}

void Runner::note_measurement(GridIndex a, const std::vector<double>& m) {
    const bool safe = std::all_of(m.begin() + 1, m.end(), [](double v) { return v >= 0.0; });
    if (safe && (!best_param_ || m[0] > best_)) {
        best_param_ = a;
        best_ = m[0];
    }
}

std::vector<PacResult> Runner::bounds_for(std::size_t p, const DomainMask& mask,
                                          const std::vector<GridPrediction>& preds,
                                          const std::vector<GpPosterior>& posts) {
    const std::size_t nf = samples_.num_functions();
    std::vector<PacResult> out;
    if (config_.algorithm == Algorithm::SafeOpt) {
        PacResult fixed;
        fixed.bound = config_.fixed_bound;
        fixed.predicted = config_.fixed_bound;
        out.assign(nf, fixed);
        return out;
    }
    // Union bound over every Algorithm-3 call of this iteration.
    PacConfig pac = config_.pac;
    pac.delta = config_.pac.delta / static_cast<double>(traces_.size() * nf);
    const SampleSet local = restrict_samples(samples_, mask);
    const std::vector<GridIndex> candidates = mask.indices();
    const double r = reciprocal_cov_integral(preds[0].variance, mask, config_.model->grid.cell_volume());
    for (std::size_t i = 0; i < nf; ++i) {
        traces_[p][i].append(mean_rkhs_norm(posts[i]), r);
        const InterpolatingSampler sampler(config_.model, local, i, config_.sigma, candidates, pac.sampler);
        const double predicted = predict_norm(*config_.predictor, traces_[p][i]);
        out.push_back(pac_overestimate(predicted, sampler, pac, derive_seed(config_.seed, {1, iteration_, p, i})));
    }
    return out;
}

std::optional<IterationRecord> Runner::step(const SnapshotObserver& observer) {
    const auto start = std::chrono::steady_clock::now();
    ++iteration_;
    const GridModel& model = *config_.model;
    std::vector<DomainMask> masks;
    if (config_.use_subdomains) {
        auto triple = build_partitions(samples_, model.grid, config_.enlarge_factor);
        masks = {std::move(triple.tilde), std::move(triple.hat), std::move(triple.global)};
    } else {
        masks = {DomainMask::full(model.grid)};
    }

    std::vector<GpPosterior> posts;
    std::vector<GridPrediction> preds;
    std::vector<double> gamma;
    for (std::size_t i = 0; i < samples_.num_functions(); ++i) {
        posts.push_back(gp_fit(config_.model, samples_, i, config_.sigma));
        preds.push_back(posts.back().predict_all());
        gamma.push_back(info_gain(posts.back()));
    }

    IterationRecord rec;
    rec.iteration = iteration_;
    std::vector<SafeOptState> states;
    std::optional<std::size_t> winner;
    for (std::size_t p = 0; p < masks.size(); ++p) {
        PartitionRecord pr;
        pr.label = masks[p].label();
        pr.mask_size = masks[p].count();
        pr.bounds = bounds_for(p, masks[p], preds, posts);
        std::vector<double> beta;
        for (std::size_t i = 0; i < pr.bounds.size(); ++i) {
            beta.push_back(beta_scale(pr.bounds[i].bound, config_.sigma, gamma[i], config_.delta));
        }
        SafeOptState st = safeopt_subroutine(posts, preds, beta, config_.seed_set, masks[p], config_.expander);
        pr.active = st.safe.seed_in_mask;
        pr.safe = st.safe.points.size();
        pr.maximizers = st.maximizers.size();
        pr.expanders = st.expanders.size();
        pr.proposal = acquire(st.field, st.candidates());
        if (pr.proposal) {
            pr.proposal_width = st.field.width(*pr.proposal);
            if (!winner || pr.proposal_width > rec.partitions[*winner].proposal_width) {
                winner = p;
            }
        }
        rec.partitions.push_back(std::move(pr));
        states.push_back(std::move(st));
    }
    if (!winner) {
        --iteration_;
        return std::nullopt;
    }

    rec.chosen = *rec.partitions[*winner].proposal;
    rec.chosen_from = rec.partitions[*winner].label;
    rec.unsafe = problem_.unsafe(rec.chosen);
    rec.measurement = problem_.measure(rec.chosen, config_.sigma, noise_);
    note_measurement(rec.chosen, rec.measurement);
    rec.best_safe_reward = best_;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (observer) {
        observer(IterationSnapshot{iteration_, samples_, preds, states, rec});
    }
    samples_.append(rec.chosen, rec.measurement);
    return rec;
}

RunHistory run(const RunConfig& config, const SyntheticProblem& problem, const SnapshotObserver& observer) {
    Runner runner(config, problem);
    RunHistory h;
    h.seed_set = config.seed_set;
    h.initial_best = runner.best_;
    for (std::size_t t = 0; t < config.iterations; ++t) {
        auto rec = runner.step(observer);
        if (!rec) {
            h.status = RunStatus::Stalled;
            break;
        }
        h.iterations.push_back(std::move(*rec));
    }
    h.samples = runner.samples();
    h.best_param = runner.best_param_;
    h.best_reward = runner.best_;
    return h;
}

}  // namespace pacsbo
