#include "pacsbo/safeopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pacsbo {

double beta_scale(double norm_bound, double sigma, double info_gain, double delta) {
    if (!(norm_bound > 0.0)) {
        throw std::invalid_argument("beta_scale: norm bound must be positive");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("beta_scale: delta must lie in (0,1)");
    }
    if (!(info_gain >= 0.0) || !(sigma >= 0.0)) {
        throw std::invalid_argument("beta_scale: sigma and information gain must be nonnegative");
    }
    return norm_bound + sigma * std::sqrt(2.0 * (info_gain + 1.0 + std::log(1.0 / delta)));
}

double ConfidenceField::width(GridIndex a) const {
    double w = -std::numeric_limits<double>::infinity();
    const auto k = static_cast<Eigen::Index>(a);
    for (std::size_t i = 0; i < lower.size(); ++i) {
        w = std::max(w, upper[i](k) - lower[i](k));
    }
    return w;
}

ConfidenceField confidence_bounds(const std::vector<GridPrediction>& predictions, const std::vector<double>& beta,
                                  const DomainMask& mask) {
    if (predictions.size() != beta.size()) {
        throw std::invalid_argument("confidence_bounds: one beta per function index required");
    }
    ConfidenceField f;
    f.beta = beta;
    const auto n = static_cast<Eigen::Index>(mask.grid_size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, nan);
        Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, nan);
        for (Eigen::Index a = 0; a < n; ++a) {
            if (mask.contains(static_cast<GridIndex>(a))) {
                const double sd = std::sqrt(predictions[i].variance(a));
                lo(a) = predictions[i].mean(a) - beta[i] * sd;
                hi(a) = predictions[i].mean(a) + beta[i] * sd;
            }
        }
        f.lower.push_back(std::move(lo));
        f.upper.push_back(std::move(hi));
    }
    return f;
}

SafeSet safe_set(const ConfidenceField& field, const std::vector<GridIndex>& seed, const DomainMask& mask) {
    SafeSet s;
    std::vector<std::uint8_t> in(mask.grid_size(), 0);
    s.seed_in_mask = false;
    for (GridIndex a : seed) {
        if (mask.contains(a)) {
            in[a] = 1;
            s.seed_in_mask = true;
        }
    }
    for (GridIndex a = 0; a < mask.grid_size(); ++a) {
        if (!mask.contains(a) || in[a]) {
            continue;
        }
        bool ok = true;
        for (std::size_t i = 1; i < field.num_functions() && ok; ++i) {
            ok = field.lower[i](static_cast<Eigen::Index>(a)) >= 0.0;
        }
        in[a] = ok ? 1 : 0;
    }
    for (GridIndex a = 0; a < in.size(); ++a) {
        if (in[a]) {
            s.points.push_back(a);
        }
    }
    return s;
}

std::vector<GridIndex> maximizers(const ConfidenceField& field, const std::vector<GridIndex>& safe) {
    if (safe.empty()) {
        return {};
    }
    double best_lower = -std::numeric_limits<double>::infinity();
    for (GridIndex a : safe) {
        best_lower = std::max(best_lower, field.lower[0](static_cast<Eigen::Index>(a)));
    }
    std::vector<GridIndex> m;
    for (GridIndex a : safe) {
        if (field.upper[0](static_cast<Eigen::Index>(a)) >= best_lower) {
            m.push_back(a);
        }
    }
    return m;
}

std::vector<GridIndex> expanders(const std::vector<GpPosterior>& posteriors,
                                 const std::vector<GridPrediction>& predictions, const ConfidenceField& field,
                                 const std::vector<GridIndex>& safe, const DomainMask& mask,
                                 const ExpanderOptions& options) {
    if (posteriors.size() < 2 || safe.empty()) {
        return {};
    }
    std::vector<std::uint8_t> is_safe(mask.grid_size(), 0);
    for (GridIndex a : safe) {
        is_safe[a] = 1;
    }
    std::vector<GridIndex> unsafe;
    for (GridIndex a = 0; a < mask.grid_size(); ++a) {
        if (mask.contains(a) && !is_safe[a]) {
            unsafe.push_back(a);
        }
    }
    if (unsafe.empty()) {
        return {};
    }

    const GpPosterior& ref = posteriors[1];
    const GridModel& model = ref.model();
    const double noise = ref.sigma() * ref.sigma() + ref.jitter();

    // Whitened cross-covariances to the unsafe points, shared by all candidates.
    Eigen::MatrixXd v_unsafe;
    if (ref.size() > 0) {
        v_unsafe = model.kernel.cross(ref.params(), unsafe);
        ref.factor().triangularView<Eigen::Lower>().solveInPlace(v_unsafe);
    }

    std::vector<GridIndex> out;
    for (GridIndex a : safe) {
        if (!options.exact) {
            bool boundary = false;
            for (GridIndex nb : model.grid.neighbors(a)) {
                if (mask.contains(nb) && !is_safe[nb]) {
                    boundary = true;
                    break;
                }
            }
            if (!boundary) {
                continue;
            }
        }
        const auto ka = static_cast<Eigen::Index>(a);
        Eigen::VectorXd cov(static_cast<Eigen::Index>(unsafe.size()));
        for (std::size_t j = 0; j < unsafe.size(); ++j) {
            cov(static_cast<Eigen::Index>(j)) = model.kernel(a, unsafe[j]);
        }
        if (ref.size() > 0) {
            Eigen::VectorXd va = model.kernel.cross(ref.params(), {a}).col(0);
            ref.factor().triangularView<Eigen::Lower>().solveInPlace(va);
            cov.noalias() -= v_unsafe.transpose() * va;
        }
        const double denom = predictions[1].variance(ka) + noise;

        bool expands = false;
        for (std::size_t j = 0; j < unsafe.size() && !expands; ++j) {
            const auto kx = static_cast<Eigen::Index>(unsafe[j]);
            const double c = cov(static_cast<Eigen::Index>(j));
            const double var_new = std::max(predictions[1].variance(kx) - c * c / denom, 0.0);
            bool all_ok = true;
            for (std::size_t i = 1; i < posteriors.size() && all_ok; ++i) {
                const double innovation = field.upper[i](ka) - predictions[i].mean(ka);
                const double mean_new = predictions[i].mean(kx) + c / denom * innovation;
                all_ok = mean_new - field.beta[i] * std::sqrt(var_new) >= 0.0;
            }
            expands = all_ok;
        }
        if (expands) {
            out.push_back(a);
        }
    }
    return out;
}

std::optional<GridIndex> acquire(const ConfidenceField& field, const std::vector<GridIndex>& candidates) {
    std::optional<GridIndex> best;
    double best_width = -std::numeric_limits<double>::infinity();
    for (GridIndex a : candidates) {
        const double w = field.width(a);
        if (w > best_width || (w == best_width && best && a < *best)) {
            best_width = w;
            best = a;
        }
    }
    return best;
}

std::vector<GridIndex> SafeOptState::candidates() const {
    std::vector<GridIndex> u;
    std::set_union(maximizers.begin(), maximizers.end(), expanders.begin(), expanders.end(), std::back_inserter(u));
    return u;
}

SafeOptState safeopt_subroutine(const std::vector<GpPosterior>& posteriors,
                                const std::vector<GridPrediction>& predictions, const std::vector<double>& beta,
                                const std::vector<GridIndex>& seed, const DomainMask& mask,
                                const ExpanderOptions& options) {
    SafeOptState st;
    st.label = mask.label();
    st.field = confidence_bounds(predictions, beta, mask);
    st.safe = safe_set(st.field, seed, mask);
    if (!st.safe.seed_in_mask) {
        return st;
    }
    st.maximizers = maximizers(st.field, st.safe.points);
    st.expanders = expanders(posteriors, predictions, st.field, st.safe.points, mask, options);
    return st;
}

SafeOptPlan plan_safeopt_step(const GridModelPtr& model, const SampleSet& samples, double sigma, double delta,
                              const std::vector<double>& bounds, const std::vector<GridIndex>& seed,
                              const ExpanderOptions& options) {
    if (bounds.size() != samples.num_functions()) {
        throw std::invalid_argument("plan_safeopt_step: one norm bound per function index required");
    }
    SafeOptPlan plan;
    std::vector<double> beta;
    for (std::size_t i = 0; i < samples.num_functions(); ++i) {
        plan.posteriors.push_back(gp_fit(model, samples, i, sigma));
        plan.predictions.push_back(plan.posteriors.back().predict_all());
        beta.push_back(beta_scale(bounds[i], sigma, info_gain(plan.posteriors.back()), delta));
    }
    const DomainMask everything = DomainMask::full(model->grid);
    plan.state = safeopt_subroutine(plan.posteriors, plan.predictions, beta, seed, everything, options);
    plan.next = acquire(plan.state.field, plan.state.candidates());
    return plan;
}

}  // namespace pacsbo
