#include "pacsbo/pac_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pacsbo {

void PacConfig::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("PacConfig: delta must lie in (0, 1)");
    }
    if (q_init == 0 || q_init > q_max) {
        throw std::invalid_argument("PacConfig: need 0 < q_init <= q_max");
    }
    if (!(safety_factor > 1.0)) {
        throw std::invalid_argument("PacConfig: safety_factor must exceed 1");
    }
    sampler.validate();
}

double hoeffding_width(double delta, std::size_t q, double range) {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("hoeffding_width: delta must lie in (0, 1)");
    }
    if (q == 0 || !(range >= 0.0)) {
        throw std::invalid_argument("hoeffding_width: need q >= 1 and range >= 0");
    }
    return std::sqrt(std::log(2.0 / delta) * range * range / (2.0 * static_cast<double>(q)));
}

double pairwise_sum(const double* data, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            s += data[k];
        }
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

std::vector<double> draw_norms(const InterpolatingSampler& sampler, std::size_t begin, std::size_t end,
                               std::uint64_t seed) {
    std::vector<double> out;
    out.reserve(end > begin ? end - begin : 0);
    for (std::size_t j = begin; j < end; ++j) {
        Rng rng = make_rng(seed, {j});
        out.push_back(sampler.norm(sampler.draw(rng)));
    }
    return out;
}

ThresholdStats threshold_stats(const std::vector<double>& norms, double delta) {
    if (norms.empty()) {
        throw std::invalid_argument("threshold_stats: no draws");
    }
    const auto [lo, hi] = std::minmax_element(norms.begin(), norms.end());
    ThresholdStats s;
    s.mean = pairwise_sum(norms.data(), norms.size()) / static_cast<double>(norms.size());
    s.range = *hi - *lo;
    s.width = hoeffding_width(delta, norms.size(), s.range);
    return s;
}

ThresholdStats acceptance_threshold(const InterpolatingSampler& sampler, std::size_t q, double delta,
                                    std::uint64_t seed) {
    return threshold_stats(draw_norms(sampler, 0, q, seed), delta);
}

PacResult pac_overestimate(double predicted, const InterpolatingSampler& sampler, const PacConfig& cfg,
                           std::uint64_t seed) {
    cfg.validate();
    if (!(predicted > 0.0) || !std::isfinite(predicted)) {
        throw std::invalid_argument("pac_overestimate: predictor output must be positive and finite");
    }
    PacResult res;
    res.predicted = predicted;
    res.bound = predicted;

    std::vector<double> norms;
    std::size_t q = cfg.q_init;
    ThresholdStats stats;
    while (true) {
        if (norms.size() < q) {
            const auto more = draw_norms(sampler, norms.size(), q, seed);
            norms.insert(norms.end(), more.begin(), more.end());
            stats = threshold_stats(norms, cfg.delta);
        }
        if (res.bound >= stats.threshold()) {
            break;
        }
        q += cfg.q_init;
        if (q > cfg.q_max) {
            // No more draws: keep the last batch and escalate B until it passes.
            q = norms.size();
            res.bound *= cfg.safety_factor;
            res.escalated = true;
        }
    }
    res.q_used = norms.size();
    res.empirical_mean = stats.mean;
    res.width = stats.width;
    res.range = stats.range;
    return res;
}

SampleSet restrict_samples(const SampleSet& samples, const DomainMask& mask) {
    SampleSet out(samples.num_functions());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (!mask.contains(samples.params()[k])) {
            continue;
        }
        std::vector<double> m(samples.num_functions());
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = samples.values(i)[k];
        }
        out.append(samples.params()[k], m);
    }
    return out;
}

PacResult estimate_upper_bound(const MlpPredictor& eta, const NormTrace& trace, const GridModelPtr& model,
                               const SampleSet& samples, std::size_t i, double sigma, const DomainMask& mask,
                               const PacConfig& cfg, std::uint64_t seed) {
    const SampleSet local = restrict_samples(samples, mask);
    if (local.empty()) {
        throw std::invalid_argument("estimate_upper_bound: no samples inside the mask");
    }
    const InterpolatingSampler sampler(model, local, i, sigma, mask.indices(), cfg.sampler);
    return pac_overestimate(predict_norm(eta, trace), sampler, cfg, seed);
}

}  // namespace pacsbo
