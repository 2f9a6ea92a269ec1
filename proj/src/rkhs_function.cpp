#include "pacsbo/rkhs_function.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace pacsbo {

void RkhsFunction::validate() const {
    if (centers.rows() != coefficients.size()) {
        throw std::invalid_argument("RkhsFunction: centers and coefficients differ in length");
    }
    if (coefficients.size() == 0) {
        throw std::invalid_argument("RkhsFunction: expansion must have at least one center");
    }
    if ((centers.array() < 0.0).any() || (centers.array() > 1.0).any()) {
        throw std::invalid_argument("RkhsFunction: centers must lie in [0,1]^n");
    }
    kernel.validate();
}

void SamplerConfig::validate() const {
    if (num_centers == 0) {
        throw std::invalid_argument("SamplerConfig: num_centers must be positive");
    }
    if (!(coeff_bound >= 0.0) || !std::isfinite(coeff_bound)) {
        throw std::invalid_argument("SamplerConfig: coeff_bound must be finite and nonnegative");
    }
    if (target_norm && !(*target_norm > 0.0)) {
        throw std::invalid_argument("SamplerConfig: target_norm must be positive");
    }
}

double evaluate(const RkhsFunction& f, const Eigen::VectorXd& a) {
    if (static_cast<std::size_t>(a.size()) != f.dim()) {
        throw std::invalid_argument("evaluate: dimension mismatch");
    }
    double sum = 0.0;
    for (Eigen::Index s = 0; s < f.coefficients.size(); ++s) {
        sum += f.coefficients(s) * matern32((f.centers.row(s).transpose() - a).norm(), f.kernel.lengthscale);
    }
    return sum;
}

Eigen::VectorXd evaluate_on_grid(const RkhsFunction& f, const GridDomain& grid) {
    if (f.dim() != grid.dim()) {
        throw std::invalid_argument("evaluate_on_grid: dimension mismatch");
    }
    return kernel_matrix(grid.points(), f.centers, f.kernel) * f.coefficients;
}

double rkhs_norm(const RkhsFunction& f) {
    const Eigen::MatrixXd k = kernel_matrix(f.centers, f.centers, f.kernel);
    double sq = f.coefficients.dot(k * f.coefficients);
    if (sq < 0.0 && sq >= -1e-10) {
        sq = 0.0;
    }
    return std::sqrt(sq);
}

RkhsFunction scale_to_norm(const RkhsFunction& f, double target) {
    if (!(target > 0.0)) {
        throw std::invalid_argument("scale_to_norm: target must be positive");
    }
    const double current = rkhs_norm(f);
    if (!(current > 0.0)) {
        throw std::invalid_argument("scale_to_norm: cannot rescale a zero-norm function");
    }
    RkhsFunction out = f;
    if (current != target) {
        out.coefficients *= target / current;
    }
    return out;
}

namespace {

double uniform_coeff(Rng& rng, double bound) {
    if (bound == 0.0) {
        return 0.0;
    }
    std::uniform_real_distribution<double> u(-bound, bound);
    return u(rng);
}

Eigen::MatrixXd rows_of(const GridDomain& grid, const std::vector<GridIndex>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(grid.dim()));
    for (std::size_t s = 0; s < idx.size(); ++s) {
        out.row(static_cast<Eigen::Index>(s)) = grid.points().row(static_cast<Eigen::Index>(idx[s]));
    }
    return out;
}

}  // namespace

RkhsFunction sample_random_function(const GridModel& model, const SamplerConfig& cfg, Rng& rng) {
    cfg.validate();
    std::uniform_int_distribution<std::size_t> pick(0, model.grid.size() - 1);
    std::vector<GridIndex> idx(cfg.num_centers);
    for (auto& c : idx) {
        c = pick(rng);
    }
    Eigen::VectorXd alpha(static_cast<Eigen::Index>(cfg.num_centers));
    for (Eigen::Index s = 0; s < alpha.size(); ++s) {
        alpha(s) = uniform_coeff(rng, cfg.coeff_bound);
    }
    RkhsFunction f{rows_of(model.grid, idx), std::move(alpha), model.kernel.config()};
    if (cfg.target_norm && rkhs_norm(f) > 0.0) {
        f = scale_to_norm(f, *cfg.target_norm);
    }
    return f;
}

InterpolatingSampler::InterpolatingSampler(GridModelPtr model, const SampleSet& samples, std::size_t function_index,
                                           double sigma, std::vector<GridIndex> candidates, const SamplerConfig& cfg)
    : model_(std::move(model)), sigma_(sigma), candidates_(std::move(candidates)), cfg_(cfg) {
    cfg_.validate();
    if (samples.empty()) {
        throw std::invalid_argument("InterpolatingSampler: sample set is empty");
    }
    if (candidates_.empty()) {
        throw std::invalid_argument("InterpolatingSampler: no candidate centers");
    }
    if (sigma_ < 0.0) {
        throw std::invalid_argument("InterpolatingSampler: sigma must be nonnegative");
    }
    const auto& params = samples.params();
    const auto& values = samples.values(function_index);
    std::map<GridIndex, std::size_t> slot;
    std::vector<double> sums;
    std::vector<double> counts;
    for (std::size_t m = 0; m < params.size(); ++m) {
        auto [it, inserted] = slot.try_emplace(params[m], nodes_.size());
        if (inserted) {
            nodes_.push_back(params[m]);
            sums.push_back(0.0);
            counts.push_back(0.0);
        }
        sums[it->second] += values[m];
        counts[it->second] += 1.0;
    }
    if (cfg_.num_centers <= nodes_.size()) {
        throw std::invalid_argument("InterpolatingSampler: num_centers (" + std::to_string(cfg_.num_centers) +
                                    ") must exceed the number of distinct samples (" +
                                    std::to_string(nodes_.size()) + ")");
    }
    targets_.resize(static_cast<Eigen::Index>(nodes_.size()));
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        targets_(static_cast<Eigen::Index>(k)) = sums[k] / counts[k];
    }
    const Eigen::MatrixXd k = model_->kernel.gram(nodes_);
    node_factor_ = k;
    if (auto failed = cholesky_in_place(node_factor_)) {
        node_factor_ = k;
        node_factor_.diagonal().array() += 1e-8;
        if (auto again = cholesky_in_place(node_factor_)) {
            throw NumericError("InterpolatingSampler: Gram matrix of the samples is singular (pivot " +
                               std::to_string(*again) + ")");
        }
    }
}

InterpolationDraw InterpolatingSampler::draw(Rng& rng) const {
    const std::size_t n_nodes = nodes_.size();
    const std::size_t n_tail = cfg_.num_centers - n_nodes;
    InterpolationDraw d;
    d.centers = nodes_;
    d.centers.reserve(cfg_.num_centers);
    std::uniform_int_distribution<std::size_t> pick(0, candidates_.size() - 1);
    for (std::size_t s = 0; s < n_tail; ++s) {
        d.centers.push_back(candidates_[pick(rng)]);
    }
    d.coefficients.resize(static_cast<Eigen::Index>(cfg_.num_centers));
    for (std::size_t s = 0; s < n_tail; ++s) {
        d.coefficients(static_cast<Eigen::Index>(n_nodes + s)) = uniform_coeff(rng, cfg_.coeff_bound);
    }
    d.node_noise.resize(static_cast<Eigen::Index>(n_nodes));
    for (std::size_t m = 0; m < n_nodes; ++m) {
        d.node_noise(static_cast<Eigen::Index>(m)) = truncated_normal(rng, sigma_);
    }

    Eigen::VectorXd rhs = targets_ + d.node_noise;
    const auto& kern = model_->kernel;
    for (std::size_t m = 0; m < n_nodes; ++m) {
        double acc = 0.0;
        for (std::size_t s = 0; s < n_tail; ++s) {
            acc += kern(nodes_[m], d.centers[n_nodes + s]) * d.coefficients(static_cast<Eigen::Index>(n_nodes + s));
        }
        rhs(static_cast<Eigen::Index>(m)) -= acc;
    }
    node_factor_.triangularView<Eigen::Lower>().solveInPlace(rhs);
    node_factor_.triangularView<Eigen::Lower>().transpose().solveInPlace(rhs);
    d.coefficients.head(static_cast<Eigen::Index>(n_nodes)) = rhs;
    return d;
}

double InterpolatingSampler::norm(const InterpolationDraw& d) const {
    const auto& kern = model_->kernel;
    const std::size_t n = d.centers.size();
    double sq = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const double as = d.coefficients(static_cast<Eigen::Index>(s));
        double row = 0.0;
        for (std::size_t t = 0; t < s; ++t) {
            row += kern(d.centers[s], d.centers[t]) * d.coefficients(static_cast<Eigen::Index>(t));
        }
        sq += as * (as + 2.0 * row);
    }
    return std::sqrt(std::max(sq, 0.0));
}

RkhsFunction InterpolatingSampler::to_function(const InterpolationDraw& d) const {
    return RkhsFunction{rows_of(model_->grid, d.centers), d.coefficients, model_->kernel.config()};
}

RkhsFunction sample_interpolating_function(const GridModelPtr& model, const SampleSet& samples,
                                           std::size_t function_index, double sigma, const SamplerConfig& cfg,
                                           Rng& rng) {
    std::vector<GridIndex> all(model->grid.size());
    for (GridIndex i = 0; i < all.size(); ++i) {
        all[i] = i;
    }
    InterpolatingSampler sampler(model, samples, function_index, sigma, std::move(all), cfg);
    return sampler.to_function(sampler.draw(rng));
}

nlohmann::json to_json(const RkhsFunction& f) {
    nlohmann::json centers = nlohmann::json::array();
    for (Eigen::Index s = 0; s < f.centers.rows(); ++s) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index d = 0; d < f.centers.cols(); ++d) {
            row.push_back(f.centers(s, d));
        }
        centers.push_back(std::move(row));
    }
    return {
        {"format", "pacsbo-rkhs-function"},
        {"version", 1},
        {"kernel", {{"family", "matern32"}, {"lengthscale", f.kernel.lengthscale}}},
        {"dim", f.dim()},
        {"centers", centers},
        {"coefficients", std::vector<double>(f.coefficients.data(), f.coefficients.data() + f.coefficients.size())},
    };
}

RkhsFunction rkhs_function_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "pacsbo-rkhs-function" || j.value("version", 0) != 1) {
        throw std::invalid_argument("rkhs function: unsupported format or version");
    }
    if (j.at("kernel").at("family").get<std::string>() != "matern32") {
        throw std::invalid_argument("rkhs function: unsupported kernel family");
    }
    RkhsFunction f;
    f.kernel.lengthscale = j.at("kernel").at("lengthscale").get<double>();
    const auto dim = j.at("dim").get<std::size_t>();
    const auto& centers = j.at("centers");
    const auto coeffs = j.at("coefficients").get<std::vector<double>>();
    f.centers.resize(static_cast<Eigen::Index>(centers.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t s = 0; s < centers.size(); ++s) {
        const auto row = centers[s].get<std::vector<double>>();
        if (row.size() != dim) {
            throw std::invalid_argument("rkhs function: center " + std::to_string(s) + " has wrong dimension");
        }
        for (std::size_t d = 0; d < dim; ++d) {
            f.centers(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(d)) = row[d];
        }
    }
    f.coefficients = Eigen::Map<const Eigen::VectorXd>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
    f.validate();
    return f;
}

}  // namespace pacsbo
