#include "pacsbo/gp.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pacsbo {

void SampleSet::append(GridIndex param, const std::vector<double>& measurements) {
    if (measurements.size() != values_.size()) {
        throw std::invalid_argument("SampleSet::append: expected " + std::to_string(values_.size()) +
                                    " measurements, got " + std::to_string(measurements.size()));
    }
    params_.push_back(param);
    for (std::size_t i = 0; i < values_.size(); ++i) {
        values_[i].push_back(measurements[i]);
    }
}

std::optional<std::size_t> cholesky_in_place(Eigen::MatrixXd& m) {
    const Eigen::Index n = m.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = m(j, j) - m.row(j).head(j).squaredNorm();
        if (!(d > 0.0) || !std::isfinite(d)) {
            return static_cast<std::size_t>(j);
        }
        d = std::sqrt(d);
        m(j, j) = d;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            m(i, j) = (m(i, j) - m.row(i).head(j).dot(m.row(j).head(j))) / d;
        }
    }
    m.triangularView<Eigen::StrictlyUpper>().setZero();
    return std::nullopt;
}

GpPosterior::GpPosterior(GridModelPtr model, std::vector<GridIndex> params, Eigen::VectorXd y, double sigma)
    : model_(std::move(model)), params_(std::move(params)), y_(std::move(y)), sigma_(sigma) {
    if (!(sigma_ > 0.0)) {
        throw std::invalid_argument("gp_fit: noise level sigma must be positive");
    }
    if (static_cast<std::size_t>(y_.size()) != params_.size()) {
        throw std::invalid_argument("gp_fit: measurement count does not match parameter count");
    }
    const auto n = static_cast<Eigen::Index>(params_.size());
    const Eigen::MatrixXd k = model_->kernel.gram(params_);
    const double noise = sigma_ * sigma_;

    factor_ = k;
    factor_.diagonal().array() += noise;
    auto failed = cholesky_in_place(factor_);
    if (failed) {
        jitter_ = 1e-8;
        spdlog::debug("gp_fit: pivot {} not positive, retrying with jitter {}", *failed, jitter_);
        factor_ = k;
        factor_.diagonal().array() += noise + jitter_;
        failed = cholesky_in_place(factor_);
        if (failed) {
            throw NumericError("gp_fit: K_A + sigma^2 I is not positive definite (pivot " +
                               std::to_string(*failed) + " of " + std::to_string(n) + ")");
        }
    }
    weights_ = factor_.triangularView<Eigen::Lower>().solve(y_);
    factor_.triangularView<Eigen::Lower>().transpose().solveInPlace(weights_);
}

GridPrediction GpPosterior::predict(const std::vector<GridIndex>& query) const {
    const auto q = static_cast<Eigen::Index>(query.size());
    GridPrediction out{Eigen::VectorXd::Zero(q), Eigen::VectorXd::Ones(q)};
    if (params_.empty()) {
        return out;
    }
    Eigen::MatrixXd kaq = model_->kernel.cross(params_, query);
    out.mean.noalias() = kaq.transpose() * weights_;
    factor_.triangularView<Eigen::Lower>().solveInPlace(kaq);
    out.variance = 1.0 - kaq.colwise().squaredNorm().transpose().array();
    for (Eigen::Index j = 0; j < q; ++j) {
        double& v = out.variance(j);
        if (v < -1e-9) {
            spdlog::warn("gp_predict: variance {} at grid point {} clamped to 0", v, query[static_cast<std::size_t>(j)]);
        }
        v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

GridPrediction GpPosterior::predict_all() const {
    std::vector<GridIndex> all(model_->grid.size());
    for (GridIndex i = 0; i < all.size(); ++i) {
        all[i] = i;
    }
    return predict(all);
}

Eigen::VectorXd GpPosterior::covariance_with(GridIndex a, const std::vector<GridIndex>& query) const {
    const auto q = static_cast<Eigen::Index>(query.size());
    Eigen::VectorXd out(q);
    for (Eigen::Index j = 0; j < q; ++j) {
        out(j) = model_->kernel(a, query[static_cast<std::size_t>(j)]);
    }
    if (params_.empty()) {
        return out;
    }
    Eigen::VectorXd va = model_->kernel.cross(params_, {a}).col(0);
    factor_.triangularView<Eigen::Lower>().solveInPlace(va);
    Eigen::MatrixXd vq = model_->kernel.cross(params_, query);
    factor_.triangularView<Eigen::Lower>().solveInPlace(vq);
    out.noalias() -= vq.transpose() * va;
    return out;
}

GpPosterior gp_fit(const GridModelPtr& model, const SampleSet& samples, std::size_t i, double sigma) {
    const auto& v = samples.values(i);
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    return GpPosterior(model, samples.params(), std::move(y), sigma);
}

GridPrediction gp_predict(const GpPosterior& post, const std::vector<GridIndex>& query) {
    return post.predict(query);
}

double mean_rkhs_norm(const GpPosterior& post) {
    if (post.size() == 0) {
        throw std::invalid_argument("mean_rkhs_norm: prior posterior has no samples");
    }
    const Eigen::MatrixXd k = post.model().kernel.gram(post.params());
    const double sq = post.weights().dot(k * post.weights());
    return std::sqrt(std::max(sq, 0.0));
}

double reciprocal_cov_integral(const Eigen::VectorXd& grid_variance, const DomainMask& mask, double cell_volume) {
    if (static_cast<std::size_t>(grid_variance.size()) != mask.grid_size()) {
        throw std::invalid_argument("reciprocal_cov_integral: variance/mask size mismatch");
    }
    double total = 0.0;
    std::size_t n = 0;
    for (GridIndex i = 0; i < mask.grid_size(); ++i) {
        if (mask.contains(i)) {
            total += grid_variance(static_cast<Eigen::Index>(i));
            ++n;
        }
    }
    if (n == 0) {
        throw std::invalid_argument("reciprocal_cov_integral: empty mask");
    }
    total *= cell_volume;
    // Fully conditioned masks can integrate to zero after clamping.
    total = std::max(total, std::numeric_limits<double>::min());
    return 1.0 / total;
}

double reciprocal_cov_integral(const GpPosterior& post, const DomainMask& mask) {
    const auto idx = mask.indices();
    if (idx.empty()) {
        throw std::invalid_argument("reciprocal_cov_integral: empty mask");
    }
    const auto pred = post.predict(idx);
    double total = 0.0;
    for (Eigen::Index j = 0; j < pred.variance.size(); ++j) {
        total += pred.variance(j);
    }
    total *= post.model().grid.cell_volume();
    return 1.0 / std::max(total, std::numeric_limits<double>::min());
}

double info_gain(const GpPosterior& post) {
    if (post.size() == 0) {
        return 0.0;
    }
    const double log_det_half = post.factor().diagonal().array().log().sum();
    const double value = log_det_half - static_cast<double>(post.size()) * std::log(post.sigma());
    return std::max(value, 0.0);
}

}  // namespace pacsbo
