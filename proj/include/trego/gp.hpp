#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "trego/box_lbfgs.hpp"
#include "trego/design.hpp"
#include "trego/errors.hpp"
#include "trego/kernel.hpp"

namespace trego {

/// Evaluated points (in [0,1]^n) and their objective values.
class Dataset {
public:
    static constexpr double kDuplicateTolerance = 1e-10;

    explicit Dataset(int dim) : dim_(dim) {
        if (dim < 1) throw ConfigError("dataset dimension must be positive");
    }

    int dim() const { return dim_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    const std::vector<Eigen::VectorXd>& points() const { return points_; }
    const std::vector<double>& values() const { return values_; }
    const Eigen::VectorXd& point(std::size_t i) const { return points_[i]; }
    double value(std::size_t i) const { return values_[i]; }

    /// Appends (x, y). Rejects out-of-cube coordinates, dimension mismatches and,
    /// unless `allow_duplicate`, points within kDuplicateTolerance of an existing one.
    void add(const Eigen::VectorXd& x, double y, bool allow_duplicate = false) {
        if (x.size() != dim_) throw DomainError("point dimension mismatch");
        if ((x.array() < 0.0).any() || (x.array() > 1.0).any()) throw DomainError("point outside [0,1]^n");
        if (!allow_duplicate && has_near(x)) throw DomainError("duplicate point in dataset");
        points_.push_back(x);
        values_.push_back(y);
    }

    bool has_near(const Eigen::VectorXd& x, double tolerance = kDuplicateTolerance) const {
        return std::any_of(points_.begin(), points_.end(),
                           [&](const Eigen::VectorXd& p) { return (p - x).norm() < tolerance; });
    }

    /// Index of the smallest value; ties go to the earliest entry.
    std::size_t argmin() const {
        if (empty()) throw StateError("argmin of an empty dataset");
        std::size_t best = 0;
        for (std::size_t i = 1; i < values_.size(); ++i)
            if (values_[i] < values_[best]) best = i;
        return best;
    }

    Eigen::MatrixXd point_matrix() const {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(size()), dim_);
        for (std::size_t i = 0; i < size(); ++i) m.row(static_cast<Eigen::Index>(i)) = points_[i].transpose();
        return m;
    }

    Eigen::VectorXd value_vector() const {
        return Eigen::Map<const Eigen::VectorXd>(values_.data(), static_cast<Eigen::Index>(values_.size()));
    }

private:
    int dim_;
    std::vector<Eigen::VectorXd> points_;
    std::vector<double> values_;
};

/// Diagonal regularization, relative to the signal variance. On a failed
/// Cholesky the jitter is multiplied by 10 until it exceeds `max_relative`.
/// A zero initial jitter means a single attempt with no escalation.
struct JitterPolicy {
    double initial_relative = 1e-10;
    double max_relative = 1e-4;
};

struct Posterior {
    double mean = 0.0;
    double variance = 0.0;
};

struct PosteriorGradient {
    Posterior value;
    Eigen::VectorXd mean_gradient;
    Eigen::VectorXd variance_gradient;
};

namespace gp_detail {

/// Correlation matrix R (unit signal variance) and, optionally, the per-entry radial weights.
inline Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& X, const Eigen::VectorXd& lengthscales,
                                          Eigen::MatrixXd* radial_weights = nullptr) {
    const Eigen::Index t = X.rows();
    const Eigen::MatrixXd Z = X.array().rowwise() / lengthscales.transpose().array();
    Eigen::MatrixXd R(t, t);
    if (radial_weights) radial_weights->resize(t, t);
    for (Eigen::Index a = 0; a < t; ++a) {
        R(a, a) = 1.0;
        if (radial_weights) (*radial_weights)(a, a) = kernel_detail::matern52_radial_weight(0.0);
        for (Eigen::Index b = a + 1; b < t; ++b) {
            const double r = (Z.row(a) - Z.row(b)).norm();
            R(a, b) = R(b, a) = kernel_detail::matern52_shape(r);
            if (radial_weights)
                (*radial_weights)(a, b) = (*radial_weights)(b, a) = kernel_detail::matern52_radial_weight(r);
        }
    }
    return R;
}

struct Factorization {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter_relative = 0.0;
};

/// Cholesky of s²(R + ηI) with jitter escalation on η.
inline Factorization factorize(const Eigen::MatrixXd& R, double signal_variance, const JitterPolicy& policy) {
    const Eigen::Index t = R.rows();
    double eta = policy.initial_relative;
    for (;;) {
        Eigen::MatrixXd K = signal_variance * R;
        K.diagonal().array() += signal_variance * eta;
        Factorization f{Eigen::LLT<Eigen::MatrixXd>(K), eta};
        if (f.llt.info() == Eigen::Success) {
            const auto diag = f.llt.matrixLLT().diagonal();
            if ((diag.array() > 0.0).all() && diag.allFinite() &&
                diag.minCoeff() > 1e-9 * diag.maxCoeff())
                return f;
        }
        if (eta <= 0.0 || eta * 10.0 > policy.max_relative * (1.0 + 1e-12))
            throw NumericalError("covariance factorization failed (t=" + std::to_string(t) +
                                 ", relative jitter " + std::to_string(eta) + ")");
        eta *= 10.0;
    }
}

inline double gls_trend(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& y) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(y.size());
    const Eigen::VectorXd kinv_ones = llt.solve(ones);
    return kinv_ones.dot(y) / kinv_ones.sum();
}

}  // namespace gp_detail

/// Log marginal likelihood with its gradient.
struct LikelihoodEvaluation {
    double value = 0.0;
    /// d value / d[log ℓ_1 .. log ℓ_n, log s²]
    Eigen::VectorXd gradient;
    double trend = 0.0;
    double jitter_relative = 0.0;
};

/// Gaussian log marginal likelihood of `data` under a constant-trend Matérn 5/2
/// GP. When `trend` is empty the trend is profiled out at its generalized least
/// squares estimate; by the envelope theorem the gradient is then the partial
/// derivative at that estimate.
inline LikelihoodEvaluation evaluate_likelihood(const Hyperparameters& hp, const Dataset& data,
                                                std::optional<double> trend = std::nullopt,
                                                const JitterPolicy& jitter = {}, bool with_gradient = true) {
    if (data.empty()) throw StateError("likelihood of an empty dataset");
    validate(hp, data.dim());
    const Eigen::MatrixXd X = data.point_matrix();
    const Eigen::VectorXd y = data.value_vector();
    const Eigen::Index t = X.rows();
    const Eigen::Index n = X.cols();

    Eigen::MatrixXd weights;
    const Eigen::MatrixXd R = gp_detail::correlation_matrix(X, hp.lengthscales, with_gradient ? &weights : nullptr);
    auto fac = gp_detail::factorize(R, hp.signal_variance, jitter);

    LikelihoodEvaluation out;
    out.jitter_relative = fac.jitter_relative;
    out.trend = trend ? *trend : gp_detail::gls_trend(fac.llt, y);
    const Eigen::VectorXd resid = y.array() - out.trend;
    const Eigen::VectorXd alpha = fac.llt.solve(resid);
    const double log_det = 2.0 * fac.llt.matrixLLT().diagonal().array().log().sum();
    out.value = -0.5 * resid.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(t) * std::log(2.0 * M_PI);
    if (!with_gradient) return out;

    // W = ααᵀ - K⁻¹; dLML/dθ = ½ tr(W dK/dθ)
    Eigen::MatrixXd W = -fac.llt.solve(Eigen::MatrixXd::Identity(t, t));
    W.noalias() += alpha * alpha.transpose();

    out.gradient.resize(n + 1);
    // dK_ab/dlog ℓ_j = s² w(r_ab) (x_aj - x_bj)² / ℓ_j²
    const Eigen::MatrixXd M = (W.array() * weights.array()).matrix() * hp.signal_variance;
    const Eigen::VectorXd row_sums = M.rowwise().sum();
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::VectorXd xj = X.col(j);
        const double quad = 2.0 * xj.array().square().matrix().dot(row_sums) - 2.0 * xj.dot(M * xj);
        out.gradient[j] = 0.5 * quad / (hp.lengthscales[j] * hp.lengthscales[j]);
    }
    // dK/dlog s² = K
    out.gradient[n] = 0.5 * (resid.dot(alpha) - static_cast<double>(t));
    return out;
}

inline double log_marginal_likelihood(const Hyperparameters& hp, const Dataset& data,
                                      std::optional<double> trend = std::nullopt, const JitterPolicy& jitter = {}) {
    return evaluate_likelihood(hp, data, trend, jitter, false).value;
}

/// A GP conditioned on a dataset. Immutable once built; default-constructed
/// instances are unfitted and refuse queries.
class GPModel {
public:
    GPModel() = default;

    static GPModel condition(Dataset data, Hyperparameters hp, std::optional<double> trend = std::nullopt,
                             const JitterPolicy& jitter = {}) {
        if (data.empty()) throw StateError("cannot condition on an empty dataset");
        validate(hp, data.dim());
        GPModel m;
        m.X_ = data.point_matrix();
        const Eigen::VectorXd y = data.value_vector();
        const Eigen::MatrixXd R = gp_detail::correlation_matrix(m.X_, hp.lengthscales);
        auto fac = gp_detail::factorize(R, hp.signal_variance, jitter);
        m.trend_ = trend ? *trend : gp_detail::gls_trend(fac.llt, y);
        const Eigen::VectorXd resid = y.array() - m.trend_;
        m.alpha_ = fac.llt.solve(resid);
        const double log_det = 2.0 * fac.llt.matrixLLT().diagonal().array().log().sum();
        m.log_likelihood_ = -0.5 * resid.dot(m.alpha_) - 0.5 * log_det -
                            0.5 * static_cast<double>(y.size()) * std::log(2.0 * M_PI);
        m.jitter_relative_ = fac.jitter_relative;
        m.llt_ = std::move(fac.llt);
        m.inv_sq_lengthscales_ = hp.lengthscales.array().square().inverse();
        m.hp_ = std::move(hp);
        m.data_.emplace(std::move(data));
        return m;
    }

    bool fitted() const { return data_.has_value(); }
    const Hyperparameters& hyperparameters() const { return hp_; }
    double trend() const { return trend_; }
    /// Absolute jitter added to the covariance diagonal.
    double jitter() const { return jitter_relative_ * hp_.signal_variance; }
    double log_likelihood() const { return log_likelihood_; }
    int dim() const { return static_cast<int>(X_.cols()); }

    const Dataset& training_data() const {
        require_fitted();
        return *data_;
    }

    Posterior posterior(const Eigen::VectorXd& x) const {
        require_fitted();
        const Eigen::VectorXd k = cross_covariance(x);
        Posterior p;
        p.mean = trend_ + k.dot(alpha_);
        const Eigen::VectorXd v = llt_.matrixL().solve(k);
        p.variance = std::max(0.0, prior_variance() - v.squaredNorm());
        return p;
    }

    PosteriorGradient posterior_with_gradient(const Eigen::VectorXd& x) const {
        require_fitted();
        const Eigen::Index t = X_.rows();
        const Eigen::Index n = X_.cols();
        Eigen::VectorXd k(t);
        Eigen::MatrixXd dk(t, n);  // dk_i / dx
        const double s2 = hp_.signal_variance;
        for (Eigen::Index i = 0; i < t; ++i) {
            const Eigen::ArrayXd diff = x.array() - X_.row(i).transpose().array();
            const double r = std::sqrt((diff.square() * inv_sq_lengthscales_).sum());
            k[i] = s2 * kernel_detail::matern52_shape(r) + (r < kCoincident ? nugget() : 0.0);
            dk.row(i) = (-s2 * kernel_detail::matern52_radial_weight(r) * diff * inv_sq_lengthscales_).transpose();
        }
        PosteriorGradient g;
        g.value.mean = trend_ + k.dot(alpha_);
        g.mean_gradient = dk.transpose() * alpha_;
        const Eigen::VectorXd v = llt_.matrixL().solve(k);
        const double var = prior_variance() - v.squaredNorm();
        g.value.variance = std::max(0.0, var);
        if (var > 0.0) {
            const Eigen::VectorXd w = llt_.matrixU().solve(v);
            g.variance_gradient = -2.0 * dk.transpose() * w;
        } else {
            g.variance_gradient = Eigen::VectorXd::Zero(n);
        }
        return g;
    }

private:
    // The jitter acts as a nugget: it is part of the prior at every point and
    // of the cross covariance at a training point, so the posterior
    // interpolates exactly and variance <= signal_variance * (1 + jitter).
    // Its gradient contribution is a delta and is dropped.
    static constexpr double kCoincident = 1e-10;

    double nugget() const { return hp_.signal_variance * jitter_relative_; }
    double prior_variance() const { return hp_.signal_variance + nugget(); }

    void require_fitted() const {
        if (!fitted()) throw StateError("GP model is not fitted");
    }

    Eigen::VectorXd cross_covariance(const Eigen::VectorXd& x) const {
        if (x.size() != X_.cols()) throw DomainError("query dimension mismatch");
        const Eigen::Index t = X_.rows();
        Eigen::VectorXd k(t);
        for (Eigen::Index i = 0; i < t; ++i) {
            const double r =
                std::sqrt(((x.array() - X_.row(i).transpose().array()).square() * inv_sq_lengthscales_).sum());
            k[i] = hp_.signal_variance * kernel_detail::matern52_shape(r) + (r < kCoincident ? nugget() : 0.0);
        }
        return k;
    }

    Eigen::MatrixXd X_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    Eigen::ArrayXd inv_sq_lengthscales_;
    Hyperparameters hp_;
    double trend_ = 0.0;
    double jitter_relative_ = 0.0;
    double log_likelihood_ = 0.0;
    std::optional<Dataset> data_;
};

/// Maximum-likelihood fit settings. Bounds are on the normalized domain; the
/// signal-variance bounds scale with the empirical variance of the values.
struct FitConfig {
    double lengthscale_min = 1e-2;
    double lengthscale_max = 10.0;
    double signal_variance_min_factor = 1e-6;
    double signal_variance_max_factor = 1e3;
    /// Total number of starts: the warm start (or a fixed default) plus space-filling draws.
    int starts = 5;
    std::optional<Hyperparameters> warm_start;
    JitterPolicy jitter;
    opt::LbfgsSettings optimizer{.max_iterations = 60, .memory = 6, .gradient_tolerance = 1e-6,
                                 .relative_f_tolerance = 1e-9, .max_line_search_steps = 20};
    std::uint64_t seed = 0;
};

struct FitReport {
    std::vector<Hyperparameters> start_points;
    /// LML at each start point, -inf where the evaluation failed.
    std::vector<double> start_likelihoods;
    std::vector<double> final_likelihoods;
    std::size_t chosen_start = 0;
    double best_likelihood = -std::numeric_limits<double>::infinity();
};

namespace gp_detail {
struct LogBounds {
    Eigen::VectorXd lower, upper;
};

inline LogBounds log_bounds(const FitConfig& config, int dim, double value_variance) {
    LogBounds b{Eigen::VectorXd(dim + 1), Eigen::VectorXd(dim + 1)};
    b.lower.head(dim).setConstant(std::log(config.lengthscale_min));
    b.upper.head(dim).setConstant(std::log(config.lengthscale_max));
    b.lower[dim] = std::log(config.signal_variance_min_factor * value_variance);
    b.upper[dim] = std::log(config.signal_variance_max_factor * value_variance);
    return b;
}

inline Hyperparameters from_log(const Eigen::VectorXd& theta) {
    const Eigen::Index n = theta.size() - 1;
    return Hyperparameters{theta.head(n).array().exp().matrix(), std::exp(theta[n])};
}

inline Eigen::VectorXd to_log(const Hyperparameters& hp) {
    Eigen::VectorXd theta(hp.lengthscales.size() + 1);
    theta.head(hp.lengthscales.size()) = hp.lengthscales.array().log().matrix();
    theta[hp.lengthscales.size()] = std::log(hp.signal_variance);
    return theta;
}
}  // namespace gp_detail

/// Empirical (population) variance of the dataset values, with a unit fallback for constant data.
inline double value_scale(const Dataset& data) {
    const Eigen::VectorXd y = data.value_vector();
    const double var = (y.array() - y.mean()).square().mean();
    return (var > 0.0 && std::isfinite(var)) ? var : 1.0;
}

/// Multi-start quasi-Newton maximization of the profiled LML over log-hyperparameters.
///
/// Starts are evaluated in order and the best final LML wins, ties going to the
/// lowest start index, so the result does not depend on evaluation order.
inline GPModel fit(const Dataset& data, const FitConfig& config, FitReport* report = nullptr) {
    if (data.size() < 2) throw FitError("fit needs at least two observations");
    if (config.starts < 1) throw ConfigError("fit needs at least one start");
    const int n = data.dim();
    const auto bounds = gp_detail::log_bounds(config, n, value_scale(data));

    std::vector<Eigen::VectorXd> starts;
    if (config.warm_start && config.warm_start->lengthscales.size() == n) {
        starts.push_back(opt::project(gp_detail::to_log(*config.warm_start), bounds.lower, bounds.upper));
    } else {
        Eigen::VectorXd theta(n + 1);
        theta.head(n).setConstant(std::log(0.3));
        theta[n] = std::log(value_scale(data));
        starts.push_back(opt::project(theta, bounds.lower, bounds.upper));
    }
    const int draws = config.starts - 1;
    if (draws >= 2) {
        const auto unit = design::lhs(design::DoEConfig{draws, n + 1, 100, config.seed});
        for (const auto& u : unit)
            starts.push_back(bounds.lower.array() + u.array() * (bounds.upper - bounds.lower).array());
    } else if (draws == 1) {
        Rng rng(config.seed);
        starts.push_back(uniform_in_box(bounds.lower, bounds.upper, rng));
    }

    const opt::ValueAndGradient objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
        try {
            auto ev = evaluate_likelihood(gp_detail::from_log(theta), data, std::nullopt, config.jitter, true);
            grad = -ev.gradient;
            return -ev.value;
        } catch (const NumericalError&) {
            grad = Eigen::VectorXd::Zero(theta.size());
            return std::numeric_limits<double>::infinity();
        }
    };

    FitReport local_report;
    FitReport& rep = report ? *report : local_report;
    rep = FitReport{};
    Eigen::VectorXd best_theta;
    std::string last_failure = "no start produced a finite likelihood";
    for (std::size_t s = 0; s < starts.size(); ++s) {
        rep.start_points.push_back(gp_detail::from_log(starts[s]));
        Eigen::VectorXd g0;
        const double f0 = objective(starts[s], g0);
        rep.start_likelihoods.push_back(std::isfinite(f0) ? -f0 : -std::numeric_limits<double>::infinity());
        if (!std::isfinite(f0)) {
            rep.final_likelihoods.push_back(-std::numeric_limits<double>::infinity());
            last_failure = "start " + std::to_string(s) + " failed to factorize";
            continue;
        }
        const auto res = opt::minimize_box(objective, starts[s], bounds.lower, bounds.upper, config.optimizer);
        const double lml = std::isfinite(res.value) ? -res.value : -std::numeric_limits<double>::infinity();
        rep.final_likelihoods.push_back(lml);
        if (lml > rep.best_likelihood) {
            rep.best_likelihood = lml;
            rep.chosen_start = s;
            best_theta = res.x;
        }
    }
    if (best_theta.size() == 0) throw FitError("GP fit failed: " + last_failure);
    return GPModel::condition(data, gp_detail::from_log(best_theta), std::nullopt, config.jitter);
}

}  // namespace trego
