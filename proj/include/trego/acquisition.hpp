#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "trego/box_lbfgs.hpp"
#include "trego/errors.hpp"
#include "trego/gp.hpp"
#include "trego/random.hpp"

namespace trego {

enum class Norm { linf, l1, l2 };

inline double norm_of(const Eigen::VectorXd& v, Norm norm) {
    switch (norm) {
        case Norm::l1: return v.lpNorm<1>();
        case Norm::l2: return v.norm();
        case Norm::linf: return v.lpNorm<Eigen::Infinity>();
    }
    return v.norm();
}

/// Feasible set for acquisition maximization:
///   {x in [lower, upper] ∩ [0,1]^n : exclusion_radius <= ‖x - center‖ <= outer_radius}.
/// Without a center the region is the plain box.
struct Region {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    std::optional<Eigen::VectorXd> center;
    double exclusion_radius = 0.0;
    double outer_radius = std::numeric_limits<double>::infinity();
    Norm norm = Norm::linf;

    static Region unit_cube(int dim) {
        return Region{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim), std::nullopt, 0.0,
                      std::numeric_limits<double>::infinity(), Norm::linf};
    }

    int dim() const { return static_cast<int>(lower.size()); }

    double distance_to_center(const Eigen::VectorXd& x) const { return center ? norm_of(x - *center, norm) : 0.0; }

    bool contains(const Eigen::VectorXd& x, double tol = 1e-12) const {
        if (x.size() != lower.size()) return false;
        if ((x.array() < lower.array().max(0.0) - tol).any()) return false;
        if ((x.array() > upper.array().min(1.0) + tol).any()) return false;
        if (!center) return true;
        const double d = distance_to_center(x);
        return d >= exclusion_radius * (1.0 - 1e-12) - tol && d <= outer_radius * (1.0 + 1e-12) + tol;
    }
};

// ---------------------------------------------------------------------------
// Expected improvement

namespace acq_detail {
inline constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;
inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline constexpr double kMinSd = 1e-150;
}  // namespace acq_detail

/// EI(x) = (f_min - μ) Φ(z) + s φ(z), z = (f_min - μ) / s, for minimization.
/// Zero variance falls back to the deterministic limit max(f_min - μ, 0).
inline double expected_improvement(double mean, double variance, double f_min) {
    const double sd = std::sqrt(std::max(variance, 0.0));
    const double diff = f_min - mean;
    if (sd < acq_detail::kMinSd) return std::max(diff, 0.0);
    const double z = diff / sd;
    return std::max(0.0, diff * acq_detail::normal_cdf(z) + sd * acq_detail::normal_pdf(z));
}

enum class AcquisitionKind { expected_improvement, posterior_mean, lower_confidence_bound };

struct AcqConfig {
    AcquisitionKind kind = AcquisitionKind::expected_improvement;
    double lcb_kappa = 2.0;
    int starts_per_dim = 10;
    opt::LbfgsSettings optimizer{.max_iterations = 100, .memory = 6, .gradient_tolerance = 1e-8,
                                 .relative_f_tolerance = 1e-12, .max_line_search_steps = 30};
};

/// Acquisition value (larger is better) and its gradient with respect to x.
struct AcquisitionValue {
    double value = 0.0;
    Eigen::VectorXd gradient;
};

inline AcquisitionValue acquisition_with_gradient(const GPModel& model, const Eigen::VectorXd& x, double f_min,
                                                  const AcqConfig& config) {
    const auto pg = model.posterior_with_gradient(x);
    const double var = pg.value.variance;
    const double sd = std::sqrt(var);
    Eigen::VectorXd sd_grad = Eigen::VectorXd::Zero(x.size());
    if (sd >= acq_detail::kMinSd) sd_grad = pg.variance_gradient / (2.0 * sd);

    AcquisitionValue out;
    switch (config.kind) {
        case AcquisitionKind::expected_improvement: {
            const double diff = f_min - pg.value.mean;
            if (sd < acq_detail::kMinSd) {
                out.value = std::max(diff, 0.0);
                out.gradient = diff > 0.0 ? Eigen::VectorXd(-pg.mean_gradient) : Eigen::VectorXd::Zero(x.size());
            } else {
                const double z = diff / sd;
                const double cdf = acq_detail::normal_cdf(z);
                const double pdf = acq_detail::normal_pdf(z);
                out.value = std::max(0.0, diff * cdf + sd * pdf);
                out.gradient = -cdf * pg.mean_gradient + pdf * sd_grad;
            }
            break;
        }
        case AcquisitionKind::posterior_mean:
            out.value = -pg.value.mean;
            out.gradient = -pg.mean_gradient;
            break;
        case AcquisitionKind::lower_confidence_bound:
            out.value = -(pg.value.mean - config.lcb_kappa * sd);
            out.gradient = -pg.mean_gradient + config.lcb_kappa * sd_grad;
            break;
    }
    return out;
}

inline double acquisition_value(const GPModel& model, const Eigen::VectorXd& x, double f_min,
                                const AcqConfig& config) {
    if (config.kind == AcquisitionKind::expected_improvement) {
        const auto p = model.posterior(x);
        return expected_improvement(p.mean, p.variance, f_min);
    }
    return acquisition_with_gradient(model, x, f_min, config).value;
}

// ---------------------------------------------------------------------------
// Maximization

struct AcquisitionResult {
    Eigen::VectorXd x;
    double value = -std::numeric_limits<double>::infinity();
    /// Acquisition value at each start after its local ascent and region repair.
    std::vector<double> start_values;
    std::size_t chosen_start = 0;
    bool replaced_duplicate = false;
};

namespace acq_detail {

struct ClippedRegion {
    Eigen::VectorXd lower, upper;
};

inline ClippedRegion clip_to_cube(const Region& region) {
    if (region.lower.size() != region.upper.size() || region.lower.size() == 0)
        throw GeometryError("region bounds have inconsistent dimensions");
    if ((region.lower.array() > region.upper.array()).any()) throw GeometryError("region lower bound exceeds upper");
    ClippedRegion c{region.lower.cwiseMax(0.0), region.upper.cwiseMin(1.0)};
    if ((c.lower.array() > c.upper.array()).any()) throw GeometryError("region does not intersect the unit cube");
    return c;
}

inline double farthest_corner_distance(const ClippedRegion& box, const Eigen::VectorXd& center, Norm norm) {
    Eigen::VectorXd far(center.size());
    for (Eigen::Index i = 0; i < center.size(); ++i)
        far[i] = std::max(std::abs(box.lower[i] - center[i]), std::abs(box.upper[i] - center[i]));
    return norm_of(far, norm);
}

/// Pulls x into the outer ball, then pushes it out of the exclusion ball.
/// Returns nullopt when no repair inside the box succeeds.
inline std::optional<Eigen::VectorXd> repair(Eigen::VectorXd x, const Region& region, const ClippedRegion& box) {
    if (!region.center) return x;
    const Eigen::VectorXd& c = *region.center;
    double d = norm_of(x - c, region.norm);
    if (std::isfinite(region.outer_radius) && d > region.outer_radius) {
        x = c + (x - c) * (region.outer_radius / d);
        x = opt::project(x, box.lower, box.upper);
        d = norm_of(x - c, region.norm);
    }
    if (d >= region.exclusion_radius) return x;

    auto feasible = [&](const Eigen::VectorXd& y) { return region.contains(y, 0.0); };
    if (d > 0.0) {
        Eigen::VectorXd y = opt::project(c + (x - c) * (region.exclusion_radius / d), box.lower, box.upper);
        if (feasible(y)) return y;
    }
    for (Eigen::Index i = 0; i < x.size(); ++i)
        for (double sign : {1.0, -1.0}) {
            Eigen::VectorXd y = c;
            y[i] += sign * region.exclusion_radius;
            if (feasible(y)) return y;
        }
    // farthest corner of the box; feasible whenever the region is
    Eigen::VectorXd corner(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
        corner[i] = std::abs(box.lower[i] - c[i]) > std::abs(box.upper[i] - c[i]) ? box.lower[i] : box.upper[i];
    if (feasible(corner)) return corner;
    return std::nullopt;
}

inline std::optional<Eigen::VectorXd> random_point(const Region& region, const ClippedRegion& box, Rng& rng) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Eigen::VectorXd x = uniform_in_box(box.lower, box.upper, rng);
        if (region.contains(x, 0.0)) return x;
    }
    return std::nullopt;
}

}  // namespace acq_detail

/// Checks region invariants; throws GeometryError when the feasible set is empty.
inline void validate(const Region& region) {
    const auto box = acq_detail::clip_to_cube(region);
    if (!region.center) return;
    if (region.center->size() != region.lower.size()) throw GeometryError("region center dimension mismatch");
    if (region.exclusion_radius < 0.0) throw GeometryError("negative exclusion radius");
    if (region.exclusion_radius > region.outer_radius) throw GeometryError("exclusion radius exceeds outer radius");
    if (region.exclusion_radius > 0.0 &&
        !(region.exclusion_radius < acq_detail::farthest_corner_distance(box, *region.center, region.norm)))
        throw GeometryError("exclusion ball covers the whole region");
}

/// Multi-start projected quasi-Newton maximization of the acquisition over a region.
///
/// Starts are `starts_per_dim * n` uniform draws in the box plus the region
/// center. Each is refined on the box, then moved into the annulus if needed.
/// The best start wins (ties: lowest index). If the winner lies within the
/// duplicate tolerance of a point in `avoid` (or the model's training set), it
/// is replaced by a uniform random feasible point.
inline AcquisitionResult maximize_acquisition(const GPModel& model, double f_min, const Region& region,
                                              const AcqConfig& config, std::uint64_t seed,
                                              const Dataset* avoid = nullptr) {
    if (!model.fitted()) throw StateError("acquisition needs a fitted model");
    if (region.dim() != model.dim()) throw GeometryError("region dimension does not match model");
    validate(region);
    const auto box = acq_detail::clip_to_cube(region);
    const int n = region.dim();
    Rng rng(seed);

    std::vector<Eigen::VectorXd> starts;
    const int draws = std::max(1, config.starts_per_dim * n);
    starts.reserve(draws + 1);
    for (int i = 0; i < draws; ++i) starts.push_back(uniform_in_box(box.lower, box.upper, rng));
    if (region.center) starts.push_back(opt::project(*region.center, box.lower, box.upper));

    const opt::ValueAndGradient neg_acq = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        auto a = acquisition_with_gradient(model, x, f_min, config);
        grad = -a.gradient;
        return -a.value;
    };

    AcquisitionResult result;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        const auto local = opt::minimize_box(neg_acq, starts[s], box.lower, box.upper, config.optimizer);
        const auto repaired = acq_detail::repair(local.x, region, box);
        if (!repaired) {
            result.start_values.push_back(-std::numeric_limits<double>::infinity());
            continue;
        }
        const double v = acquisition_value(model, *repaired, f_min, config);
        result.start_values.push_back(v);
        if (v > result.value || result.x.size() == 0) {
            result.value = v;
            result.x = *repaired;
            result.chosen_start = s;
        }
    }
    if (result.x.size() == 0) throw GeometryError("no feasible point found in region");

    const Dataset& existing = avoid ? *avoid : model.training_data();
    if (existing.has_near(result.x) || (avoid && model.training_data().has_near(result.x))) {
        if (auto alt = acq_detail::random_point(region, box, rng)) {
            result.x = *alt;
            result.value = acquisition_value(model, result.x, f_min, config);
            result.replaced_duplicate = true;
        }
    }
    return result;
}

inline Eigen::VectorXd maximize(const GPModel& model, double f_min, const Region& region, const AcqConfig& config,
                                std::uint64_t seed, const Dataset* avoid = nullptr) {
    return maximize_acquisition(model, f_min, region, config, seed, avoid).x;
}

}  // namespace trego
