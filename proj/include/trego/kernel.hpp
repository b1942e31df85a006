#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "trego/errors.hpp"

namespace trego {

/// Anisotropic Matérn 5/2 kernel hyperparameters.
struct Hyperparameters {
    Eigen::VectorXd lengthscales;
    double signal_variance = 1.0;
};

namespace kernel_detail {
inline constexpr double kSqrt5 = 2.2360679774997896964091736687313;

/// Scaled distance r between two points.
inline double scaled_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& x2, const Eigen::VectorXd& lengthscales) {
    return ((x - x2).array() / lengthscales.array()).matrix().norm();
}

/// k(r) / s²
inline double matern52_shape(double r) {
    const double sr = kSqrt5 * r;
    return (1.0 + sr + sr * sr / 3.0) * std::exp(-sr);
}

/// -(dk/dr) / (r s²); finite at r = 0.
inline double matern52_radial_weight(double r) {
    const double sr = kSqrt5 * r;
    return (5.0 / 3.0) * (1.0 + sr) * std::exp(-sr);
}
}  // namespace kernel_detail

inline void validate(const Hyperparameters& hp, Eigen::Index dim) {
    if (hp.lengthscales.size() != dim)
        throw InvalidHyperparameterError("lengthscale count " + std::to_string(hp.lengthscales.size()) +
                                         " does not match dimension " + std::to_string(dim));
    for (Eigen::Index i = 0; i < hp.lengthscales.size(); ++i)
        if (!(hp.lengthscales[i] > 0.0) || !std::isfinite(hp.lengthscales[i]))
            throw InvalidHyperparameterError("lengthscale must be positive and finite");
    if (!(hp.signal_variance > 0.0) || !std::isfinite(hp.signal_variance))
        throw InvalidHyperparameterError("signal variance must be positive and finite");
}

/// k(x, x2) = s² (1 + √5 r + 5r²/3) exp(-√5 r), with r the lengthscale-weighted ℓ2 distance.
inline double matern52(const Eigen::VectorXd& x, const Eigen::VectorXd& x2, const Eigen::VectorXd& lengthscales,
                       double signal_variance) {
    if (x.size() != x2.size()) throw InvalidHyperparameterError("point dimensions differ");
    validate(Hyperparameters{lengthscales, signal_variance}, x.size());
    return signal_variance * kernel_detail::matern52_shape(kernel_detail::scaled_distance(x, x2, lengthscales));
}

}  // namespace trego
