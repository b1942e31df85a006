#pragma once

// Independent extended-precision log marginal likelihood (Matern 5/2, constant
// trend at its GLS estimate) used as a finite-difference oracle. In double
// precision the likelihood of an ill-conditioned fitted model loses about seven
// digits, so central differences of it cannot check the analytic gradient.

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "trego/gp.hpp"

namespace reference {

using Real = long double;
using MatrixL = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using VectorL = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

/// theta = (log lengthscales, log signal variance); nugget = relative jitter.
inline Real log_marginal_likelihood(const Eigen::VectorXd& theta, const trego::Dataset& data, double nugget) {
    const int n = data.dim();
    const int t = static_cast<int>(data.size());
    VectorL ls(n);
    for (int i = 0; i < n; ++i) ls[i] = std::exp(static_cast<Real>(theta[i]));
    const Real s2 = std::exp(static_cast<Real>(theta[n]));
    MatrixL K(t, t);
    for (int a = 0; a < t; ++a)
        for (int b = 0; b < t; ++b) {
            Real r2 = 0;
            for (int i = 0; i < n; ++i) {
                const Real z = (static_cast<Real>(data.point(a)[i]) - static_cast<Real>(data.point(b)[i])) / ls[i];
                r2 += z * z;
            }
            const Real u = std::sqrt(Real{5} * r2);
            K(a, b) = s2 * (1 + u + u * u / 3) * std::exp(-u);
        }
    K.diagonal().array() += s2 * static_cast<Real>(nugget);
    const Eigen::LLT<MatrixL> llt(K);
    VectorL y(t);
    for (int i = 0; i < t; ++i) y[i] = data.value(i);
    const VectorL ones = VectorL::Ones(t);
    const VectorL k_ones = llt.solve(ones);
    const Real trend = k_ones.dot(y) / k_ones.dot(ones);
    const VectorL resid = (y.array() - trend).matrix();
    Real log_det = 0;
    for (int i = 0; i < t; ++i) log_det += 2 * std::log(llt.matrixL()(i, i));
    const Real log_two_pi = std::log(2 * 3.14159265358979323846264338327950288L);
    return -Real{0.5} * resid.dot(llt.solve(resid)) - Real{0.5} * log_det - Real{0.5} * t * log_two_pi;
}

/// Central difference of the reference likelihood along coordinate j.
inline double gradient_component(const Eigen::VectorXd& theta, const trego::Dataset& data, double nugget,
                                 Eigen::Index j, double h = 1e-4) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    return static_cast<double>((log_marginal_likelihood(tp, data, nugget) - log_marginal_likelihood(tm, data, nugget)) /
                               (2 * static_cast<Real>(h)));
}

}  // namespace reference
