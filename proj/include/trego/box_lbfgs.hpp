#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>

#include <Eigen/Core>

namespace trego::opt {

/// Objective for the minimizer: returns f(x) and writes the gradient into `grad`.
/// A non-finite return value marks x as infeasible; the line search backs off.
using ValueAndGradient = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsSettings {
    int max_iterations = 100;
    int memory = 6;
    double gradient_tolerance = 1e-8;   // on the projected gradient, inf-norm
    double relative_f_tolerance = 1e-12;
    int max_line_search_steps = 30;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

inline Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    return x.cwiseMax(lower).cwiseMin(upper);
}

/// Projected L-BFGS for min f(x) s.t. lower <= x <= upper.
///
/// Variables sitting on a bound whose gradient points outward are frozen for the
/// step; the two-loop recursion runs on the remaining free coordinates and the
/// step is projected back onto the box with Armijo backtracking along the
/// projection arc. Good enough for the smooth, low-dimensional problems here
/// (hyperparameters and acquisition functions), not a general L-BFGS-B.
inline LbfgsResult minimize_box(const ValueAndGradient& fn, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                                const Eigen::VectorXd& upper, const LbfgsSettings& settings = {}) {
    const Eigen::Index n = x0.size();
    LbfgsResult result;
    Eigen::VectorXd x = project(x0, lower, upper);
    Eigen::VectorXd g(n);
    double f = fn(x, g);
    result.x = x;
    result.value = f;
    if (!std::isfinite(f) || !g.allFinite()) return result;

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    auto projected_gradient_norm = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& gg) {
        return (project(xx - gg, lower, upper) - xx).lpNorm<Eigen::Infinity>();
    };

    for (int iter = 0; iter < settings.max_iterations; ++iter) {
        result.iterations = iter;
        if (projected_gradient_norm(x, g) <= settings.gradient_tolerance) {
            result.converged = true;
            break;
        }

        Eigen::Array<bool, Eigen::Dynamic, 1> free(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool at_lower = x[i] <= lower[i] && g[i] > 0.0;
            const bool at_upper = x[i] >= upper[i] && g[i] < 0.0;
            free[i] = !(at_lower || at_upper);
        }
        auto mask = [&](Eigen::VectorXd v) {
            for (Eigen::Index i = 0; i < n; ++i)
                if (!free[i]) v[i] = 0.0;
            return v;
        };

        // two-loop recursion on the free subspace
        Eigen::VectorXd q = mask(g);
        const std::size_t m = s_hist.size();
        std::vector<double> alpha(m);
        for (std::size_t j = m; j-- > 0;) {
            alpha[j] = rho_hist[j] * mask(s_hist[j]).dot(q);
            q -= alpha[j] * mask(y_hist[j]);
        }
        if (m > 0) {
            const Eigen::VectorXd sm = mask(s_hist.back()), ym = mask(y_hist.back());
            const double yy = ym.squaredNorm();
            if (yy > 0.0 && sm.dot(ym) > 0.0) q *= sm.dot(ym) / yy;
        }
        for (std::size_t j = 0; j < m; ++j) {
            const double beta = rho_hist[j] * mask(y_hist[j]).dot(q);
            q += (alpha[j] - beta) * mask(s_hist[j]);
        }
        Eigen::VectorXd d = -q;
        if (!(d.dot(g) < 0.0)) {
            d = -mask(g);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        double step = 1.0;
        if (s_hist.empty()) {
            const double dn = d.lpNorm<Eigen::Infinity>();
            if (dn > 0.0) step = std::min(1.0, 0.1 * (upper - lower).maxCoeff() / dn);
        }

        Eigen::VectorXd x_new(n), g_new(n);
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < settings.max_line_search_steps; ++ls) {
            x_new = project(x + step * d, lower, upper);
            const double decrease = g.dot(x_new - x);
            if (decrease >= 0.0 && (x_new - x).squaredNorm() == 0.0) break;
            f_new = fn(x_new, g_new);
            if (std::isfinite(f_new) && g_new.allFinite() && f_new <= f + 1e-4 * std::min(decrease, 0.0)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * std::max(1.0, y.squaredNorm())) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > settings.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        const double f_old = f;
        x = x_new;
        g = g_new;
        f = f_new;
        result.x = x;
        result.value = f;
        result.iterations = iter + 1;
        if (std::abs(f_old - f) <= settings.relative_f_tolerance * std::max({std::abs(f_old), std::abs(f), 1e-300})) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace trego::opt
