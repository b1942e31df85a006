#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "trego/errors.hpp"
#include "trego/random.hpp"

namespace trego::design {

using PointSet = std::vector<Eigen::VectorXd>;

struct DoEConfig {
    int n_points = 0;
    int dim = 0;
    int improvement_iterations = 1000;
    std::uint64_t seed = 0;

    /// 2n + 4 points, the usual initial design size.
    static DoEConfig defaults_for(int dim, std::uint64_t seed) { return DoEConfig{2 * dim + 4, dim, 1000, seed}; }
};

inline int bin_of(double coordinate, int n_bins) {
    const int b = static_cast<int>(std::floor(coordinate * n_bins));
    return std::clamp(b, 0, n_bins - 1);
}

/// True when every dimension has exactly one point in each bin [j/N, (j+1)/N).
inline bool is_latin_hypercube(const PointSet& points) {
    if (points.empty()) return false;
    const int n = static_cast<int>(points.size());
    const auto dim = points.front().size();
    for (Eigen::Index d = 0; d < dim; ++d) {
        std::vector<int> count(n, 0);
        for (const auto& p : points) {
            if (p.size() != dim || p[d] < 0.0 || p[d] > 1.0) return false;
            if (++count[bin_of(p[d], n)] > 1) return false;
        }
    }
    return true;
}

struct ClosestPair {
    double distance = std::numeric_limits<double>::infinity();
    std::size_t first = 0;
    std::size_t second = 0;
};

inline ClosestPair closest_pair(const PointSet& points) {
    ClosestPair best;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const double d = (points[i] - points[j]).norm();
            if (d < best.distance) best = {d, i, j};
        }
    return best;
}

inline double min_pairwise_distance(const PointSet& points) { return closest_pair(points).distance; }

namespace detail {
inline double within_bin(int bin, int n_bins, Rng& rng) {
    double x = (bin + uniform01(rng)) / n_bins;
    if (bin_of(x, n_bins) != bin) x = (bin + 0.5) / n_bins;
    return x;
}
}  // namespace detail

/// Maximin improvement by within-bin coordinate resampling.
///
/// Each iteration picks one point of the current closest pair and one
/// dimension, redraws that coordinate uniformly inside its own bin, and keeps
/// the move only if the minimum pairwise distance strictly increases. Bin
/// occupancy is untouched, so the result is still a Latin hypercube.
inline PointSet maximin_improve(PointSet points, int iterations, std::uint64_t seed) {
    if (points.size() < 2 || iterations <= 0) return points;
    const int n = static_cast<int>(points.size());
    const auto dim = points.front().size();
    Rng rng(seed);
    ClosestPair current = closest_pair(points);
    for (int it = 0; it < iterations; ++it) {
        const std::size_t i = (uniform01(rng) < 0.5) ? current.first : current.second;
        const auto d = static_cast<Eigen::Index>(std::min<double>(std::floor(uniform01(rng) * dim), dim - 1));
        const double old = points[i][d];
        points[i][d] = detail::within_bin(bin_of(old, n), n, rng);
        const ClosestPair candidate = closest_pair(points);
        if (candidate.distance > current.distance)
            current = candidate;
        else
            points[i][d] = old;
    }
    return points;
}

/// Latin hypercube in [0,1]^dim with bin-uniform jitter, followed by maximin
/// improvement when `config.improvement_iterations > 0`.
inline PointSet lhs(const DoEConfig& config) {
    if (config.n_points < 2) throw ConfigError("design needs at least 2 points");
    if (config.dim < 1) throw ConfigError("design dimension must be positive");
    const int n = config.n_points;
    Rng rng(config.seed);
    PointSet points(n, Eigen::VectorXd(config.dim));
    std::vector<int> perm(n);
    for (int d = 0; d < config.dim; ++d) {
        std::iota(perm.begin(), perm.end(), 0);
        // Fisher-Yates with our own draws so the permutation is identical across standard libraries
        for (int j = n - 1; j > 0; --j) {
            const int k = std::min(static_cast<int>(uniform01(rng) * (j + 1)), j);
            std::swap(perm[j], perm[k]);
        }
        for (int j = 0; j < n; ++j) points[j][d] = detail::within_bin(perm[j], n, rng);
    }
    if (config.improvement_iterations > 0)
        points = maximin_improve(std::move(points), config.improvement_iterations, mix64(config.seed ^ 0x5eed));
    return points;
}

}  // namespace trego::design
