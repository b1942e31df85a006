#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "trego/errors.hpp"
#include "trego/random.hpp"

namespace trego::testbed {

/// Scaled-down BBOB-style suite. Each id stands in for one function group:
/// separable (sphere, ellipsoidal, rastrigin), moderate conditioning (rosenbrock),
/// high conditioning (bent_cigar), adequate global structure (rastrigin_rotated),
/// weak global structure (bi_funnel).
enum class FunctionId { sphere, ellipsoidal, rastrigin, rosenbrock, bent_cigar, rastrigin_rotated, bi_funnel };

inline constexpr std::array<FunctionId, 7> kAllFunctions = {
    FunctionId::sphere,     FunctionId::ellipsoidal,       FunctionId::rastrigin, FunctionId::rosenbrock,
    FunctionId::bent_cigar, FunctionId::rastrigin_rotated, FunctionId::bi_funnel};

inline std::string_view to_string(FunctionId id) {
    switch (id) {
        case FunctionId::sphere: return "sphere";
        case FunctionId::ellipsoidal: return "ellipsoidal";
        case FunctionId::rastrigin: return "rastrigin";
        case FunctionId::rosenbrock: return "rosenbrock";
        case FunctionId::bent_cigar: return "bent_cigar";
        case FunctionId::rastrigin_rotated: return "rastrigin_rotated";
        case FunctionId::bi_funnel: return "bi_funnel";
    }
    return "unknown";
}

inline FunctionId parse_function(std::string_view name) {
    for (auto id : kAllFunctions)
        if (to_string(id) == name) return id;
    throw ConfigError("unknown testbed function '" + std::string(name) + "'");
}

inline bool is_rotated(FunctionId id) {
    return id == FunctionId::bent_cigar || id == FunctionId::rastrigin_rotated || id == FunctionId::bi_funnel;
}

/// Function group, 1..5.
inline int group_of(FunctionId id) {
    switch (id) {
        case FunctionId::sphere:
        case FunctionId::ellipsoidal:
        case FunctionId::rastrigin: return 1;
        case FunctionId::rosenbrock: return 2;
        case FunctionId::bent_cigar: return 3;
        case FunctionId::rastrigin_rotated: return 4;
        case FunctionId::bi_funnel: return 5;
    }
    return 0;
}

inline std::string group_name(int group) {
    static const std::array<std::string, 6> names = {
        "unknown", "separable", "moderate_conditioning", "high_conditioning", "multimodal_adequate",
        "multimodal_weak"};
    return (group >= 1 && group <= 5) ? names[group] : names[0];
}

struct Problem {
    static constexpr double kLower = -5.0;
    static constexpr double kUpper = 5.0;

    FunctionId function_id = FunctionId::sphere;
    int dim = 2;
    Eigen::MatrixXd rotation;
    Eigen::VectorXd shift;  // location of the optimum in the native box
    double f_opt = 0.0;
    std::uint64_t instance_seed = 0;
};

/// Builds a problem from explicit parts; checks orthogonality and the shift range.
inline Problem make_problem(FunctionId id, int dim, Eigen::MatrixXd rotation, Eigen::VectorXd shift, double f_opt,
                            std::uint64_t instance_seed = 0) {
    if (dim < 1) throw ConfigError("problem dimension must be positive");
    if (rotation.rows() != dim || rotation.cols() != dim || shift.size() != dim)
        throw ConfigError("problem parts have inconsistent dimensions");
    const double err = (rotation.transpose() * rotation - Eigen::MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff();
    if (err > 1e-10) throw ConfigError("rotation is not orthogonal");
    if ((shift.array() < Problem::kLower).any() || (shift.array() > Problem::kUpper).any())
        throw ConfigError("optimum lies outside the native box");
    return Problem{id, dim, std::move(rotation), std::move(shift), f_opt, instance_seed};
}

inline Eigen::MatrixXd random_rotation(int dim, Rng& rng) {
    Eigen::MatrixXd g(dim, dim);
    for (int j = 0; j < dim; ++j)
        for (int i = 0; i < dim; ++i) g(i, j) = standard_normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < dim; ++j)
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    return q;
}

/// Randomized instance: seeded rotation (rotated functions only), shift uniform
/// in [-4, 4]^n and an offset f_opt rounded to two decimals in [-100, 100].
inline Problem instantiate(FunctionId id, int dim, std::uint64_t instance_seed) {
    if (dim < 2) throw ConfigError("testbed problems need dim >= 2");
    Rng rng(derive_seed(instance_seed, {static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(dim)}));
    Eigen::MatrixXd rotation =
        is_rotated(id) ? random_rotation(dim, rng) : Eigen::MatrixXd::Identity(dim, dim).eval();
    Eigen::VectorXd shift(dim);
    for (int i = 0; i < dim; ++i) shift[i] = -4.0 + 8.0 * uniform01(rng);
    const double f_opt = std::round((-100.0 + 200.0 * uniform01(rng)) * 100.0) / 100.0;
    return make_problem(id, dim, std::move(rotation), std::move(shift), f_opt, instance_seed);
}

namespace detail {
inline constexpr double kTwoPi = 6.283185307179586476925;

inline double raw_value(FunctionId id, const Eigen::VectorXd& z) {
    const auto n = static_cast<double>(z.size());
    switch (id) {
        case FunctionId::sphere: return z.squaredNorm();
        case FunctionId::ellipsoidal: {
            double s = 0.0;
            for (Eigen::Index i = 0; i < z.size(); ++i)
                s += std::pow(10.0, 6.0 * static_cast<double>(i) / (n - 1.0)) * z[i] * z[i];
            return s;
        }
        case FunctionId::rastrigin:
        case FunctionId::rastrigin_rotated: {
            double s = 10.0 * n;
            for (Eigen::Index i = 0; i < z.size(); ++i) s += z[i] * z[i] - 10.0 * std::cos(kTwoPi * z[i]);
            return std::max(s, 0.0);
        }
        case FunctionId::rosenbrock: {
            // optimum at z = 0 after the +1 offset
            double s = 0.0;
            for (Eigen::Index i = 0; i + 1 < z.size(); ++i) {
                const double a = z[i] + 1.0, b = z[i + 1] + 1.0;
                s += 100.0 * (a * a - b) * (a * a - b) + (a - 1.0) * (a - 1.0);
            }
            return s;
        }
        case FunctionId::bent_cigar: return z[0] * z[0] + 1e6 * (z.squaredNorm() - z[0] * z[0]);
        case FunctionId::bi_funnel: {
            // Lunacek-style double funnel with a Rastrigin overlay
            const double mu0 = 2.5;
            const double s = 1.0 - 1.0 / (2.0 * std::sqrt(n + 20.0) - 8.2);
            const double mu1 = -std::sqrt((mu0 * mu0 - 1.0) / s);
            double first = 0.0, second = 0.0, cosines = 0.0;
            for (Eigen::Index i = 0; i < z.size(); ++i) {
                first += z[i] * z[i];
                second += (z[i] + mu0 - mu1) * (z[i] + mu0 - mu1);
                cosines += std::cos(kTwoPi * z[i]);
            }
            return std::min(first, n + s * second) + std::max(0.0, 10.0 * (n - cosines));
        }
    }
    return 0.0;
}
}  // namespace detail

/// Objective value at a native-box point. Throws DomainError outside [-5, 5]^n.
inline double evaluate(const Problem& problem, const Eigen::VectorXd& x) {
    if (x.size() != problem.dim) throw DomainError("point dimension does not match problem");
    if ((x.array() < Problem::kLower).any() || (x.array() > Problem::kUpper).any() || !x.allFinite())
        throw DomainError("point outside the native box [-5, 5]^n");
    const Eigen::VectorXd z = problem.rotation * (x - problem.shift);
    return problem.f_opt + detail::raw_value(problem.function_id, z);
}

/// Maps u in [0,1]^n to the native box.
inline Eigen::VectorXd to_native(const Eigen::VectorXd& u) {
    return (Problem::kLower + (Problem::kUpper - Problem::kLower) * u.array()).matrix();
}

inline Eigen::VectorXd to_unit(const Eigen::VectorXd& x) {
    return ((x.array() - Problem::kLower) / (Problem::kUpper - Problem::kLower)).matrix();
}

struct TargetLadder {
    std::vector<double> targets;
    std::string derivation = "precision";
};

inline const std::vector<double>& default_precisions() {
    static const std::vector<double> p = {1e1, 1e0, 1e-1, 1e-2, 1e-3};
    return p;
}

/// Targets f_opt + precision for each precision, in decreasing order.
inline TargetLadder targets(const Problem& problem, const std::vector<double>& precisions = default_precisions()) {
    if (precisions.empty()) throw ConfigError("empty precision ladder");
    for (std::size_t i = 0; i < precisions.size(); ++i) {
        if (!(precisions[i] > 0.0)) throw ConfigError("precisions must be positive");
        if (i > 0 && !(precisions[i] < precisions[i - 1])) throw ConfigError("precisions must strictly decrease");
    }
    TargetLadder ladder;
    for (double p : precisions) ladder.targets.push_back(problem.f_opt + p);
    return ladder;
}

inline nlohmann::json to_json(const Problem& p) {
    nlohmann::json rot = nlohmann::json::array();
    for (int i = 0; i < p.dim; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < p.dim; ++j) row.push_back(p.rotation(i, j));
        rot.push_back(row);
    }
    return {{"function", std::string(to_string(p.function_id))},
            {"dim", p.dim},
            {"group", group_of(p.function_id)},
            {"rotation", rot},
            {"shift", std::vector<double>(p.shift.data(), p.shift.data() + p.shift.size())},
            {"f_opt", p.f_opt},
            {"instance_seed", p.instance_seed}};
}

/// Text digest covering every field, for determinism checks.
inline std::string digest(const Problem& p) { return to_json(p).dump(); }

}  // namespace trego::testbed
