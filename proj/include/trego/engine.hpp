#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "trego/acquisition.hpp"
#include "trego/errors.hpp"
#include "trego/gp.hpp"
#include "trego/random.hpp"

namespace trego {

/// Forcing function ρ(σ) = c σ^q, c > 0, q >= 1.
struct ForcingSpec {
    double c = 1.0;
    double q = 2.0;
};

inline void validate(const ForcingSpec& spec) {
    if (!(spec.c > 0.0)) throw ConfigError("forcing constant c must be positive");
    if (!(spec.q >= 1.0)) throw ConfigError("forcing exponent q must be >= 1");
}

inline double forcing(double sigma, const ForcingSpec& spec = {}) {
    validate(spec);
    if (sigma < 0.0) throw ConfigError("forcing needs sigma >= 0");
    return spec.c * std::pow(sigma, spec.q);
}

enum class Mode { trego, ego };
enum class LocalModel { shared, local };

struct TregoConfig {
    double beta = 0.9;
    double gamma = 1.0 / 0.9;
    double sigma0 = 0.5;
    double d_min = 1e-6;
    double d_max = 1.0;
    int global_steps = 1;  // G
    int local_steps = 1;   // L
    ForcingSpec forcing;
    Norm tr_norm = Norm::linf;
    LocalModel local_model = LocalModel::shared;
    AcquisitionKind local_acquisition = AcquisitionKind::expected_improvement;
    int budget = 0;
    Mode mode = Mode::trego;
    FitConfig fit;
    AcqConfig acquisition;

    /// σ0 = ½ (1/5)^{1/n}: an initial ℓ∞ trust region covering 20% of the unit cube.
    static double default_sigma0(int dim) { return 0.5 * std::pow(0.2, 1.0 / dim); }

    static TregoConfig defaults(int dim, int budget) {
        TregoConfig c;
        c.sigma0 = default_sigma0(dim);
        c.budget = budget;
        return c;
    }

    void validate() const {
        if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
        if (!(gamma > 1.0)) throw ConfigError("gamma must exceed 1");
        if (!(sigma0 > 0.0)) throw ConfigError("sigma0 must be positive");
        if (!(d_min > 0.0 && d_max > d_min)) throw ConfigError("need 0 < d_min < d_max");
        if (global_steps < 0) throw ConfigError("G must be >= 0");
        if (local_steps < 1) throw ConfigError("L must be >= 1");
        if (mode == Mode::ego && global_steps < 1) throw ConfigError("EGO mode needs G >= 1");
        if (budget < 1) throw ConfigError("budget must be positive");
        trego::validate(forcing);
    }
};

inline std::string_view to_string(Mode m) { return m == Mode::ego ? "ego" : "trego"; }
inline std::string_view to_string(LocalModel m) { return m == LocalModel::local ? "local" : "shared"; }
inline std::string_view to_string(Norm n) {
    switch (n) {
        case Norm::l1: return "l1";
        case Norm::l2: return "l2";
        case Norm::linf: return "linf";
    }
    return "linf";
}
inline std::string_view to_string(AcquisitionKind k) {
    switch (k) {
        case AcquisitionKind::expected_improvement: return "ei";
        case AcquisitionKind::posterior_mean: return "mean";
        case AcquisitionKind::lower_confidence_bound: return "lcb";
    }
    return "ei";
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"trego", "gl1-10", "gl1-4",    "gl4-1", "gl10-1", "smV0",
                                                   "lgV0",  "fstC",   "fstCsmV0", "locGP", "ego"};
    return names;
}

/// Named solver variants. Unlisted parameters keep the TREGO defaults; γ stays 1/β.
inline TregoConfig preset(std::string_view name, int dim, int budget) {
    TregoConfig c = TregoConfig::defaults(dim, budget);
    const double small_sigma0 = 0.5 * std::pow(0.1, 1.0 / dim);
    const double large_sigma0 = 0.5 * std::pow(0.4, 1.0 / dim);
    auto ratio = [&](int g, int l) {
        c.global_steps = g;
        c.local_steps = l;
    };
    if (name == "trego") {
    } else if (name == "gl1-10") {
        ratio(1, 10);
    } else if (name == "gl1-4") {
        ratio(1, 4);
    } else if (name == "gl4-1") {
        ratio(4, 1);
    } else if (name == "gl10-1") {
        ratio(10, 1);
    } else if (name == "smV0") {
        c.sigma0 = small_sigma0;
    } else if (name == "lgV0") {
        c.sigma0 = large_sigma0;
    } else if (name == "fstC") {
        c.beta = 0.5;
        c.gamma = 1.0 / c.beta;
    } else if (name == "fstCsmV0") {
        c.beta = 0.5;
        c.gamma = 1.0 / c.beta;
        c.sigma0 = small_sigma0;
    } else if (name == "locGP") {
        c.local_model = LocalModel::local;
    } else if (name == "ego") {
        c.mode = Mode::ego;
    } else {
        throw ConfigError("unknown solver preset '" + std::string(name) + "'");
    }
    return c;
}

/// Ω_k = {x in [0,1]^n : d_min σ <= ‖x - x*‖ <= d_max σ}, as a Region whose box
/// is the bounding box of the outer ball clipped to the unit cube.
inline Region trust_region(const Eigen::VectorXd& x_star, double sigma, const TregoConfig& config) {
    if (!(sigma > 0.0)) throw GeometryError("trust region needs sigma > 0");
    if ((x_star.array() < 0.0).any() || (x_star.array() > 1.0).any())
        throw GeometryError("trust-region center outside the unit cube");
    const double half = config.d_max * sigma;
    Region r;
    r.lower = (x_star.array() - half).max(0.0).matrix();
    r.upper = (x_star.array() + half).min(1.0).matrix();
    r.center = x_star;
    r.exclusion_radius = config.d_min * sigma;
    r.outer_radius = half;
    r.norm = config.tr_norm;
    return r;
}

/// f_candidate <= f_star - ρ(σ); the inequality is not strict.
inline bool sufficient_decrease(double f_candidate, double f_star, double sigma, const ForcingSpec& spec = {}) {
    return f_candidate <= f_star - forcing(sigma, spec);
}

inline double update_sigma(double sigma, bool success, const TregoConfig& config) {
    return success ? config.gamma * sigma : config.beta * sigma;
}

// ---------------------------------------------------------------------------
// Run records

enum class Phase { init, global, local, random };

inline std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::init: return "init";
        case Phase::global: return "global";
        case Phase::local: return "local";
        case Phase::random: return "random";
    }
    return "init";
}

inline Phase parse_phase(std::string_view s) {
    for (auto p : {Phase::init, Phase::global, Phase::local, Phase::random})
        if (to_string(p) == s) return p;
    throw ConfigError("unknown phase '" + std::string(s) + "'");
}

struct ModelDigest {
    Eigen::VectorXd lengthscales;
    double signal_variance = 0.0;
    double trend = 0.0;
    double jitter = 0.0;
};

/// One objective evaluation.
struct RunRow {
    int t = 0;  // 1-based evaluation index
    int k = 0;
    Phase phase = Phase::init;
    Eigen::VectorXd x;  // unit-cube coordinates
    double f = 0.0;
    double sigma = 0.0;  // σ_k at proposal time
    bool success = false;  // set on the row that closed a successful phase
    std::optional<ModelDigest> model;
};

/// One pass of the outer loop (one value of k).
struct IterationRecord {
    int k = 0;
    double sigma = 0.0;        // σ_k
    double f_star = 0.0;       // f(x*_k)
    int incumbent_t = 0;       // row index (t) of x*_k
    bool success = false;
    Phase decided_in = Phase::global;
    int t_end = 0;             // evaluation count when the test was made
};

struct RunRecord {
    int dim = 0;
    std::uint64_t seed = 0;
    TregoConfig config;
    std::vector<RunRow> rows;
    std::vector<IterationRecord> iterations;
    double final_sigma = 0.0;
    double final_f_star = 0.0;
    int final_incumbent_t = 0;
    bool aborted = false;
    std::string abort_reason;

    /// Best value seen after each evaluation.
    std::vector<double> best_so_far() const {
        std::vector<double> out;
        out.reserve(rows.size());
        double best = std::numeric_limits<double>::infinity();
        for (const auto& r : rows) out.push_back(best = std::min(best, r.f));
        return out;
    }
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Read-only view handed to a custom local step.
struct LocalStepContext {
    const Dataset& data;
    const Eigen::VectorXd& x_star;
    double f_star;
    double sigma;
    const Region& region;
    std::uint64_t seed;
};

/// Extension point for a non-Bayesian local step. When set, it replaces the
/// local acquisition maximization; its proposal must lie in the region.
using LocalStep = std::function<Eigen::VectorXd(const LocalStepContext&)>;

struct RunHooks {
    LocalStep local_step;
};

namespace engine_detail {

inline ModelDigest digest_of(const GPModel& m) {
    return ModelDigest{m.hyperparameters().lengthscales, m.hyperparameters().signal_variance, m.trend(), m.jitter()};
}

/// Dataset points inside the trust region, padded with the points nearest to
/// the center until at least 2n + 1 are used.
inline Dataset local_subset(const Dataset& data, const Region& region) {
    const int n = data.dim();
    const std::size_t want = std::min<std::size_t>(data.size(), static_cast<std::size_t>(2 * n + 1));
    std::vector<std::size_t> inside, outside;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& p = data.point(i);
        const bool in_box = ((p.array() >= region.lower.array()) && (p.array() <= region.upper.array())).all();
        const bool in_ball = region.distance_to_center(p) <= region.outer_radius * (1.0 + 1e-12);
        (in_box && in_ball ? inside : outside).push_back(i);
    }
    if (inside.size() < want) {
        const Eigen::VectorXd& c = *region.center;
        std::stable_sort(outside.begin(), outside.end(), [&](std::size_t a, std::size_t b) {
            return (data.point(a) - c).norm() < (data.point(b) - c).norm();
        });
        inside.insert(inside.end(), outside.begin(),
                      outside.begin() + static_cast<std::ptrdiff_t>(want - inside.size()));
        std::sort(inside.begin(), inside.end());
    }
    Dataset sub(n);
    for (auto i : inside) sub.add(data.point(i), data.value(i), true);
    return sub;
}

class NonFiniteObjective : public Error {
public:
    using Error::Error;
};

}  // namespace engine_detail

/// Runs TREGO (or EGO) from an evaluated-on-the-fly initial design.
///
/// Each outer iteration k performs G global acquisitions over the unit cube,
/// then tests the best point of the whole dataset against f(x*_k) - ρ(σ_k).
/// On success the local phase is skipped; otherwise L acquisitions over the
/// trust region follow and the same test decides the iteration. σ moves by
/// γ or β accordingly. EGO mode never enters the local phase; σ is still
/// tracked but never used for proposals. The run stops as soon as `budget`
/// evaluations (design included) are spent, possibly mid-phase.
inline RunRecord run(const Objective& objective, const TregoConfig& config, const std::vector<Eigen::VectorXd>& doe,
                     std::uint64_t seed, const RunHooks& hooks = {}) {
    config.validate();
    if (doe.empty()) throw ConfigError("initial design is empty");
    if (config.budget <= static_cast<int>(doe.size())) throw ConfigError("budget must exceed the design size");
    const int n = static_cast<int>(doe.front().size());

    RunRecord rec;
    rec.dim = n;
    rec.seed = seed;
    rec.config = config;
    Dataset data(n);

    std::optional<Hyperparameters> warm_global, warm_local;
    int k = 0;
    double sigma = config.sigma0;

    auto evaluate = [&](const Eigen::VectorXd& x, Phase phase, std::optional<ModelDigest> model) {
        const double f = objective(x);
        if (!std::isfinite(f))
            throw engine_detail::NonFiniteObjective("objective returned a non-finite value at evaluation " +
                                                    std::to_string(data.size() + 1));
        data.add(x, f, true);
        RunRow row;
        row.t = static_cast<int>(data.size());
        row.k = k;
        row.phase = phase;
        row.x = x;
        row.f = f;
        row.sigma = sigma;
        row.model = std::move(model);
        rec.rows.push_back(std::move(row));
    };

    std::size_t incumbent = 0;
    try {
        for (const auto& x : doe) {
            if (x.size() != n) throw ConfigError("design points have inconsistent dimensions");
            evaluate(x, Phase::init, std::nullopt);
        }
        incumbent = data.argmin();

        auto fit_model = [&](const Dataset& d, std::optional<Hyperparameters>& warm, std::uint64_t salt) {
            FitConfig fc = config.fit;
            fc.warm_start = warm;
            fc.seed = derive_seed(seed, {0xf17ULL, salt, data.size()});
            GPModel m = fit(d, fc);
            warm = m.hyperparameters();
            return m;
        };

        auto propose_global = [&] {
            const GPModel model = fit_model(data, warm_global, 0);
            const double f_min = data.value(data.argmin());
            AcqConfig ac = config.acquisition;
            ac.kind = AcquisitionKind::expected_improvement;
            const Eigen::VectorXd x = maximize(model, f_min, Region::unit_cube(n), ac,
                                               derive_seed(seed, {0xa11ULL, data.size()}), &data);
            evaluate(x, Phase::global, engine_detail::digest_of(model));
        };

        auto propose_local = [&] {
            const Eigen::VectorXd& x_star = data.point(incumbent);
            const Region region = trust_region(x_star, sigma, config);
            const std::uint64_t step_seed = derive_seed(seed, {0x10caULL, data.size()});
            if (hooks.local_step) {
                const LocalStepContext ctx{data, x_star, data.value(incumbent), sigma, region, step_seed};
                const Eigen::VectorXd x = hooks.local_step(ctx);
                if (!region.contains(x, 1e-12)) throw GeometryError("custom local step left the trust region");
                evaluate(x, Phase::local, std::nullopt);
                return;
            }
            const bool local_model = config.local_model == LocalModel::local;
            const GPModel model = local_model ? fit_model(engine_detail::local_subset(data, region), warm_local, 1)
                                              : fit_model(data, warm_global, 0);
            const double f_min = data.value(data.argmin());
            AcqConfig ac = config.acquisition;
            ac.kind = config.local_acquisition;
            const Eigen::VectorXd x = maximize(model, f_min, region, ac, step_seed, &data);
            evaluate(x, Phase::local, engine_detail::digest_of(model));
        };

        auto budget_left = [&] { return static_cast<int>(data.size()) < config.budget; };

        auto passes_test = [&] {
            return sufficient_decrease(data.value(data.argmin()), data.value(incumbent), sigma, config.forcing);
        };

        // Records iteration k, moves the incumbent on success, updates σ and advances k.
        auto close_iteration = [&](Phase phase, bool success, std::size_t rows_before) {
            rec.iterations.push_back(IterationRecord{k, sigma, data.value(incumbent), static_cast<int>(incumbent) + 1,
                                                     success, phase, static_cast<int>(data.size())});
            if (success) {
                incumbent = data.argmin();
                if (rec.rows.size() > rows_before) rec.rows.back().success = true;
            }
            sigma = update_sigma(sigma, success, config);
            ++k;
        };

        // Runs `steps` proposals; false when the budget ran out first.
        auto run_phase = [&](int steps, auto&& propose) {
            for (int i = 0; i < steps; ++i) {
                if (!budget_left()) return false;
                propose();
            }
            return true;
        };

        while (budget_left()) {
            const std::size_t rows_before_global = rec.rows.size();
            if (!run_phase(config.global_steps, propose_global)) break;
            if (passes_test()) {
                close_iteration(Phase::global, true, rows_before_global);
                continue;
            }
            if (config.mode == Mode::ego) {
                close_iteration(Phase::global, false, rows_before_global);
                continue;
            }
            const std::size_t rows_before_local = rec.rows.size();
            if (!run_phase(config.local_steps, propose_local)) break;
            close_iteration(Phase::local, passes_test(), rows_before_local);
        }
    } catch (const engine_detail::NonFiniteObjective& e) {
        rec.aborted = true;
        rec.abort_reason = e.what();
    } catch (const FitError& e) {
        rec.aborted = true;
        rec.abort_reason = std::string("model fit failed: ") + e.what();
    }

    rec.final_sigma = sigma;
    if (!data.empty()) {
        rec.final_f_star = data.value(incumbent);
        rec.final_incumbent_t = static_cast<int>(incumbent) + 1;
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Convergence diagnostics

struct ConvergenceDiagnostics {
    std::vector<double> sigma_series;  // step size before each iteration, then the final one
    double forcing_sum = 0.0;          // forcing summed over the iterations
    double forcing_shrink = 0.0;       // forcing(beta s) / forcing(s)
    double forcing_expand = 0.0;       // forcing(gamma s) / forcing(s)
    double stated_weight = 0.0;
    std::optional<double> bound;
    std::vector<double> lyapunov_series;  // one entry per step size, present with f_low
    int lyapunov_violations = 0;
    std::optional<bool> bound_holds;
    /// σ_{k+1}/σ_k ∈ {β, γ} at every k
    bool sigma_ratios_valid = true;

    // The stated weight w must be >= (expand-1)/(expand-1/2) to decrease on a
    // success and <= (1-shrink)/(3/2-shrink) to decrease on a failure; with
    // expand >= 1/shrink no w does both. The sound weight decreases the
    // potential by sound_rate * forcing on both branches, so
    // forcing_sum <= potential_0 / sound_rate.
    double sound_weight = 0.0;  // (expand-shrink)/(1+expand-shrink)
    double sound_rate = 0.0;    // (1-shrink)/(1+expand-shrink)
    std::optional<double> sound_bound;
    std::optional<bool> sound_bound_holds;
    std::vector<double> sound_lyapunov_series;
    int sound_lyapunov_violations = 0;
};

/// max{(expand-1)/(expand-1/2), (1-shrink)/(3/2-shrink)}.
inline double stated_weight(double forcing_shrink, double forcing_expand) {
    return std::max((forcing_expand - 1.0) / (forcing_expand - 0.5), (1.0 - forcing_shrink) / (1.5 - forcing_shrink));
}

/// Weight equalizing the worst-case decrease of a success and of a failure.
inline double sound_weight(double forcing_shrink, double forcing_expand) {
    return (forcing_expand - forcing_shrink) / (1.0 + forcing_expand - forcing_shrink);
}

inline double sound_rate(double forcing_shrink, double forcing_expand) {
    return (1.0 - forcing_shrink) / (1.0 + forcing_expand - forcing_shrink);
}

/// Forcing ratios for forcing = c s^q: shrink = beta^q, expand = gamma^q.
inline std::pair<double, double> forcing_constants(const TregoConfig& config) {
    return {std::pow(config.beta, config.forcing.q), std::pow(config.gamma, config.forcing.q)};
}

/// Summability diagnostics for a finished run. With potential
///   phi_k = w (f_star_k - f_low) + (1 - w) forcing(sigma_k)
/// the stated check uses w = stated_weight, a per-step decrease of w/2 forcing
/// and forcing_sum <= 2 (f_star_0 - f_low) + 2 (1 - w)/w forcing(sigma_0);
/// the sound check uses sound_weight and sound_rate.
/// Comparisons allow a relative rounding slack of 1e-12.
inline ConvergenceDiagnostics diagnostics(const RunRecord& record, std::optional<double> f_low = std::nullopt) {
    const auto& cfg = record.config;
    ConvergenceDiagnostics d;
    std::tie(d.forcing_shrink, d.forcing_expand) = forcing_constants(cfg);
    d.stated_weight = stated_weight(d.forcing_shrink, d.forcing_expand);

    std::vector<double> f_series;
    for (const auto& it : record.iterations) {
        d.sigma_series.push_back(it.sigma);
        f_series.push_back(it.f_star);
        d.forcing_sum += forcing(it.sigma, cfg.forcing);
    }
    d.sigma_series.push_back(record.final_sigma);
    f_series.push_back(record.final_f_star);

    for (std::size_t k = 0; k + 1 < d.sigma_series.size(); ++k) {
        const double ratio = d.sigma_series[k + 1] / d.sigma_series[k];
        if (std::abs(ratio - cfg.beta) > 1e-12 * cfg.beta && std::abs(ratio - cfg.gamma) > 1e-12 * cfg.gamma)
            d.sigma_ratios_valid = false;
    }

    d.sound_weight = sound_weight(d.forcing_shrink, d.forcing_expand);
    d.sound_rate = sound_rate(d.forcing_shrink, d.forcing_expand);
    if (!f_low) return d;

    const double rho0 = forcing(d.sigma_series.front(), cfg.forcing);
    const double f0 = record.iterations.empty() ? record.final_f_star : record.iterations.front().f_star;
    auto lyapunov = [&](double weight, double rate, std::vector<double>& series) {
        int violations = 0;
        for (std::size_t k = 0; k < f_series.size(); ++k)
            series.push_back(weight * (f_series[k] - *f_low) + (1.0 - weight) * forcing(d.sigma_series[k], cfg.forcing));
        for (std::size_t k = 0; k + 1 < series.size(); ++k) {
            const double rho_k = forcing(d.sigma_series[k], cfg.forcing);
            const double change = series[k + 1] - series[k];
            const double slack = 1e-12 * (std::abs(series[k]) + std::abs(series[k + 1]) + rho_k);
            if (change > -rate * rho_k + slack) ++violations;
        }
        return violations;
    };
    auto holds = [&](double bound) { return d.forcing_sum <= bound * (1.0 + 1e-12) + 1e-300; };

    d.bound = 2.0 * (f0 - *f_low) + 2.0 * (1.0 - d.stated_weight) / d.stated_weight * rho0;
    d.bound_holds = holds(*d.bound);
    d.lyapunov_violations = lyapunov(d.stated_weight, 0.5 * d.stated_weight, d.lyapunov_series);

    d.sound_bound = (d.sound_weight * (f0 - *f_low) + (1.0 - d.sound_weight) * rho0) / d.sound_rate;
    d.sound_bound_holds = holds(*d.sound_bound);
    d.sound_lyapunov_violations = lyapunov(d.sound_weight, d.sound_rate, d.sound_lyapunov_series);
    return d;
}

}  // namespace trego
