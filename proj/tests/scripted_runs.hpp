#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "trego/design.hpp"
#include "trego/engine.hpp"

// Engine runs driven by objectives that return a fixed value sequence by call
// order, so the success/failure pattern is forced whatever points are proposed.
namespace scripted {

struct ExpectedRow {
    int k;
    trego::Phase phase;
    bool success;
};

struct ExpectedIteration {
    bool success;
    trego::Phase decided_in;
    int incumbent_t;  // x*_k before the test
    int t_end;
};

struct Scenario {
    std::string name;
    int global_steps = 1;
    int local_steps = 1;
    trego::Mode mode = trego::Mode::trego;
    std::vector<double> values;  // objective values in call order; the first 8 are the design
    std::vector<ExpectedRow> rows;
    std::vector<ExpectedIteration> iterations;
    int final_incumbent_t = 0;
};

inline constexpr int kDim = 2;
inline constexpr int kDesignSize = 8;

using trego::Phase;

// σ0 = ½·0.2^{1/2} gives ρ(σ0) = 0.05 and ρ(γσ0) ≈ 0.0617.
inline std::vector<Scenario> scenarios() {
    std::vector<Scenario> out;
    {
        Scenario s;
        s.name = "g1l1";
        s.values = {12, 11, 10, 13, 14, 15, 16, 17, 9.0, 9.5, 8.99, 20, 8.0, 30, 30, 7.0};
        for (int i = 0; i < 8; ++i) s.rows.push_back({0, Phase::init, false});
        s.rows.insert(s.rows.end(), {{0, Phase::global, true},
                                     {1, Phase::global, false},
                                     {1, Phase::local, false},
                                     {2, Phase::global, false},
                                     {2, Phase::local, true},
                                     {3, Phase::global, false},
                                     {3, Phase::local, false},
                                     {4, Phase::global, true}});
        s.iterations = {{true, Phase::global, 3, 9},
                        {false, Phase::local, 9, 11},
                        {true, Phase::local, 9, 13},
                        {false, Phase::local, 13, 15},
                        {true, Phase::global, 13, 16}};
        s.final_incumbent_t = 16;
        out.push_back(s);
    }
    {
        Scenario s;
        s.name = "g2l3_budget_cut_in_local_phase";
        s.global_steps = 2;
        s.local_steps = 3;
        s.values = {5, 6, 7, 8, 9, 10, 11, 12, 6, 4.9, 7, 8, 9, 4.85, 10, 3, 3.5, 4, 4, 2.99};
        for (int i = 0; i < 8; ++i) s.rows.push_back({0, Phase::init, false});
        s.rows.insert(s.rows.end(), {{0, Phase::global, false},
                                     {0, Phase::global, true},
                                     {1, Phase::global, false},
                                     {1, Phase::global, false},
                                     {1, Phase::local, false},
                                     {1, Phase::local, false},
                                     {1, Phase::local, false},
                                     {2, Phase::global, false},
                                     {2, Phase::global, true},
                                     {3, Phase::global, false},
                                     {3, Phase::global, false},
                                     {3, Phase::local, false}});
        s.iterations = {{true, Phase::global, 1, 10},
                        {false, Phase::local, 10, 15},
                        {true, Phase::global, 10, 17}};
        s.final_incumbent_t = 16;
        out.push_back(s);
    }
    {
        Scenario s;
        s.name = "ego_tracks_sigma_without_local_steps";
        s.mode = trego::Mode::ego;
        s.values = {1, 2, 3, 4, 5, 6, 7, 8, 0.5, 0.49, 0.3, 1.0};
        for (int i = 0; i < 8; ++i) s.rows.push_back({0, Phase::init, false});
        s.rows.insert(s.rows.end(), {{0, Phase::global, true},
                                     {1, Phase::global, false},
                                     {2, Phase::global, true},
                                     {3, Phase::global, false}});
        s.iterations = {{true, Phase::global, 1, 9},
                        {false, Phase::global, 9, 10},
                        {true, Phase::global, 9, 11},
                        {false, Phase::global, 11, 12}};
        s.final_incumbent_t = 11;
        out.push_back(s);
    }
    {
        Scenario s;
        s.name = "g0_pure_local";
        s.global_steps = 0;
        s.local_steps = 2;
        s.values = {3, 4, 5, 6, 7, 8, 9, 10, 3.5, 2.0, 2.5, 2.6, 1.0, 9.0};
        for (int i = 0; i < 8; ++i) s.rows.push_back({0, Phase::init, false});
        s.rows.insert(s.rows.end(), {{0, Phase::local, false},
                                     {0, Phase::local, true},
                                     {1, Phase::local, false},
                                     {1, Phase::local, false},
                                     {2, Phase::local, false},
                                     {2, Phase::local, true}});
        s.iterations = {{true, Phase::local, 1, 10},
                        {false, Phase::local, 10, 12},
                        {true, Phase::local, 10, 14}};
        s.final_incumbent_t = 13;
        out.push_back(s);
    }
    return out;
}

inline trego::TregoConfig config_for(const Scenario& s) {
    auto cfg = trego::TregoConfig::defaults(kDim, static_cast<int>(s.values.size()));
    cfg.global_steps = s.global_steps;
    cfg.local_steps = s.local_steps;
    cfg.mode = s.mode;
    return cfg;
}

inline trego::RunRecord execute(const Scenario& s, std::uint64_t seed = 1) {
    const auto doe = trego::design::lhs(trego::design::DoEConfig::defaults_for(kDim, seed));
    std::size_t calls = 0;
    const trego::Objective f = [&](const Eigen::VectorXd&) { return s.values.at(calls++); };
    return trego::run(f, config_for(s), doe, seed);
}

/// Differences between a run and the scenario's hand-written trace; empty when they agree.
inline std::vector<std::string> check(const Scenario& s, const trego::RunRecord& rec) {
    std::vector<std::string> errs;
    auto fail = [&](const std::string& what) { errs.push_back(s.name + ": " + what); };
    const auto cfg = config_for(s);

    // reference σ_k from the expected success pattern
    std::vector<double> sigma{cfg.sigma0};
    for (const auto& it : s.iterations) sigma.push_back(it.success ? cfg.gamma * sigma.back() : cfg.beta * sigma.back());

    if (rec.aborted) fail("run aborted: " + rec.abort_reason);
    if (rec.rows.size() != s.rows.size()) {
        fail("row count " + std::to_string(rec.rows.size()) + " != " + std::to_string(s.rows.size()));
        return errs;
    }
    if (rec.iterations.size() != s.iterations.size()) {
        fail("iteration count " + std::to_string(rec.iterations.size()) + " != " + std::to_string(s.iterations.size()));
        return errs;
    }
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
        const auto& r = rec.rows[i];
        const auto& e = s.rows[i];
        const std::string at = "row t=" + std::to_string(i + 1) + " ";
        if (r.t != static_cast<int>(i) + 1) fail(at + "has wrong t");
        if (r.k != e.k) fail(at + "k " + std::to_string(r.k) + " != " + std::to_string(e.k));
        if (r.phase != e.phase) fail(at + "phase " + std::string(to_string(r.phase)));
        if (r.success != e.success) fail(at + "success flag mismatch");
        if (r.phase != Phase::init && r.sigma != sigma[e.k]) fail(at + "sigma mismatch");
        if (r.phase == Phase::local) {
            const auto& x_star = rec.rows[s.iterations.size() > static_cast<std::size_t>(e.k)
                                              ? s.iterations[e.k].incumbent_t - 1
                                              : s.final_incumbent_t - 1]
                                     .x;
            if (!trego::trust_region(x_star, sigma[e.k], cfg).contains(r.x)) fail(at + "local proposal outside trust region");
        }
        if (std::abs(r.f - s.values[i]) != 0.0) fail(at + "value mismatch");
    }
    for (std::size_t k = 0; k < s.iterations.size(); ++k) {
        const auto& it = rec.iterations[k];
        const auto& e = s.iterations[k];
        const std::string at = "iteration k=" + std::to_string(k) + " ";
        if (it.k != static_cast<int>(k)) fail(at + "index mismatch");
        if (it.sigma != sigma[k]) fail(at + "sigma mismatch");
        if (it.success != e.success) fail(at + "success mismatch");
        if (it.decided_in != e.decided_in) fail(at + "decided in " + std::string(to_string(it.decided_in)));
        if (it.incumbent_t != e.incumbent_t) fail(at + "incumbent t=" + std::to_string(it.incumbent_t));
        if (it.t_end != e.t_end) fail(at + "t_end " + std::to_string(it.t_end));
        if (it.f_star != s.values[e.incumbent_t - 1]) fail(at + "f_star mismatch");
        const bool decrease = trego::sufficient_decrease(
            *std::min_element(s.values.begin(), s.values.begin() + e.t_end), it.f_star, it.sigma, cfg.forcing);
        if (decrease != e.success) fail(at + "reference trace disagrees with the decrease test");
        const double next = k + 1 < s.iterations.size() ? rec.iterations[k + 1].sigma : rec.final_sigma;
        if (next != cfg.beta * it.sigma && next != cfg.gamma * it.sigma) fail(at + "sigma step not in {beta, gamma}");
    }
    if (rec.final_sigma != sigma.back()) fail("final sigma mismatch");
    if (rec.final_incumbent_t != s.final_incumbent_t) fail("final incumbent t=" + std::to_string(rec.final_incumbent_t));
    return errs;
}

}  // namespace scripted
