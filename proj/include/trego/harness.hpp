#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "trego/design.hpp"
#include "trego/engine.hpp"
#include "trego/errors.hpp"
#include "trego/random.hpp"
#include "trego/record_io.hpp"
#include "trego/testbed.hpp"

namespace trego::bench {

namespace fs = std::filesystem;
using nlohmann::json;
using testbed::FunctionId;

inline const std::vector<std::string>& solver_names() {
    static const std::vector<std::string> names = [] {
        auto v = preset_names();
        v.push_back("random");
        return v;
    }();
    return names;
}

inline bool is_known_solver(const std::string& name) {
    const auto& names = solver_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

inline const std::vector<double>& default_budget_grid() {
    static const std::vector<double> grid = {1, 2, 3, 5, 7, 10, 15, 20, 30, 50};
    return grid;
}

struct CampaignConfig {
    std::vector<std::string> solvers = {"trego", "ego"};
    std::vector<FunctionId> functions = {FunctionId::sphere};
    std::vector<int> dims = {2};
    int instances = 1;
    int repetitions = 15;
    int budget_multiplier = 50;  // evaluations per dimension
    std::uint64_t base_seed = 1;
    fs::path output_dir = "trego_out";
    int doe_improvement_iterations = 1000;

    void validate() const {
        if (solvers.empty() || functions.empty() || dims.empty()) throw ConfigError("campaign has no cells");
        for (const auto& s : solvers)
            if (!is_known_solver(s)) throw ConfigError("unknown solver '" + s + "'");
        for (int d : dims)
            if (d < 2) throw ConfigError("campaign dimensions must be >= 2");
        if (instances < 1 || repetitions < 1) throw ConfigError("instances and repetitions must be positive");
        for (int d : dims)
            if (budget_multiplier * d <= 2 * d + 4) throw ConfigError("budget does not exceed the initial design");
    }
};

inline json to_json(const CampaignConfig& c) {
    std::vector<std::string> fns;
    for (auto f : c.functions) fns.emplace_back(testbed::to_string(f));
    return {{"solvers", c.solvers},         {"functions", fns},
            {"dims", c.dims},               {"instances", c.instances},
            {"repetitions", c.repetitions}, {"budget_multiplier", c.budget_multiplier},
            {"base_seed", c.base_seed},     {"output_dir", c.output_dir.string()},
            {"doe_improvement_iterations", c.doe_improvement_iterations}};
}

/// Parses the campaign JSON; the TREGO_OUT environment variable overrides output_dir.
inline CampaignConfig campaign_from_json(const json& j) {
    CampaignConfig c;
    if (j.contains("solvers")) c.solvers = j["solvers"].get<std::vector<std::string>>();
    if (j.contains("functions")) {
        c.functions.clear();
        for (const auto& f : j["functions"]) c.functions.push_back(testbed::parse_function(f.get<std::string>()));
    }
    if (j.contains("dims")) c.dims = j["dims"].get<std::vector<int>>();
    c.instances = j.value("instances", c.instances);
    c.repetitions = j.value("repetitions", c.repetitions);
    c.budget_multiplier = j.value("budget_multiplier", c.budget_multiplier);
    c.base_seed = j.value("base_seed", c.base_seed);
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    c.doe_improvement_iterations = j.value("doe_improvement_iterations", c.doe_improvement_iterations);
    if (const char* env = std::getenv("TREGO_OUT"); env && *env) c.output_dir = env;
    c.validate();
    return c;
}

struct Cell {
    std::string solver;
    FunctionId function = FunctionId::sphere;
    int dim = 2;
    int instance = 0;
    int repetition = 0;

    std::string stem() const {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "__d%d__i%02d__r%02d", dim, instance, repetition);
        return solver + "__" + std::string(testbed::to_string(function)) + buf;
    }
};

inline std::vector<Cell> cells(const CampaignConfig& c) {
    std::vector<Cell> out;
    for (const auto& s : c.solvers)
        for (auto f : c.functions)
            for (int d : c.dims)
                for (int i = 0; i < c.instances; ++i)
                    for (int r = 0; r < c.repetitions; ++r) out.push_back(Cell{s, f, d, i, r});
    return out;
}

// Seeds. The design seed ignores the solver so every solver starts from the same DoE.
inline std::uint64_t instance_seed(std::uint64_t base, FunctionId f, int dim, int instance) {
    return derive_seed(base, {hash_string("instance"), hash_string(testbed::to_string(f)),
                              static_cast<std::uint64_t>(dim), static_cast<std::uint64_t>(instance)});
}

inline std::uint64_t doe_seed(std::uint64_t base, const Cell& c) {
    return derive_seed(base, {hash_string("doe"), hash_string(testbed::to_string(c.function)),
                              static_cast<std::uint64_t>(c.dim), static_cast<std::uint64_t>(c.instance),
                              static_cast<std::uint64_t>(c.repetition)});
}

inline std::uint64_t solver_seed(std::uint64_t base, const Cell& c) {
    return derive_seed(base, {hash_string("solver"), hash_string(c.solver), hash_string(testbed::to_string(c.function)),
                              static_cast<std::uint64_t>(c.dim), static_cast<std::uint64_t>(c.instance),
                              static_cast<std::uint64_t>(c.repetition)});
}

/// Pure random search after the shared design; uniform draws in the unit cube.
inline RunRecord run_random_search(const Objective& objective, const std::vector<Eigen::VectorXd>& doe, int budget,
                                   std::uint64_t seed) {
    const int n = static_cast<int>(doe.front().size());
    RunRecord rec;
    rec.dim = n;
    rec.seed = seed;
    rec.config = TregoConfig::defaults(n, budget);
    Rng rng(seed);
    double best = std::numeric_limits<double>::infinity();
    for (int t = 1; t <= budget; ++t) {
        RunRow row;
        row.t = t;
        row.phase = t <= static_cast<int>(doe.size()) ? Phase::init : Phase::random;
        row.x = t <= static_cast<int>(doe.size())
                    ? doe[t - 1]
                    : uniform_in_box(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n), rng);
        row.f = objective(row.x);
        if (!std::isfinite(row.f)) {
            rec.aborted = true;
            rec.abort_reason = "objective returned a non-finite value at evaluation " + std::to_string(t);
            break;
        }
        if (row.f < best) {
            best = row.f;
            rec.final_incumbent_t = t;
        }
        rec.rows.push_back(std::move(row));
    }
    rec.final_f_star = best;
    return rec;
}

namespace detail {
inline void write_atomically(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ConfigError("cannot write " + tmp.string());
        os << content;
        if (!os) throw ConfigError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline bool is_complete(const fs::path& dir, const std::string& stem) {
    const fs::path j = dir / (stem + ".json"), c = dir / (stem + ".csv");
    if (!fs::exists(j) || !fs::exists(c)) return false;
    try {
        return json::parse(read_file(j)).value("complete", false);
    } catch (const json::exception&) {
        return false;
    }
}
}  // namespace detail

struct CampaignSummary {
    int cells_total = 0;
    int cells_run = 0;
    int cells_skipped = 0;
    int cells_aborted = 0;
    long long evaluations = 0;
};

/// Runs one cell and persists <stem>.csv and <stem>.json. Returns the evaluation count.
inline long long run_cell(const CampaignConfig& config, const Cell& cell, bool* aborted = nullptr) {
    const fs::path dir = config.output_dir;
    const std::string stem = cell.stem();
    const auto problem =
        testbed::instantiate(cell.function, cell.dim, instance_seed(config.base_seed, cell.function, cell.dim,
                                                                    cell.instance));
    const int budget = config.budget_multiplier * cell.dim;

    json marker = {{"format", "trego-run/1"}, {"complete", false}, {"solver", cell.solver}};
    detail::write_atomically(dir / (stem + ".json"), marker.dump(1) + "\n");

    long long evaluations = 0;
    const Objective objective = [&](const Eigen::VectorXd& u) {
        ++evaluations;
        return testbed::evaluate(problem, testbed::to_native(u));
    };
    auto doe_cfg = design::DoEConfig::defaults_for(cell.dim, doe_seed(config.base_seed, cell));
    doe_cfg.improvement_iterations = config.doe_improvement_iterations;
    const auto doe = design::lhs(doe_cfg);
    const std::uint64_t seed = solver_seed(config.base_seed, cell);

    RunRecord rec = cell.solver == "random" ? run_random_search(objective, doe, budget, seed)
                                            : run(objective, preset(cell.solver, cell.dim, budget), doe, seed);

    std::ostringstream csv;
    io::write_csv(rec, csv);
    detail::write_atomically(dir / (stem + ".csv"), csv.str());

    json side = io::sidecar_json(rec);
    side["complete"] = true;
    side["solver"] = cell.solver;
    side["problem"] = testbed::to_json(problem);
    side["instance"] = cell.instance;
    side["repetition"] = cell.repetition;
    detail::write_atomically(dir / (stem + ".json"), side.dump(1) + "\n");
    if (aborted) *aborted = rec.aborted;
    return evaluations;
}

/// Executes every (solver, function, dim, instance, repetition) cell.
/// With `resume`, cells whose records are already complete are skipped.
inline CampaignSummary run_campaign(const CampaignConfig& config, int workers = 1, bool resume = true) {
    config.validate();
    fs::create_directories(config.output_dir);
    const auto all = cells(config);

    json manifest = {{"format", "trego-campaign/1"}, {"config", to_json(config)}};
    json stems = json::array();
    for (const auto& c : all) stems.push_back(c.stem());
    manifest["cells"] = stems;
    detail::write_atomically(config.output_dir / "campaign.json", manifest.dump(1) + "\n");

    CampaignSummary summary;
    summary.cells_total = static_cast<int>(all.size());
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= all.size()) return;
            try {
                if (resume && detail::is_complete(config.output_dir, all[i].stem())) {
                    std::lock_guard lock(mu);
                    ++summary.cells_skipped;
                    continue;
                }
                bool aborted = false;
                const long long evals = run_cell(config, all[i], &aborted);
                std::lock_guard lock(mu);
                ++summary.cells_run;
                summary.evaluations += evals;
                if (aborted) ++summary.cells_aborted;
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(all.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return summary;
}

// ---------------------------------------------------------------------------
// Loading and ERTD

struct LoadedRecord {
    std::string stem;
    std::string solver;
    testbed::Problem problem;
    int instance = 0;
    int repetition = 0;
    RunRecord record;
};

inline testbed::Problem problem_from_json(const json& j) {
    const int dim = j.at("dim").get<int>();
    Eigen::MatrixXd rot(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) rot(i, k) = j.at("rotation").at(i).at(k).get<double>();
    return testbed::make_problem(testbed::parse_function(j.at("function").get<std::string>()), dim, rot,
                                 io::to_eigen(j.at("shift").get<std::vector<double>>()), j.at("f_opt").get<double>(),
                                 j.value("instance_seed", std::uint64_t{0}));
}

inline LoadedRecord load_record(const fs::path& dir, const std::string& stem) {
    const json side = json::parse(detail::read_file(dir / (stem + ".json")));
    if (!side.value("complete", false)) throw AggregationError("record " + stem + " is incomplete");
    std::ifstream csv(dir / (stem + ".csv"));
    int dim = 0;
    auto rows = io::read_csv(csv, dim);
    LoadedRecord out;
    out.stem = stem;
    out.solver = side.at("solver").get<std::string>();
    out.problem = problem_from_json(side.at("problem"));
    out.instance = side.value("instance", 0);
    out.repetition = side.value("repetition", 0);
    out.record = io::record_from(side, std::move(rows), dim);
    return out;
}

/// All complete records in `dir`, ordered by file stem.
inline std::vector<LoadedRecord> load_records(const fs::path& dir) {
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json" || entry.path().filename() == "campaign.json") continue;
        const std::string stem = entry.path().stem().string();
        if (detail::is_complete(dir, stem)) stems.push_back(stem);
    }
    std::sort(stems.begin(), stems.end());
    std::vector<LoadedRecord> out;
    for (const auto& s : stems) out.push_back(load_record(dir, s));
    return out;
}

struct ERTDCurve {
    std::string solver;
    std::string group = "all";
    std::vector<double> budgets;  // evaluations per dimension
    std::vector<double> proportions;
    int problem_count = 0;  // number of (run, target) pairs
};

/// First evaluation index (1-based) whose value reaches `target`, or 0 if never.
inline int first_hit(const RunRecord& rec, double target) {
    for (const auto& r : rec.rows)
        if (r.f <= target) return r.t;
    return 0;
}

/// Proportion of (run, target) pairs solved within each budget (in evaluations
/// per dimension). All records must come from a single solver and cover
/// distinct problem cells.
inline ERTDCurve compute_ertd(const std::vector<const LoadedRecord*>& records,
                              const std::vector<double>& precisions, const std::vector<double>& budgets) {
    if (records.empty()) throw AggregationError("no records to aggregate");
    if (budgets.empty()) throw AggregationError("empty budget grid");
    for (std::size_t i = 1; i < budgets.size(); ++i)
        if (!(budgets[i] > budgets[i - 1])) throw AggregationError("budget grid must be increasing");
    ERTDCurve curve;
    curve.solver = records.front()->solver;
    curve.budgets = budgets;
    std::set<std::tuple<std::string, int, int, int>> seen;
    std::vector<int> counts(budgets.size(), 0);
    for (const auto* r : records) {
        if (r->solver != curve.solver) throw AggregationError("records from different solvers in one ERTD");
        const auto key = std::make_tuple(std::string(testbed::to_string(r->problem.function_id)), r->problem.dim,
                                         r->instance, r->repetition);
        if (!seen.insert(key).second) throw AggregationError("duplicate problem cell in ERTD input: " + r->stem);
        for (double target : testbed::targets(r->problem, precisions).targets) {
            ++curve.problem_count;
            const int hit = first_hit(r->record, target);
            if (hit == 0) continue;
            for (std::size_t b = 0; b < budgets.size(); ++b)
                if (hit <= budgets[b] * r->problem.dim + 1e-9) ++counts[b];
        }
    }
    for (int c : counts) curve.proportions.push_back(static_cast<double>(c) / curve.problem_count);
    return curve;
}

inline std::vector<double> budgets_up_to(double max_per_dim, const std::vector<double>& grid = default_budget_grid()) {
    std::vector<double> out;
    for (double b : grid)
        if (b <= max_per_dim + 1e-12) out.push_back(b);
    if (out.empty() || out.back() < max_per_dim) out.push_back(max_per_dim);
    return out;
}

/// One curve per (solver, group) plus an "all" curve per solver.
inline std::vector<ERTDCurve> ertd_curves(const std::vector<LoadedRecord>& records,
                                          const std::vector<double>& precisions, const std::vector<double>& budgets) {
    std::map<std::string, std::map<std::string, std::vector<const LoadedRecord*>>> by_solver;
    for (const auto& r : records) {
        by_solver[r.solver]["all"].push_back(&r);
        by_solver[r.solver][testbed::group_name(testbed::group_of(r.problem.function_id))].push_back(&r);
    }
    std::vector<ERTDCurve> out;
    for (auto& [solver, groups] : by_solver)
        for (auto& [group, recs] : groups) {
            auto c = compute_ertd(recs, precisions, budgets);
            c.group = group;
            out.push_back(std::move(c));
        }
    return out;
}

inline void write_curves_csv(const std::vector<ERTDCurve>& curves, std::ostream& os) {
    os << "solver,group,budget,proportion,problems\n";
    for (const auto& c : curves)
        for (std::size_t b = 0; b < c.budgets.size(); ++b)
            os << c.solver << ',' << c.group << ',' << io::format_double(c.budgets[b]) << ','
               << io::format_double(c.proportions[b]) << ',' << c.problem_count << '\n';
}

inline std::vector<ERTDCurve> read_curves_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "solver,group,budget,proportion,problems")
        throw AggregationError("unexpected ERTD curve header");
    std::vector<ERTDCurve> out;
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = io::split_csv_line(line);
        if (cells.size() != 5) throw AggregationError("ragged ERTD curve row");
        const auto key = std::make_pair(cells[0], cells[1]);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, out.size()).first;
            out.push_back(ERTDCurve{cells[0], cells[1], {}, {}, std::stoi(cells[4])});
        }
        out[it->second].budgets.push_back(std::stod(cells[2]));
        out[it->second].proportions.push_back(std::stod(cells[3]));
    }
    return out;
}

struct Dominance {
    std::string group;
    std::string better;
    std::string worse;
    bool strict = false;  // strictly better at some budget
};

struct Comparison {
    std::vector<double> budgets;
    std::vector<ERTDCurve> rows;  // sorted by (group, solver)
    std::vector<Dominance> dominance;
};

/// Solver × budget table with per-group breakdowns and pairwise dominance.
/// Curves must share one budget grid, and within a group every solver must
/// have been scored on the same number of problems.
inline Comparison compare(std::vector<ERTDCurve> curves) {
    if (curves.empty()) throw AggregationError("no curves to compare");
    Comparison cmp;
    cmp.budgets = curves.front().budgets;
    for (const auto& c : curves)
        if (c.budgets != cmp.budgets) throw AggregationError("curves use different budget grids");
    std::sort(curves.begin(), curves.end(), [](const ERTDCurve& a, const ERTDCurve& b) {
        return std::tie(a.group, a.solver) < std::tie(b.group, b.solver);
    });
    for (std::size_t i = 1; i < curves.size(); ++i)
        if (curves[i].group == curves[i - 1].group && curves[i].solver == curves[i - 1].solver)
            throw AggregationError("duplicate curve for " + curves[i].solver + "/" + curves[i].group);
    std::map<std::string, int> group_size;
    for (const auto& c : curves) {
        auto [it, inserted] = group_size.emplace(c.group, c.problem_count);
        if (!inserted && it->second != c.problem_count)
            throw AggregationError("mismatched problem sets in group " + c.group);
    }
    for (std::size_t i = 0; i < curves.size(); ++i)
        for (std::size_t j = 0; j < curves.size(); ++j) {
            if (i == j || curves[i].group != curves[j].group) continue;
            bool geq = true, strict = false;
            for (std::size_t b = 0; b < cmp.budgets.size(); ++b) {
                if (curves[i].proportions[b] < curves[j].proportions[b]) geq = false;
                if (curves[i].proportions[b] > curves[j].proportions[b]) strict = true;
            }
            // equal curves are reported once, in name order
            if (geq && (strict || curves[i].solver < curves[j].solver))
                cmp.dominance.push_back(Dominance{curves[i].group, curves[i].solver, curves[j].solver, strict});
        }
    cmp.rows = std::move(curves);
    return cmp;
}

inline void write_comparison_csv(const Comparison& cmp, std::ostream& os) {
    os << "group,solver";
    for (double b : cmp.budgets) os << ",b" << io::format_double(b);
    os << '\n';
    for (const auto& r : cmp.rows) {
        os << r.group << ',' << r.solver;
        for (double p : r.proportions) os << ',' << io::format_double(p);
        os << '\n';
    }
}

/// Long format for plotting tools: solver, budget, proportion, group.
inline void write_plot_csv(const Comparison& cmp, std::ostream& os) {
    os << "solver,budget,proportion,group\n";
    for (const auto& r : cmp.rows)
        for (std::size_t b = 0; b < cmp.budgets.size(); ++b)
            os << r.solver << ',' << io::format_double(cmp.budgets[b]) << ',' << io::format_double(r.proportions[b])
               << ',' << r.group << '\n';
}

inline void write_dominance_csv(const Comparison& cmp, std::ostream& os) {
    os << "group,better,worse,strict\n";
    for (const auto& d : cmp.dominance)
        os << d.group << ',' << d.better << ',' << d.worse << ',' << (d.strict ? 1 : 0) << '\n';
}

}  // namespace trego::bench
