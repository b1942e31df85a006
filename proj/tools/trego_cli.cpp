// Command-line front end: run campaigns, compute ERTD curves, compare solvers,
// and print initial designs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trego/trego.hpp"

namespace fs = std::filesystem;
using namespace trego;

namespace {

int cmd_run(const std::string& config_path, int workers, bool resume) {
    std::ifstream is(config_path);
    if (!is) throw ConfigError("cannot open config " + config_path);
    const auto config = bench::campaign_from_json(nlohmann::json::parse(is));
    const auto summary = bench::run_campaign(config, workers, resume);
    std::cout << "cells: " << summary.cells_total << " run: " << summary.cells_run
              << " skipped: " << summary.cells_skipped << " aborted: " << summary.cells_aborted
              << " evaluations: " << summary.evaluations << "\n"
              << "records in " << config.output_dir.string() << "\n";
    return summary.cells_aborted == 0 ? 0 : 3;
}

int cmd_ertd(const std::string& records_dir, const std::string& out, std::vector<double> budgets) {
    const auto records = bench::load_records(records_dir);
    if (records.empty()) throw AggregationError("no complete records in " + records_dir);
    if (budgets.empty()) {
        double max_per_dim = 0.0;
        for (const auto& r : records)
            max_per_dim = std::max(max_per_dim, static_cast<double>(r.record.rows.size()) / r.problem.dim);
        budgets = bench::budgets_up_to(max_per_dim);
    }
    const auto curves = bench::ertd_curves(records, testbed::default_precisions(), budgets);
    std::ofstream os(out);
    bench::write_curves_csv(curves, os);
    std::cout << curves.size() << " curves from " << records.size() << " records -> " << out << "\n";
    return 0;
}

int cmd_compare(const std::vector<std::string>& curve_files, const std::string& out) {
    std::vector<bench::ERTDCurve> curves;
    for (const auto& f : curve_files) {
        std::ifstream is(f);
        if (!is) throw ConfigError("cannot open " + f);
        auto c = bench::read_curves_csv(is);
        curves.insert(curves.end(), c.begin(), c.end());
    }
    const auto cmp = bench::compare(std::move(curves));
    const fs::path out_path(out);
    const fs::path stem = out_path.parent_path() / out_path.stem();
    {
        std::ofstream os(out_path);
        bench::write_comparison_csv(cmp, os);
    }
    {
        std::ofstream os(stem.string() + "_plot.csv");
        bench::write_plot_csv(cmp, os);
    }
    {
        std::ofstream os(stem.string() + "_dominance.csv");
        bench::write_dominance_csv(cmp, os);
    }
    for (const auto& d : cmp.dominance)
        if (d.group == "all" && d.strict) std::cout << d.better << " dominates " << d.worse << "\n";
    return 0;
}

int cmd_doe(int dim, std::uint64_t seed, int points, int iterations) {
    auto cfg = design::DoEConfig::defaults_for(dim, seed);
    if (points > 0) cfg.n_points = points;
    cfg.improvement_iterations = iterations;
    for (const auto& p : design::lhs(cfg)) {
        for (Eigen::Index i = 0; i < p.size(); ++i) std::cout << (i ? "," : "") << io::format_double(p[i]);
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TREGO trust-region Bayesian optimization benchmark harness"};
    app.require_subcommand(1);

    std::string config_path;
    int workers = 1;
    bool resume = false;
    auto* run = app.add_subcommand("run", "run a benchmark campaign");
    run->add_option("--config", config_path, "campaign JSON file")->required();
    run->add_option("--workers", workers, "concurrent cells")->check(CLI::PositiveNumber);
    run->add_flag("--resume", resume, "skip cells whose records are complete");

    std::string records_dir, ertd_out;
    std::vector<double> budgets;
    auto* ertd = app.add_subcommand("ertd", "compute ERTD curves from run records");
    ertd->add_option("--records", records_dir, "record directory")->required();
    ertd->add_option("--out", ertd_out, "output CSV")->required();
    ertd->add_option("--budgets", budgets, "budget grid in evaluations per dimension");

    std::vector<std::string> curve_files;
    std::string compare_out;
    auto* compare = app.add_subcommand("compare", "compare ERTD curves across solvers");
    compare->add_option("--curves", curve_files, "curve CSV files from `ertd`")->required();
    compare->add_option("--out", compare_out, "comparison table CSV")->required();

    int dim = 2, points = 0, iterations = 1000;
    std::uint64_t seed = 0;
    auto* doe = app.add_subcommand("doe", "print a maximin Latin hypercube design as CSV");
    doe->add_option("--dim", dim, "dimension")->required()->check(CLI::PositiveNumber);
    doe->add_option("--seed", seed, "seed");
    doe->add_option("--points", points, "number of points (default 2*dim+4)");
    doe->add_option("--iterations", iterations, "maximin improvement iterations");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, workers, resume);
        if (*ertd) return cmd_ertd(records_dir, ertd_out, budgets);
        if (*compare) return cmd_compare(curve_files, compare_out);
        if (*doe) return cmd_doe(dim, seed, points, iterations);
    } catch (const trego::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
