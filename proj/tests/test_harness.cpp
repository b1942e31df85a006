#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "trego/harness.hpp"

namespace fs = std::filesystem;
using namespace trego;
using namespace trego::bench;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("trego_harness_test_" + name);
    fs::remove_all(p);
    return p;
}

CampaignConfig small_campaign(const fs::path& out) {
    CampaignConfig c;
    c.solvers = {"trego", "ego"};
    c.functions = {testbed::FunctionId::sphere};
    c.dims = {2};
    c.instances = 3;
    c.repetitions = 15;
    c.budget_multiplier = 5;
    c.base_seed = 2024;
    c.output_dir = out;
    return c;
}

// Shared by the tests below; the campaign runs once.
const fs::path& campaign_dir() {
    static const fs::path dir = [] {
        const auto d = scratch("campaign");
        run_campaign(small_campaign(d), 1, true);
        return d;
    }();
    return dir;
}

int count_with_extension(const fs::path& dir, const std::string& ext) {
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext ? 1 : 0;
    return n;
}

LoadedRecord synthetic(const std::string& solver, int instance, const std::vector<double>& values) {
    LoadedRecord r;
    r.solver = solver;
    r.stem = solver + std::to_string(instance);
    r.problem = testbed::make_problem(testbed::FunctionId::sphere, 1, Eigen::MatrixXd::Identity(1, 1),
                                      Eigen::VectorXd::Zero(1), 0.0);
    r.instance = instance;
    r.record.dim = 1;
    for (std::size_t i = 0; i < values.size(); ++i) {
        RunRow row;
        row.t = static_cast<int>(i) + 1;
        row.x = Eigen::VectorXd::Zero(1);
        row.f = values[i];
        r.record.rows.push_back(row);
    }
    return r;
}

std::vector<double> hits_at(int first_coarse, int first_fine, int length) {
    std::vector<double> v(length, 100.0);
    for (int t = first_coarse; t <= length; ++t) v[t - 1] = 5.0;
    for (int t = first_fine; t <= length; ++t) v[t - 1] = 0.05;
    return v;
}

}  // namespace

TEST(Campaign, WritesOneRecordPerCell) {
    EXPECT_EQ(count_with_extension(campaign_dir(), ".csv"), 90);
    EXPECT_EQ(count_with_extension(campaign_dir(), ".json"), 91);  // plus the manifest
    EXPECT_EQ(count_with_extension(campaign_dir(), ".tmp"), 0);
    EXPECT_EQ(load_records(campaign_dir()).size(), 90u);
}

TEST(Campaign, SolversShareTheInitialDesign) {
    const auto recs = load_records(campaign_dir());
    std::map<std::pair<int, int>, std::vector<const LoadedRecord*>> by_cell;
    for (const auto& r : recs) by_cell[{r.instance, r.repetition}].push_back(&r);
    ASSERT_EQ(by_cell.size(), 45u);
    for (const auto& [cell, pair] : by_cell) {
        ASSERT_EQ(pair.size(), 2u);
        for (int t = 0; t < 8; ++t) {
            EXPECT_EQ(pair[0]->record.rows[t].x, pair[1]->record.rows[t].x);
            EXPECT_EQ(pair[0]->record.rows[t].f, pair[1]->record.rows[t].f);
        }
    }
}

TEST(Campaign, ResumeSkipsCompletedCells) {
    const auto again = run_campaign(small_campaign(campaign_dir()), 1, true);
    EXPECT_EQ(again.cells_run, 0);
    EXPECT_EQ(again.evaluations, 0);
    EXPECT_EQ(again.cells_skipped, 90);
}

TEST(Campaign, IncompleteRecordIsRerun) {
    const auto dir = scratch("resume");
    auto cfg = small_campaign(dir);
    cfg.instances = 1;
    cfg.repetitions = 2;
    run_campaign(cfg, 1, true);
    const auto stem = cells(cfg).front().stem();
    const std::string before = detail::read_file(dir / (stem + ".csv"));
    detail::write_atomically(dir / (stem + ".json"), R"({"complete": false})");
    const auto s = run_campaign(cfg, 1, true);
    EXPECT_EQ(s.cells_run, 1);
    EXPECT_EQ(s.evaluations, 10);
    EXPECT_EQ(detail::read_file(dir / (stem + ".csv")), before);
    fs::remove_all(dir);
}

TEST(Campaign, ByteIdenticalAcrossExecutions) {
    const auto dir = scratch("repeat");
    auto cfg = small_campaign(dir);
    cfg.instances = 1;
    cfg.repetitions = 3;
    run_campaign(cfg, 2, false);
    for (const auto& c : cells(cfg))
        EXPECT_EQ(detail::read_file(dir / (c.stem() + ".csv")), detail::read_file(campaign_dir() / (c.stem() + ".csv")))
            << c.stem();
    fs::remove_all(dir);
}

TEST(Campaign, RandomSearchRecordsStayInBox) {
    const auto dir = scratch("random");
    auto cfg = small_campaign(dir);
    cfg.solvers = {"random"};
    cfg.instances = 1;
    cfg.repetitions = 2;
    run_campaign(cfg, 1, false);
    for (const auto& r : load_records(dir)) {
        ASSERT_EQ(r.record.rows.size(), 10u);
        for (const auto& row : r.record.rows) {
            EXPECT_TRUE((row.x.array() >= 0).all() && (row.x.array() <= 1).all());
            EXPECT_GE(row.f, r.problem.f_opt);
            EXPECT_EQ(row.phase, row.t <= 8 ? Phase::init : Phase::random);
        }
    }
    fs::remove_all(dir);
}

TEST(Campaign, ConfigParsing) {
    const json j = {{"solvers", {"trego", "gl1-4", "random"}}, {"functions", {"bi_funnel"}}, {"dims", {3}},
                    {"instances", 2}, {"repetitions", 1}, {"budget_multiplier", 20}, {"output_dir", "x"}};
    ::setenv("TREGO_OUT", "/tmp/elsewhere", 1);
    const auto c = campaign_from_json(j);
    ::unsetenv("TREGO_OUT");
    EXPECT_EQ(c.output_dir, fs::path("/tmp/elsewhere"));
    EXPECT_EQ(cells(c).size(), 6u);
    EXPECT_EQ(campaign_from_json(to_json(c)).solvers, c.solvers);
    EXPECT_THROW(campaign_from_json(json{{"solvers", {"bogus"}}}), ConfigError);
    EXPECT_THROW(campaign_from_json(json{{"functions", {"f7"}}}), ConfigError);
    EXPECT_THROW(campaign_from_json(json{{"budget_multiplier", 3}}), ConfigError);
}

TEST(Seeds, DesignSeedIgnoresSolver) {
    Cell a{"trego", testbed::FunctionId::sphere, 2, 1, 4}, b = a;
    b.solver = "ego";
    EXPECT_EQ(doe_seed(7, a), doe_seed(7, b));
    EXPECT_NE(solver_seed(7, a), solver_seed(7, b));
    b = a;
    b.repetition = 5;
    EXPECT_NE(doe_seed(7, a), doe_seed(7, b));
}

TEST(Ertd, CountsFirstHits) {
    const auto r = synthetic("s", 0, hits_at(5, 40, 60));
    const auto curve = compute_ertd({&r}, {10.0, 0.1}, {10, 50});
    EXPECT_EQ(curve.proportions, (std::vector<double>{0.5, 1.0}));
    EXPECT_EQ(curve.problem_count, 2);
}

TEST(Ertd, AllTargetsHitGivesOne) {
    const auto r = synthetic("s", 0, std::vector<double>(10, 0.0));
    const auto curve = compute_ertd({&r}, testbed::default_precisions(), {1, 10});
    EXPECT_EQ(curve.proportions.back(), 1.0);
}

TEST(Ertd, UnreachableTargetScoresZero) {
    const auto dir = campaign_dir();
    std::vector<const LoadedRecord*> random_like;
    const auto recs = load_records(dir);
    for (const auto& r : recs)
        if (r.solver == "ego") random_like.push_back(&r);
    const auto curve = compute_ertd(random_like, {1e-9}, {1, 5});
    EXPECT_EQ(curve.proportions, (std::vector<double>{0.0, 0.0}));
}

TEST(Ertd, MonotoneInBudget) {
    const auto curves = ertd_curves(load_records(campaign_dir()), testbed::default_precisions(), budgets_up_to(5));
    EXPECT_EQ(curves.size(), 4u);  // two solvers, each with "all" and one group
    for (const auto& c : curves)
        for (std::size_t b = 1; b < c.proportions.size(); ++b) EXPECT_GE(c.proportions[b], c.proportions[b - 1]);
}

TEST(Ertd, InvariantToRecordOrder) {
    const auto recs = load_records(campaign_dir());
    std::vector<const LoadedRecord*> trego_recs;
    for (const auto& r : recs)
        if (r.solver == "trego") trego_recs.push_back(&r);
    const auto base = compute_ertd(trego_recs, testbed::default_precisions(), budgets_up_to(5));
    std::mt19937 g(4);
    for (int i = 0; i < 5; ++i) {
        std::shuffle(trego_recs.begin(), trego_recs.end(), g);
        EXPECT_EQ(compute_ertd(trego_recs, testbed::default_precisions(), budgets_up_to(5)).proportions,
                  base.proportions);
    }
}

TEST(Ertd, RejectsInconsistentInput) {
    const auto a = synthetic("a", 0, hits_at(2, 3, 5)), b = synthetic("b", 1, hits_at(2, 3, 5));
    const auto a_again = synthetic("a", 0, hits_at(2, 3, 5));
    EXPECT_THROW(compute_ertd({}, {1.0}, {1}), AggregationError);
    EXPECT_THROW(compute_ertd({&a, &b}, {1.0}, {1}), AggregationError);
    EXPECT_THROW(compute_ertd({&a, &a_again}, {1.0}, {1}), AggregationError);
    EXPECT_THROW(compute_ertd({&a}, {1.0}, {5, 1}), AggregationError);
}

TEST(Ertd, BudgetGrid) {
    EXPECT_EQ(budgets_up_to(30), (std::vector<double>{1, 2, 3, 5, 7, 10, 15, 20, 30}));
    EXPECT_EQ(budgets_up_to(6), (std::vector<double>{1, 2, 3, 5, 6}));
}

TEST(Compare, IdenticalCurvesAndDominance) {
    ERTDCurve a{"alpha", "all", {1, 2, 3}, {0.1, 0.4, 0.6}, 10};
    ERTDCurve b = a;
    b.solver = "beta";
    auto cmp = compare({a, b});
    ASSERT_EQ(cmp.rows.size(), 2u);
    EXPECT_EQ(cmp.rows[0].proportions, cmp.rows[1].proportions);
    ASSERT_EQ(cmp.dominance.size(), 1u);
    EXPECT_FALSE(cmp.dominance[0].strict);

    b.proportions = {0.1, 0.3, 0.6};
    cmp = compare({b, a});
    ASSERT_EQ(cmp.dominance.size(), 1u);
    EXPECT_EQ(cmp.dominance[0].better, "alpha");
    EXPECT_EQ(cmp.dominance[0].worse, "beta");
    EXPECT_TRUE(cmp.dominance[0].strict);

    b.proportions = {0.2, 0.3, 0.6};
    EXPECT_TRUE(compare({a, b}).dominance.empty());
}

TEST(Compare, RejectsMismatchedInputs) {
    ERTDCurve a{"alpha", "all", {1, 2}, {0.1, 0.4}, 10};
    ERTDCurve b{"beta", "all", {1, 2}, {0.1, 0.4}, 12};
    EXPECT_THROW(compare({a, b}), AggregationError);
    b.problem_count = 10;
    b.budgets = {1, 3};
    EXPECT_THROW(compare({a, b}), AggregationError);
    EXPECT_THROW(compare({a, a}), AggregationError);
    EXPECT_THROW(compare({}), AggregationError);
}

TEST(Pipeline, CurvesRoundTripAndAreDeterministic) {
    const auto curves = ertd_curves(load_records(campaign_dir()), testbed::default_precisions(), budgets_up_to(5));
    std::ostringstream first, second;
    write_curves_csv(curves, first);
    std::istringstream in(first.str());
    write_curves_csv(read_curves_csv(in), second);
    EXPECT_EQ(first.str(), second.str());

    const auto again = ertd_curves(load_records(campaign_dir()), testbed::default_precisions(), budgets_up_to(5));
    std::ostringstream third;
    write_curves_csv(again, third);
    EXPECT_EQ(first.str(), third.str());

    std::ostringstream table, plot, dom;
    const auto cmp = compare(curves);
    write_comparison_csv(cmp, table);
    write_plot_csv(cmp, plot);
    write_dominance_csv(cmp, dom);
    EXPECT_EQ(table.str().substr(0, table.str().find('\n')), "group,solver,b1,b2,b3,b5");
    EXPECT_EQ(plot.str().substr(0, plot.str().find('\n')), "solver,budget,proportion,group");
}

TEST(RecordIo, CsvAndSidecarRoundTrip) {
    const auto recs = load_records(campaign_dir());
    const auto& rec = recs.front().record;
    std::ostringstream os;
    io::write_csv(rec, os);
    std::istringstream is(os.str());
    int dim = 0;
    auto rows = io::read_csv(is, dim);
    const auto back = io::record_from(io::sidecar_json(rec), std::move(rows), dim);
    ASSERT_EQ(back.rows.size(), rec.rows.size());
    for (std::size_t i = 0; i < rec.rows.size(); ++i) {
        EXPECT_EQ(back.rows[i].x, rec.rows[i].x);
        EXPECT_EQ(back.rows[i].f, rec.rows[i].f);
        EXPECT_EQ(back.rows[i].model.has_value(), rec.rows[i].model.has_value());
    }
    EXPECT_EQ(back.iterations.size(), rec.iterations.size());
    EXPECT_EQ(back.final_sigma, rec.final_sigma);
    EXPECT_EQ(io::to_json(back.config), io::to_json(rec.config));
}
