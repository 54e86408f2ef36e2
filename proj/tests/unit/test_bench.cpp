#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slate_forge/bench.hpp"
#include "slate_forge/error.hpp"

using namespace slate_forge;
namespace fs = std::filesystem;

namespace {

Scenario tiny() { return {"tiny", 400, 200, 8, 4, 0.05, false, 20, 3}; }

const ScenarioData& tiny_data() {
    static const ScenarioData data = prepare_scenario(tiny());
    return data;
}

TrainConfig base_config() {
    TrainConfig c;
    c.k = 3;
    c.batch_size = 8;
    c.eval_intervals = 4;
    c.lr = 1e-2;
    return c;
}

}  // namespace

TEST(Scenarios, Presets) {
    EXPECT_EQ(scenario_preset("small").actions, 1000u);
    EXPECT_EQ(scenario_preset("medium").actions, 100000u);
    EXPECT_EQ(scenario_preset("large").actions, 1000000u);
    EXPECT_TRUE(scenario_preset("large").gaussian_embeddings);
    EXPECT_THROW(scenario_preset("huge"), ConfigError);
}

TEST(Scenarios, PrepareIsDeterministic) {
    const auto a = prepare_scenario(tiny());
    const auto& b = tiny_data();
    EXPECT_TRUE(std::ranges::equal(a.beta->data(), b.beta->data()));
    EXPECT_EQ(a.partition.validation, b.partition.validation);
    EXPECT_EQ(a.beta->actions(), 200u);
    EXPECT_EQ(a.beta->dim(), 8u);
}

TEST(Scenarios, GaussianScenario) {
    const Scenario s{"g", 50, 300, 4, 4, 0.0, true, 10, 1};
    const auto d = prepare_scenario(s, true);
    ASSERT_TRUE(d.approx);
    EXPECT_EQ(d.split.size(), 50u);
    for (const auto& h : d.split.hidden) EXPECT_EQ(h.size(), 5u);
    Scenario bad = s;
    bad.items_per_user = 1;
    EXPECT_THROW(prepare_scenario(bad), InvalidArgument);
}

TEST(Methods, Labels) {
    const TrainConfig base = base_config();
    auto m = method_from_label("lgp-mips", base);
    EXPECT_EQ(m.config.estimator, EstimatorKind::LGP);
    EXPECT_EQ(m.config.index, IndexKind::Approx);
    m = method_from_label("pl-cov", base);
    EXPECT_EQ(m.config.estimator, EstimatorKind::PL_COV);
    EXPECT_GE(m.config.samples, 2u);
    EXPECT_EQ(method_from_label("pl-pg", base).config.index, IndexKind::Exact);
    EXPECT_THROW(method_from_label("reinforce", base), ConfigError);
}

TEST(Summaries, MeanAndStandardError) {
    BenchReport r;
    r.raw = {{"a", 1, 0.0, 1.0}, {"a", 2, 0.0, 3.0}, {"a", 3, 0.0, 5.0}, {"a", 1, 1.0, 2.0}, {"b", 1, 0.0, 7.0}};
    summarize(r);
    const Curve* a = r.curve("a");
    ASSERT_NE(a, nullptr);
    ASSERT_EQ(a->points.size(), 2u);
    EXPECT_DOUBLE_EQ(a->points[0].mean, 3.0);
    EXPECT_NEAR(a->points[0].stderr_, 2.0 / std::sqrt(3.0), 1e-12);
    EXPECT_EQ(a->points[0].n, 3u);
    EXPECT_EQ(a->points[1].stderr_, 0.0);
    EXPECT_DOUBLE_EQ(r.curve("b")->points[0].mean, 7.0);
    EXPECT_EQ(r.curve("c"), nullptr);
}

TEST(Summaries, LogLogSlope) {
    const std::vector<double> x{0.05, 0.1, 0.2, 0.4};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -2.0));
    EXPECT_NEAR(loglog_slope(x, y), -2.0, 1e-12);
    EXPECT_THROW(loglog_slope(std::vector<double>{1.0}, std::vector<double>{1.0}), InvalidArgument);
    EXPECT_THROW(loglog_slope(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 1.0}), InvalidArgument);
}

TEST(Reports, GapRowsAndFiles) {
    // lgp-mips without a prebuilt index cannot run and must show up as a gap.
    const std::vector<MethodSpec> methods{method_from_label("lgp", base_config()),
                                          method_from_label("lgp-mips", base_config())};
    const std::vector<std::uint64_t> seeds{1, 2};
    const auto r = bench_iteration_budget(tiny_data(), methods, 8, seeds);
    const Curve* gap = r.curve("lgp-mips");
    ASSERT_NE(gap, nullptr);
    EXPECT_FALSE(gap->available);
    EXPECT_FALSE(gap->note.empty());
    const std::string csv = r.to_csv();
    EXPECT_EQ(csv.rfind("scenario,method,available,x,mean,stderr,n\n", 0), 0u);
    EXPECT_NE(csv.find("tiny,lgp-mips,0,,,,0\n"), std::string::npos);
    EXPECT_EQ(r.curve("lgp")->points.size(), 5u);
    EXPECT_EQ(r.curve("lgp")->points.back().n, 2u);

    const auto dir = fs::temp_directory_path() / "slate_forge_bench_test";
    fs::remove_all(dir);
    r.write(dir, "curves");
    for (const char* name : {"curves.csv", "curves_long.csv", "curves.json"}) EXPECT_TRUE(fs::exists(dir / name));
    const auto json = nlohmann::json::parse(std::ifstream(dir / "curves.json"));
    EXPECT_EQ(json["scenario"], "tiny");
    std::istringstream lines(r.to_long_csv());
    std::string header;
    std::getline(lines, header);
    EXPECT_EQ(header, "scenario,method,seed,x,y");
}

TEST(TimeBudget, NeedsTwoMethods) {
    const std::vector<MethodSpec> one{method_from_label("lgp", base_config())};
    const std::vector<std::uint64_t> seeds{1};
    EXPECT_THROW(bench_time_budget(tiny_data(), one, 1.0, seeds), InvalidArgument);
}

TEST(TimeBudget, ZeroBudgetGivesFlatCurves) {
    const std::vector<MethodSpec> methods{method_from_label("lgp", base_config()),
                                          method_from_label("pl-pg", base_config())};
    const std::vector<std::uint64_t> seeds{1};
    const auto r = bench_time_budget(tiny_data(), methods, 0.0, seeds);
    for (const char* m : {"lgp", "pl-pg"}) {
        const Curve* c = r.curve(m);
        ASSERT_NE(c, nullptr);
        ASSERT_FALSE(c->points.empty());
        for (const auto& p : c->points) EXPECT_EQ(p.mean, c->points.front().mean);
    }
    // Both start from the same initialization, so the flat levels coincide.
    EXPECT_EQ(r.curve("lgp")->points.front().mean, r.curve("pl-pg")->points.front().mean);
}

TEST(IterationBudget, IdenticalConfigsGiveIdenticalCurves) {
    std::vector<MethodSpec> methods{method_from_label("lgp", base_config()),
                                    method_from_label("lgp", base_config())};
    methods[1].label = "lgp-copy";
    const std::vector<std::uint64_t> seeds{4, 5};
    const auto r = bench_iteration_budget(tiny_data(), methods, 12, seeds);
    const auto& a = r.curve("lgp")->points;
    const auto& b = r.curve("lgp-copy")->points;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].x, b[i].x);
        EXPECT_EQ(a[i].mean, b[i].mean);
    }
}

TEST(Variance, ExactEstimatorHasZeroVariance) {
    const std::vector<EstimatorKind> kinds{EstimatorKind::PL_PG, EstimatorKind::PL_EXACT};
    const std::vector<std::size_t> ks{1, 2};
    const std::vector<std::uint64_t> seeds{1, 2};
    Scenario s = tiny();
    s.actions = 30;
    s.density = 0.2;
    const auto data = prepare_scenario(s);
    const auto r = bench_variance_vs_k(data, kinds, ks, 100, seeds);
    for (const auto& p : r.curve("pl-exact")->points) EXPECT_NEAR(p.mean, 0.0, 1e-20);
    for (const auto& p : r.curve("pl-pg")->points) EXPECT_GT(p.mean, 0.0);
}

TEST(Variance, SigmaScalingReportsSlope) {
    const std::vector<double> sigmas{0.1, 0.2, 0.4};
    const std::vector<std::uint64_t> seeds{1};
    const auto r = bench_sigma_scaling(tiny_data(), sigmas, 3, 200, seeds, 4);
    bool found = false;
    for (const auto& [k, v] : r.fingerprint) found |= k == "loglog_slope" && std::isfinite(std::stod(v));
    EXPECT_TRUE(found);
    EXPECT_EQ(r.curve("lgp")->points.size(), 3u);
}

TEST(FixedBeta, RunsAndRejectsLargeCatalogs) {
    FixedBetaConfig c;
    c.iterations = 20;
    c.intervals = 2;
    c.trials = 100;
    c.probe_contexts = 2;
    const auto r = bench_fixed_beta(tiny_data(), c);
    for (const char* m : {"learn-theta", "learn-beta"}) {
        ASSERT_NE(r.variance.curve(m), nullptr);
        EXPECT_EQ(r.variance.curve(m)->points.size(), 3u);
        EXPECT_NE(r.reward.curve(m), nullptr);
    }
    EXPECT_GT(r.theta_seconds_per_iteration, 0.0);
    EXPECT_GT(r.beta_seconds_per_iteration, 0.0);
    const Scenario big{"big", 20, 6000, 4, 4, 0.0, true, 4, 1};
    EXPECT_THROW(bench_fixed_beta(prepare_scenario(big), c), InvalidArgument);
}

TEST(Complexity, ReportsEachCatalogSize) {
    const std::vector<std::size_t> sizes{500, 2000};
    const auto pts = bench_complexity(sizes, 8, 5, 2, 20, 1);
    ASSERT_EQ(pts.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(pts[i].actions, sizes[i]);
        EXPECT_GT(pts[i].exact_seconds, 0.0);
        EXPECT_GT(pts[i].mips_seconds, 0.0);
        EXPECT_GE(pts[i].mips_recall, 0.8);
    }
    EXPECT_THROW(bench_complexity(sizes, 8, 5, 0, 20, 1), InvalidArgument);
}

TEST(Environment, Fingerprint) {
    const auto fp = environment_fingerprint();
    EXPECT_FALSE(fp.empty());
}
