#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sdemap/config.hpp"
#include "sdemap/csv.hpp"
#include "sdemap/experiments.hpp"

using namespace sdemap;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sdemap_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DiscretePath scalar_path(const TimeGrid& g, double value) { return DiscretePath::constant(g, Vector::Constant(1, value)); }

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig d;
  const ExperimentConfig r = parse_config(config_to_json(d));
  EXPECT_EQ(config_to_json(r), config_to_json(d));
  EXPECT_EQ(r.vdp.replicates, 50u);
  EXPECT_EQ(r.benes.levels.back(), 1024u);
}

TEST(Config, OverridesAndRejections) {
  const auto c = parse_config(R"({"schema_version": 1, "seed": 5, "vdp_robust": {"p_outlier": 0.1, "kinds": ["trapezoidal"]}})");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_DOUBLE_EQ(c.vdp.p_outlier, 0.1);
  ASSERT_EQ(c.vdp.kinds.size(), 1u);
  EXPECT_EQ(c.vdp.kinds[0], MeritKind::trapezoidal);
  EXPECT_THROW(parse_config(R"({"seed": 5})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"schema_version": 2})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"schema_version": 1, "vdp_robust": {"sigma": 1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"schema_version": 1, "optimizer": {"memory": "ten"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"schema_version": 1, "vdp_robust": {"p_outlier": 2}})").check(), ConfigError);
  EXPECT_THROW(parse_config(R"({"schema_version": 1, "benes_convergence": {"levels": [16, 24]}})").check(),
               ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Csv, FormatsRoundTripDoubles) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(std::stod(format_double(x)), x);
  EXPECT_EQ(format_optional(std::nullopt), "");
  const fs::path dir = scratch("csv");
  CsvTable t({"a", "b"});
  t.add_row({"1", ""});
  EXPECT_THROW(t.add_row({"1"}), std::invalid_argument);
  t.write(dir / "t.csv");
  EXPECT_EQ(read_file(dir / "t.csv"), "a,b\n1,\n");
  const auto rows = read_csv(dir / "t.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].size(), 2u);
  EXPECT_FALSE(fs::exists(dir / "t.csv.tmp"));
}

TEST(Ise, Examples) {
  const TimeGrid fine = make_uniform_grid(2.0, 200, {});
  const TimeGrid coarse = make_uniform_grid(2.0, 8, {});
  EXPECT_EQ(compute_ise(scalar_path(fine, 0.3), scalar_path(fine, 0.3)), 0.0);
  EXPECT_NEAR(compute_ise(scalar_path(fine, 0.3), scalar_path(coarse, 0.3)), 0.0, 1e-30);
  EXPECT_NEAR(compute_ise(scalar_path(fine, 1.0), scalar_path(coarse, 0.0)), 2.0, 1e-12);
  const TimeGrid g16 = make_uniform_grid(16.0, 1600, {});
  Vector off(2);
  off << 1.0, 0.0;
  EXPECT_NEAR(compute_ise(DiscretePath::constant(g16, off), DiscretePath::constant(make_uniform_grid(16.0, 16, {}),
                                                                                    Vector::Zero(2))),
              16.0, 1e-12);
  // Linear error e(t) = t on [0, 1]: trapezoid on 1000 segments gives 1/3 + 1/(6 * 1000^2).
  const TimeGrid g1 = make_uniform_grid(1.0, 1000, {});
  Matrix s(1, 1001);
  for (Index k = 0; k <= 1000; ++k) s(0, k) = g1.time(static_cast<std::size_t>(k));
  EXPECT_NEAR(compute_ise(DiscretePath(g1, s), scalar_path(make_uniform_grid(1.0, 1, {}), 0.0)),
              1.0 / 3.0 + 1.0 / 6e6, 1e-12);
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({3.0, 1.0, 2.0}, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(percentile({1.0, 2.0, 3.0, 4.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(percentile({0.0, 10.0}, 0.05), 0.5);
  EXPECT_DOUBLE_EQ(percentile({7.0}, 0.95), 7.0);
  EXPECT_THROW(percentile({}, 0.5), std::invalid_argument);
}

TEST(Summary, ExcludesFailuresAndCountsThem) {
  std::vector<IseRecord> rs;
  for (std::size_t r = 0; r < 4; ++r) {
    IseRecord a{r, MeritKind::euler, 1.0 + static_cast<double>(r), "converged", 1, 0.0, 10, 2, 0.0, ""};
    IseRecord b{r, MeritKind::trapezoidal, std::nullopt, "failed", 0, 0.0, 10, 2, 0.0, ""};
    if (r < 2) b.ise = 5.0;
    rs.push_back(a);
    rs.push_back(b);
  }
  const auto s = summarize(rs);
  ASSERT_EQ(s.summary.size(), 2u);
  EXPECT_EQ(s.summary[0].completed, 4u);
  EXPECT_DOUBLE_EQ(*s.summary[0].median, 2.5);
  EXPECT_EQ(s.summary[1].failures, 2u);
  EXPECT_DOUBLE_EQ(*s.summary[1].median, 5.0);
  EXPECT_EQ(s.measurements, 40u);
  EXPECT_DOUBLE_EQ(s.outlier_fraction, 0.2);
}

TEST(ParallelFor, CoversEveryIndexAndRethrowsLowest) {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  try {
    parallel_for(10, 3, [](std::size_t i) {
      if (i == 7 || i == 4) throw std::runtime_error(std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "4");
  }
}

TEST(Ks, DistanceOfKnownSamples) {
  auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
  EXPECT_NEAR(ks_distance({0.5}, uniform), 0.5, 1e-15);
  EXPECT_NEAR(ks_distance({0.25, 0.75}, uniform), 0.25, 1e-15);
  std::vector<double> grid;
  for (int i = 0; i < 1000; ++i) grid.push_back((i + 0.5) / 1000.0);
  EXPECT_NEAR(ks_distance(grid, uniform), 0.0005, 1e-12);
}

TEST(GradientSuite, CleanAndInjectedFault) {
  const auto clean = gradient_suite(20, 3);
  EXPECT_TRUE(clean.passed());
  for (const auto& c : clean.checks) {
    EXPECT_GT(c.cases, 0u) << c.name;
    EXPECT_LE(c.max_error, 1e-6) << c.name;
  }
  const auto bad = gradient_suite(20, 3, true);
  EXPECT_FALSE(bad.passed());
  for (const auto& c : bad.checks) {
    if (c.name == "euler_energy") {
      EXPECT_GT(c.max_error, 1e-6);
    }
  }
}

TEST(BenesDensity, SmallRun) {
  const auto r = benes_density_check(4000, 1e-2, 3, 1);
  EXPECT_LE(r.normalization_error, 1e-4);
  EXPECT_LE(r.symmetry_error, 1e-12);
  EXPECT_LE(r.ks_distance, 0.03);  // 1.36 / sqrt(4000) = 0.0215 at the 5% level
  EXPECT_EQ(r.samples, 4000u);
  const auto again = benes_density_check(4000, 1e-2, 3, 2);
  EXPECT_EQ(r.ks_distance, again.ks_distance);
}

TEST(MeritSurrogate, TrapezoidalErrorsDecrease) {
  const auto r = merit_convergence_surrogate({128, 256, 512, 1024});
  ASSERT_EQ(r.levels.size(), 4u);
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_LT(r.levels[i].trapezoidal_error, r.levels[i - 1].trapezoidal_error);
    EXPECT_LT(r.levels[i].euler_error, r.levels[i - 1].euler_error);
  }
  EXPECT_LE(r.levels.back().trapezoidal_error, 1e-3);
}

TEST(RtsEquivalence, SmallGrid) {
  const auto r = rts_equivalence(64, ExperimentConfig{}.optimizer);
  EXPECT_LE(r.trapezoidal_distance, 2e-2);
  EXPECT_LE(r.euler_distance, 5e-2);
}

TEST(BenesStudy, SingleLevelLeavesDistanceEmpty) {
  ExperimentConfig c;
  c.benes.levels = {4};
  const fs::path dir = scratch("benes_single");
  const auto r = run_benes_convergence(c, dir, 1);
  const auto rows = read_csv(dir / "convergence.csv");
  ASSERT_EQ(rows.size(), 4u);  // header + one level per kind
  EXPECT_EQ(rows[0][2], "sup_distance");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][2], "") << i;
  for (const char* kind : {"euler", "trapezoidal", "exact"})
    EXPECT_TRUE(fs::exists(dir / (std::string("paths_") + kind + "_4.csv"))) << kind;
  EXPECT_EQ(r.studies.size(), 3u);
}

TEST(VdpStudy, SingleReplicateIsBitwiseReproducible) {
  ExperimentConfig c;
  c.vdp.replicates = 1;
  c.vdp.horizon = 4.0;
  c.vdp.estimation_step = 1e-2;
  c.vdp.sim_step = 1e-3;
  const fs::path a = scratch("vdp_a"), b = scratch("vdp_b");
  const auto ra = run_vdp_robust(c, a, 1);
  run_vdp_robust(c, b, 3);
  for (const char* f : {"ise.csv", "summary.json"}) EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  EXPECT_TRUE(fs::exists(a / "timing.csv"));
  const auto again = summarize_ise_csv(a / "ise.csv");
  ASSERT_EQ(again.summary.size(), ra.summary.size());
  for (std::size_t i = 0; i < ra.summary.size(); ++i) EXPECT_EQ(*again.summary[i].median, *ra.summary[i].median);
}

TEST(VdpStudy, NoiselessDataRecoversTruth) {
  VdpRobustConfig vc;
  vc.horizon = 8.0;
  vc.sigma_y = 1e-3;
  vc.p_outlier = 0.0;
  vc.estimation_step = 5e-3;
  const Model m = builtin_model("vdp");
  RngStream rng(77, 0);
  const Vector x0 = sample_gaussian(Vector::Zero(2), vc.initial_variance * Matrix::Identity(2, 2), rng);
  const DiscretePath truth = strong_order15(*m.drift, m.diffusion, x0, vc.sim_step, vc.horizon, rng);
  const auto sim = sample_measurements(truth, vc.measurement_step, vc.sigma_y, vc.sigma_outlier, 0.0, 0, rng);
  const Problem p = vdp_problem(vc, sim);
  const TimeGrid g = make_uniform_grid(vc.horizon, 1600, sim.times);
  const DiscretePath start = initial_path(g, p, InitStrategy::meas_interp);
  const double zero_ise = compute_ise(truth, DiscretePath::constant(g, Vector::Zero(2)));
  const double bound = 0.05;
  for (MeritKind k : {MeritKind::euler, MeritKind::trapezoidal}) {
    const auto r = solve(p, k, start, ExperimentConfig{}.optimizer);
    const double ise = compute_ise(truth, r.path);
    EXPECT_LT(ise, bound) << to_string(k);
    EXPECT_LT(ise, zero_ise) << to_string(k);
  }
}

TEST(Validate, CleanRunPasses) {
  ValidateOptions v;
  v.config.gradient_cases = 10;
  v.config.ks_samples = 2000;
  v.config.ks_step = 1e-2;
  v.config.model_samples = 20;
  v.optimizer = ExperimentConfig{}.optimizer;
  const auto r = run_validate(v);
  // 2000 samples cannot resolve the 0.01 KS threshold; only that check is relaxed here.
  for (const auto& c : r.checks) {
    if (c.name == "benes_density:ks")
      EXPECT_LE(c.value, 0.03);
    else
      EXPECT_TRUE(c.passed) << c.name << " " << c.value;
  }
  v.inject_gradient_fault = true;
  const auto bad = run_validate(v);
  EXPECT_FALSE(bad.passed());
  bool named = false;
  for (const auto& c : bad.checks)
    if (c.name == "gradient:euler_energy") named = !c.passed;
  EXPECT_TRUE(named);
}
