// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   sdemap_acceptance [--work DIR] [--only N]...

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sdemap/config.hpp"
#include "sdemap/csv.hpp"
#include "sdemap/experiments.hpp"

namespace fs = std::filesystem;
using namespace sdemap;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Appends "name=value (op limit)" and folds the comparison into ok.
class Detail {
 public:
  void le(const std::string& name, double value, double limit) { add(name, value, "<=", limit, value <= limit); }
  void ge(const std::string& name, double value, double limit) { add(name, value, ">=", limit, value >= limit); }
  void flag(const std::string& text, bool holds) {
    sep();
    s_ << text << (holds ? "" : " [violated]");
    ok_ = ok_ && holds;
  }
  Outcome outcome() const { return {ok_, s_.str()}; }

 private:
  void add(const std::string& name, double value, const char* op, double limit, bool holds) {
    sep();
    s_ << name << '=' << fmt(value) << " (" << op << ' ' << fmt(limit) << ')' << (holds ? "" : " [violated]");
    ok_ = ok_ && holds;
  }
  void sep() {
    if (!first_) s_ << "; ";
    first_ = false;
  }
  std::ostringstream s_;
  bool ok_ = true;
  bool first_ = true;
};

ExperimentConfig base_config() {
  ExperimentConfig c;
  c.check();
  return c;
}

ExperimentConfig vdp_config() {
  ExperimentConfig c = base_config();
  c.vdp.replicates = 50;
  c.vdp.sigma_outlier = 3.0;
  c.vdp.p_outlier = 0.25;
  c.vdp.measurement_step = 0.1;
  c.vdp.horizon = 16.0;
  c.vdp.estimation_step = 1e-2;
  c.check();
  return c;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + fmt(x);
  return s;
}

Outcome criterion1(const fs::path&) {
  const auto r = gradient_suite(100, base_config().seed);
  double worst = 0.0;
  std::string worst_name;
  Detail d;
  for (const auto& c : r.checks) {
    if (c.max_error >= worst) {
      worst = c.max_error;
      worst_name = c.name;
    }
    d.flag(c.name + " cases=" + std::to_string(c.cases), c.cases > 0);
  }
  d.le("max_rel_err(" + worst_name + ")", worst, 1e-6);
  return d.outcome();
}

Outcome criterion2(const fs::path&) {
  const auto r = rts_equivalence(256, base_config().optimizer);
  Detail d;
  d.le("sup|V-max - RTS|", r.trapezoidal_distance, 1e-3);
  d.le("sup|S-max - RTS|", r.euler_distance, 5e-3);
  return d.outcome();
}

Outcome criterion3(const fs::path& work) {
  const ExperimentConfig c = base_config();
  const auto r = run_benes_convergence(c, work / "benes_threads1", 1);
  Detail d;
  d.flag("N_finest=" + std::to_string(c.benes.levels.back()), c.benes.levels.back() == 1024);
  for (const auto& k : r.finest_distances) {
    if (!k.distance) {
      d.flag(to_string(k.a) + " vs " + to_string(k.b) + " missing", false);
      continue;
    }
    if (k.a == MeritKind::trapezoidal && k.b == MeritKind::exact) d.le("sup(trap, exact)", *k.distance, 0.01);
    if (k.a == MeritKind::euler && k.b == MeritKind::trapezoidal) d.ge("sup(euler, trap)", *k.distance, 0.05);
  }
  for (const auto& s : r.studies) {
    if (s.kind != MeritKind::euler) continue;
    // The finest level is the reference (distance 0); the last three levels below it must decrease.
    std::vector<double> dist;
    const std::size_t n = s.levels.size();
    for (std::size_t i = n >= 4 ? n - 4 : 0; i + 1 < n; ++i) dist.push_back(s.levels[i].sup_distance.value_or(NAN));
    d.flag("euler distances " + join(dist) + " decreasing", dist.size() == 3 && strictly_decreasing(dist));
  }
  return d.outcome();
}

Outcome criterion4(const fs::path&) {
  const auto r = merit_convergence_surrogate({64, 128, 256, 512, 1024});
  std::vector<double> se, ve;
  for (std::size_t i = 1; i < r.levels.size(); ++i) {
    se.push_back(r.levels[i].euler_error);
    ve.push_back(r.levels[i].trapezoidal_error);
  }
  Detail d;
  d.le("|S_1024 - H_e|", r.levels.back().euler_error, 1e-3);
  d.le("|V_1024 - H|", r.levels.back().trapezoidal_error, 1e-3);
  d.flag("S errors " + join(se) + " decreasing", strictly_decreasing(se));
  d.flag("V errors " + join(ve) + " decreasing", strictly_decreasing(ve));
  return d.outcome();
}

Outcome criterion5(const fs::path&) {
  const auto r = benes_density_check(100000, 1e-4, base_config().seed, 1);
  Detail d;
  d.le("normalization_err", r.normalization_error, 1e-4);
  d.le("KS(1e5 EM samples)", r.ks_distance, 0.01);
  return d.outcome();
}

Outcome criterion6(const fs::path& work) {
  const auto r = run_vdp_robust(vdp_config(), work / "vdp_threads1", 1);
  Detail d;
  std::vector<double> medians;
  for (const auto& s : r.summary) {
    d.flag(to_string(s.kind) + " completed " + std::to_string(s.completed) + "/50", s.completed == 50 && s.failures == 0);
    if (s.median) medians.push_back(*s.median);
  }
  if (medians.size() == 2) {
    const double lo = std::min(medians[0], medians[1]), hi = std::max(medians[0], medians[1]);
    d.le("median ISE euler=" + fmt(medians[0]) + " trap=" + fmt(medians[1]) + " rel_diff", (hi - lo) / lo, 0.25);
  } else {
    d.flag("two medians", false);
  }
  d.le("|outlier_fraction - 0.25|", std::abs(r.outlier_fraction - 0.25), 0.02);
  return d.outcome();
}

Outcome criterion7(const fs::path&) {
  const Model ou = builtin_model("ou");
  const auto s = strong_order_study(*ou.drift, ou.diffusion, Vector::Constant(1, 1.0), 1.0, {1e-2, 5e-3, 2.5e-3}, 200,
                                    16, base_config().seed);
  const auto m = wiener_pair_moments(1e-2, 100000, base_config().seed);
  Detail d;
  d.flag("rms " + join(s.rms_errors), true);
  d.ge("slope", s.slope, 1.2);
  d.le("slope", s.slope, 1.8);
  d.le("moment_rel_err", m.max_relative_error, 0.03);
  return d.outcome();
}

// Byte comparison of every CSV (and summary.json) in a against b. timing.csv
// holds wall-clock times and is excluded.
void compare_dirs(const fs::path& a, const fs::path& b, Detail& d) {
  std::set<std::string> names;
  for (const auto& dir : {a, b})
    for (const auto& e : fs::directory_iterator(dir)) names.insert(e.path().filename().string());
  std::size_t compared = 0;
  for (const auto& n : names) {
    if (n == "timing.csv") continue;
    if (!n.ends_with(".csv") && !n.ends_with(".json")) continue;
    const bool same = fs::exists(a / n) && fs::exists(b / n) && read_file(a / n) == read_file(b / n);
    if (!same) d.flag(n + " identical", false);
    ++compared;
  }
  d.flag(a.filename().string() + " vs " + b.filename().string() + ": " + std::to_string(compared) + " files", compared > 0);
}

Outcome criterion8(const fs::path& work) {
  Detail d;
  if (!fs::exists(work / "benes_threads1")) run_benes_convergence(base_config(), work / "benes_threads1", 1);
  run_benes_convergence(base_config(), work / "benes_threads3", 3);
  compare_dirs(work / "benes_threads1", work / "benes_threads3", d);
  if (!fs::exists(work / "vdp_threads1")) run_vdp_robust(vdp_config(), work / "vdp_threads1", 1);
  run_vdp_robust(vdp_config(), work / "vdp_threads4", 4);
  compare_dirs(work / "vdp_threads1", work / "vdp_threads4", d);
  return d.outcome();
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0: no runtime limit
  std::function<Outcome(const fs::path&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "sdemap_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      only.insert(std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: sdemap_acceptance [--work DIR] [--only N]...\n";
      return 2;
    }
  }
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<Criterion> criteria{
      {1, "gradient suite (100 cases)", 30, criterion1},
      {2, "linear-Gaussian oracle, OU N=256", 10, criterion2},
      {3, "Benes convergence study", 120, criterion3},
      {4, "merit convergence surrogate", 10, criterion4},
      {5, "Benes exact density", 60, criterion5},
      {6, "Van der Pol study M=50", 900, criterion6},
      {7, "order-1.5 integrator on OU", 120, criterion7},
      {8, "determinism across --threads", 0, criterion8},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(work);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string runtime = "runtime " + fmt(secs) + " s";
    if (c.budget_seconds > 0) {
      const bool in_budget = secs <= c.budget_seconds;
      runtime += " (<= " + fmt(c.budget_seconds) + " s)" + (in_budget ? "" : " [violated]");
      o.passed = o.passed && in_budget;
    }
    std::cout << (o.passed ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name << ": " << o.detail << "; "
              << runtime << std::endl;
    if (!o.passed) ++failed;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
