#include "sdemap/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "sdemap/csv.hpp"
#include "sdemap/oracle.hpp"

namespace sdemap {

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), count);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Problems

Problem benes_problem(const BenesConvergenceConfig& config) {
  BuiltinParams params;
  params.benes_initial_variance = config.initial_variance;
  Problem p{builtin_model("benes", params), {}, config.horizon};
  p.measurements.push_back({config.measurement_time, Vector::Constant(1, config.measurement_value),
                            GaussianLikelihood::component(1, 0, config.measurement_variance)});
  return p;
}

Problem vdp_problem(const VdpRobustConfig& config, const SimulatedMeasurements& measurements) {
  BuiltinParams params;
  params.vdp_damping = config.damping;
  params.vdp_noise = config.noise;
  params.vdp_initial_variance = config.initial_variance;
  auto lik = std::make_shared<StudentTLikelihood>(config.observed_component, config.sigma_y);
  return Problem{builtin_model("vdp", params), to_measurement_set(measurements, lik), config.horizon};
}

Problem ou_oracle_problem() {
  Problem p{builtin_model("ou"), {}, 2.0};
  const double times[] = {0.25, 0.625, 1.0, 1.375, 1.75};
  const double values[] = {0.8, 0.3, -0.4, 0.1, 0.9};
  auto lik = GaussianLikelihood::component(1, 0, 0.1);
  for (int i = 0; i < 5; ++i) p.measurements.push_back({times[i], Vector::Constant(1, values[i]), lik});
  return p;
}

double compute_ise(const DiscretePath& truth, const DiscretePath& estimate) {
  if (truth.dim() != estimate.dim()) throw std::invalid_argument("compute_ise: dimension mismatch");
  const TimeGrid& grid = truth.grid();
  const double tol = grid.tolerance();
  if (grid.horizon() > estimate.grid().horizon() + tol)
    throw std::invalid_argument("compute_ise: estimate does not cover the true path");
  std::vector<double> err(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    err[k] = (truth.state(k) - estimate.at(grid.time(k))).squaredNorm();
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) total += 0.5 * grid.step(k) * (err[k] + err[k + 1]);
  return total;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("percentile: p must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

// ---------------------------------------------------------------------------
// Benes convergence study

BenesConvergenceResult run_benes_convergence(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                             unsigned threads) {
  config.check();
  const Problem problem = benes_problem(config.benes);
  const auto& kinds = config.benes.kinds;
  StudyOptions study;
  study.init = config.benes.init;
  study.cold_start = config.benes.cold_start;
  study.stop_on_failure = false;

  BenesConvergenceResult out;
  out.studies.resize(kinds.size());
  parallel_for(kinds.size(), threads, [&](std::size_t i) {
    out.studies[i] = convergence_study(problem, kinds[i], config.benes.levels, config.optimizer, study);
  });

  std::filesystem::create_directories(out_dir);
  const bool single = config.benes.levels.size() == 1;
  CsvTable conv({"kind", "N", "sup_distance", "merit", "status", "iterations", "grad_norm", "cold_merit",
                 "cold_distance", "error"});
  for (const auto& s : out.studies) {
    const std::string kind = to_string(s.kind);
    for (const auto& rec : s.levels) {
      if (!rec.result) {
        std::string error = rec.error;
        std::replace(error.begin(), error.end(), ',', ';');
        conv.add_row({kind, std::to_string(rec.segments), "", "", "failed", "", "", "", "", error});
        continue;
      }
      const auto& r = *rec.result;
      CsvTable path({"t", "x"});
      for (std::size_t k = 0; k < r.path.size(); ++k)
        path.add_row({format_double(r.path.grid().time(k)), format_double(r.path.state(k)(0))});
      path.write(out_dir / ("paths_" + kind + "_" + std::to_string(rec.segments) + ".csv"));
      conv.add_row({kind, std::to_string(rec.segments), single ? "" : format_optional(rec.sup_distance),
                    format_double(r.merit), to_string(r.status), std::to_string(r.iterations),
                    format_double(r.grad_norm), format_optional(rec.cold_merit),
                    format_optional(rec.cold_distance), ""});
    }
  }
  conv.write(out_dir / "convergence.csv");

  CsvTable cmp({"kind_a", "kind_b", "N", "sup_distance"});
  for (std::size_t i = 0; i < out.studies.size(); ++i) {
    for (std::size_t j = i + 1; j < out.studies.size(); ++j) {
      const auto& a = out.studies[i].levels.back().result;
      const auto& b = out.studies[j].levels.back().result;
      KindDistance d{out.studies[i].kind, out.studies[j].kind, std::nullopt};
      if (a && b) d.distance = sup_distance(a->path, b->path);
      out.finest_distances.push_back(d);
      cmp.add_row({to_string(d.a), to_string(d.b), std::to_string(config.benes.levels.back()),
                   format_optional(d.distance)});
    }
  }
  cmp.write(out_dir / "comparison.csv");
  return out;
}

// ---------------------------------------------------------------------------
// Van der Pol robust study

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

VdpRobustResult summarize(std::vector<IseRecord> records) {
  VdpRobustResult out;
  std::vector<MeritKind> order;
  std::map<MeritKind, std::vector<double>> values;
  std::map<MeritKind, std::size_t> failures;
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_replicate;
  for (const auto& r : records) {
    if (std::find(order.begin(), order.end(), r.kind) == order.end()) order.push_back(r.kind);
    if (r.ise)
      values[r.kind].push_back(*r.ise);
    else
      ++failures[r.kind];
    per_replicate[r.replicate] = {r.measurements, r.outliers};
  }
  for (auto kind : order) {
    KindSummary s;
    s.kind = kind;
    s.completed = values[kind].size();
    s.failures = failures[kind];
    if (!values[kind].empty()) {
      s.median = percentile(values[kind], 0.5);
      s.p5 = percentile(values[kind], 0.05);
      s.p95 = percentile(values[kind], 0.95);
    }
    out.summary.push_back(s);
  }
  for (const auto& [rep, counts] : per_replicate) {
    out.measurements += counts.first;
    out.outliers += counts.second;
  }
  out.outlier_fraction =
      out.measurements ? static_cast<double>(out.outliers) / static_cast<double>(out.measurements) : 0.0;
  out.records = std::move(records);
  return out;
}

VdpRobustResult summarize_ise_csv(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw std::runtime_error("summarize_ise_csv: empty file");
  std::vector<IseRecord> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& c = rows[i];
    if (c.size() != 8) throw std::runtime_error("summarize_ise_csv: malformed row " + std::to_string(i));
    IseRecord r;
    r.replicate = std::stoull(c[0]);
    r.kind = parse_merit_kind(c[1]);
    if (!c[2].empty()) r.ise = std::stod(c[2]);
    r.status = c[3];
    r.iterations = c[4].empty() ? 0 : std::stoi(c[4]);
    r.grad_norm = c[5].empty() ? 0.0 : std::stod(c[5]);
    r.measurements = std::stoull(c[6]);
    r.outliers = std::stoull(c[7]);
    records.push_back(std::move(r));
  }
  return summarize(std::move(records));
}

std::vector<IseRecord> run_vdp_replicate(const ExperimentConfig& config, std::size_t replicate) {
  const auto& vc = config.vdp;
  std::vector<IseRecord> out;
  for (auto kind : vc.kinds) {
    IseRecord r;
    r.replicate = replicate;
    r.kind = kind;
    out.push_back(r);
  }
  auto fail_all = [&](const std::string& msg) {
    for (auto& r : out) {
      r.status = "failed";
      r.error = msg;
    }
    return out;
  };

  RngStream rng(config.seed, replicate);
  Problem problem = vdp_problem(vc, {});
  std::optional<DiscretePath> truth;
  SimulatedMeasurements sim;
  try {
    const Vector x0 = sample_gaussian(Vector::Zero(2), vc.initial_variance * Matrix::Identity(2, 2), rng);
    truth = strong_order15(*problem.model.drift, problem.model.diffusion, x0, vc.sim_step, vc.horizon, rng);
    sim = sample_measurements(*truth, vc.measurement_step, vc.sigma_y, vc.sigma_outlier, vc.p_outlier,
                              vc.observed_component, rng);
    problem = vdp_problem(vc, sim);
  } catch (const std::exception& e) {
    return fail_all(e.what());
  }
  for (auto& r : out) {
    r.measurements = sim.times.size();
    r.outliers = sim.outlier_count();
  }

  const auto segments = static_cast<std::size_t>(std::llround(vc.horizon / vc.estimation_step));
  std::optional<DiscretePath> start;
  try {
    const TimeGrid grid = make_uniform_grid(vc.horizon, segments, measurement_times(problem.measurements));
    start = initial_path(grid, problem, vc.init);
  } catch (const std::exception& e) {
    return fail_all(e.what());
  }

  for (auto& r : out) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const OptimizationResult res = solve(problem, r.kind, *start, config.optimizer);
      r.ise = compute_ise(*truth, res.path);
      r.status = to_string(res.status);
      r.iterations = res.iterations;
      r.grad_norm = res.grad_norm;
    } catch (const std::exception& e) {
      r.ise.reset();
      r.status = "failed";
      r.error = e.what();
    }
    r.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return out;
}

VdpRobustResult run_vdp_robust(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                               unsigned threads) {
  config.check();
  const std::size_t m = config.vdp.replicates;
  std::vector<std::vector<IseRecord>> per(m);
  parallel_for(m, threads, [&](std::size_t i) { per[i] = run_vdp_replicate(config, i); });

  std::vector<IseRecord> records;
  for (auto& v : per)
    for (auto& r : v) records.push_back(std::move(r));
  VdpRobustResult out = summarize(std::move(records));

  std::filesystem::create_directories(out_dir);
  CsvTable ise({"replicate", "kind", "ise", "status", "iterations", "grad_norm", "measurements", "outliers"});
  CsvTable timing({"replicate", "kind", "runtime_seconds"});
  for (const auto& r : out.records) {
    const bool ok = r.ise.has_value();
    ise.add_row({std::to_string(r.replicate), to_string(r.kind), format_optional(r.ise), r.status,
                 ok ? std::to_string(r.iterations) : "", ok ? format_double(r.grad_norm) : "",
                 std::to_string(r.measurements), std::to_string(r.outliers)});
    timing.add_row({std::to_string(r.replicate), to_string(r.kind), format_double(r.runtime)});
  }
  ise.write(out_dir / "ise.csv");
  timing.write(out_dir / "timing.csv");

  nlohmann::json kinds = nlohmann::json::object();
  for (const auto& s : out.summary) {
    kinds[to_string(s.kind)] = {{"completed", s.completed},
                                {"failures", s.failures},
                                {"median", optional_json(s.median)},
                                {"p5", optional_json(s.p5)},
                                {"p95", optional_json(s.p95)}};
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& r : out.records)
    if (!r.ise) failures.push_back({{"replicate", r.replicate}, {"kind", to_string(r.kind)}, {"error", r.error}});
  const nlohmann::json summary = {{"replicates", m},
                                  {"seed", config.seed},
                                  {"kinds", kinds},
                                  {"measurements", out.measurements},
                                  {"outliers", out.outliers},
                                  {"outlier_fraction", out.outlier_fraction},
                                  {"failures", failures}};
  atomic_write(out_dir / "summary.json", summary.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------------------
// Gradient suite

bool GradientSuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [&](const auto& c) { return c.max_error <= tolerance; });
}

namespace {

struct RandomCase {
  Problem problem;
  DiscretePath path;
};

RandomCase random_case(RngStream& rng) {
  const int which = static_cast<int>(rng.uniform() * 3.0);
  BuiltinParams params;
  params.ou_rate = 0.5 + 1.5 * rng.uniform();
  const char* names[] = {"benes", "vdp", "ou"};
  Model model = builtin_model(names[std::min(which, 2)], params);
  const Index n = model.dim();
  const double horizon = which == 1 ? 0.2 + 0.6 * rng.uniform() : 0.5 + 1.5 * rng.uniform();
  const auto segments = static_cast<std::size_t>(1 + std::floor(rng.uniform() * 50.0));

  std::vector<double> times(segments + 1);
  for (std::size_t k = 0; k <= segments; ++k) {
    const double jitter = (k == 0 || k == segments) ? 0.0 : 0.4 * (rng.uniform() - 0.5);
    times[k] = horizon * (static_cast<double>(k) + jitter) / static_cast<double>(segments);
  }
  times.back() = horizon;

  MeasurementSet meas;
  std::vector<double> meas_times;
  const auto count = static_cast<int>(rng.uniform() * 4.0);
  for (int i = 0; i < count; ++i) {
    const auto k = std::min(segments, static_cast<std::size_t>(rng.uniform() * static_cast<double>(segments + 1)));
    const Index comp = static_cast<Index>(rng.uniform() * static_cast<double>(n)) % n;
    std::shared_ptr<const MeasurementLikelihood> lik;
    if (rng.bernoulli(0.5))
      lik = GaussianLikelihood::component(n, comp, 0.1 + rng.uniform());
    else
      lik = std::make_shared<StudentTLikelihood>(comp, 0.2 + rng.uniform());
    meas.push_back({times[k], Vector::Constant(1, rng.normal()), lik});
    meas_times.push_back(times[k]);
  }
  std::sort(meas_times.begin(), meas_times.end());
  meas_times.erase(std::unique(meas_times.begin(), meas_times.end()), meas_times.end());
  TimeGrid grid(times, meas_times);

  const double scale = which == 1 ? 0.8 : 1.0;
  Matrix states(n, static_cast<Index>(segments + 1));
  for (Index c = 0; c < states.cols(); ++c)
    for (Index r = 0; r < n; ++r) states(r, c) = scale * rng.normal();
  return {Problem{std::move(model), std::move(meas), horizon}, DiscretePath(std::move(grid), std::move(states))};
}

double check_gradient(const std::function<MeritValue(const DiscretePath&)>& merit, const DiscretePath& path,
                      bool fault) {
  const MeritValue v = merit(path);
  if (!v.is_finite() || !v.gradient) throw std::runtime_error("gradient check: merit not finite");
  Vector analytic = *v.gradient;
  if (fault) analytic(0) += 1e-3 * (1.0 + std::abs(analytic(0)));
  const TimeGrid& grid = path.grid();
  const Index dim = path.dim();
  const Vector fd = fd_gradient(
      [&](const Vector& x) { return merit(DiscretePath::from_flat(grid, dim, x)).value; }, path.flat());
  return gradient_relative_error(analytic, fd);
}

}  // namespace

GradientSuiteReport gradient_suite(std::size_t cases, std::uint64_t seed, bool inject_fault) {
  using Fn = std::function<MeritValue(const DiscretePath&, const Problem&)>;
  const std::vector<std::pair<std::string, Fn>> functionals = {
      {"euler_energy",
       [](const DiscretePath& p, const Problem& pr) {
         return euler_energy(p, *pr.model.drift, pr.model.diffusion);
       }},
      {"euler_merit", [](const DiscretePath& p, const Problem& pr) { return euler_merit(p, pr); }},
      {"trapezoidal_om",
       [](const DiscretePath& p, const Problem& pr) {
         return trapezoidal_om(p, *pr.model.drift, pr.model.diffusion);
       }},
      {"trapezoidal_merit", [](const DiscretePath& p, const Problem& pr) { return trapezoidal_merit(p, pr); }},
      {"energy_merit", [](const DiscretePath& p, const Problem& pr) { return energy_merit(p, pr); }},
      {"map_merit", [](const DiscretePath& p, const Problem& pr) { return map_merit(p, pr); }},
  };

  GradientSuiteReport report;
  std::vector<GradientCheck> checks;
  for (const auto& f : functionals) checks.push_back({f.first, 0, 0.0});
  GradientCheck exact{"benes_exact_merit", 0, 0.0};
  GradientCheck student{"student_t_loglik", 0, 0.0};

  for (std::size_t c = 0; c < cases; ++c) {
    RngStream rng(seed, c);
    // Redraw until the trapezoidal determinant condition holds on the sample.
    std::optional<RandomCase> rc;
    for (int attempt = 0; attempt < 20 && !rc; ++attempt) {
      RandomCase cand = random_case(rng);
      try {
        trapezoidal_om(cand.path, *cand.problem.model.drift, cand.problem.model.diffusion);
        rc = std::move(cand);
      } catch (const MeshTooCoarseError&) {
      }
    }
    if (!rc) throw std::runtime_error("gradient_suite: could not draw a valid case");

    for (std::size_t i = 0; i < functionals.size(); ++i) {
      const auto& fn = functionals[i].second;
      const bool fault = inject_fault && functionals[i].first == "euler_energy";
      const double err = check_gradient([&](const DiscretePath& p) { return fn(p, rc->problem); }, rc->path, fault);
      checks[i].max_error = std::max(checks[i].max_error, err);
      ++checks[i].cases;
    }
    if (rc->problem.model.drift->name() == "benes") {
      const double err = check_gradient(
          [&](const DiscretePath& p) { return benes_exact_merit(p, rc->problem); }, rc->path, false);
      exact.max_error = std::max(exact.max_error, err);
      ++exact.cases;
    }

    const Index n = 1 + static_cast<Index>(rng.uniform() * 2.0) % 2;
    const Index comp = static_cast<Index>(rng.uniform() * static_cast<double>(n)) % n;
    const double sigma = 0.2 + 2.0 * rng.uniform();
    const double y = rng.normal();
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = y + 2.0 * sigma * rng.normal();
    const Vector analytic = student_t_loglik(y, x, sigma, comp).second;
    const Vector fd = fd_gradient([&](const Vector& v) { return student_t_loglik(y, v, sigma, comp).first; }, x);
    student.max_error = std::max(student.max_error, gradient_relative_error(analytic, fd));
    ++student.cases;
  }
  checks.push_back(exact);
  checks.push_back(student);
  report.checks = std::move(checks);
  return report;
}

// ---------------------------------------------------------------------------
// Linear-Gaussian equivalence

RtsEquivalenceReport rts_equivalence(std::size_t segments, const OptimizerOptions& opts) {
  const Problem problem = ou_oracle_problem();
  const TimeGrid grid = make_uniform_grid(problem.horizon, segments, measurement_times(problem.measurements));
  const auto [lgs, meas] = linear_gaussian_from_problem(problem);
  const SmootherResult rts = rts_smoother(lgs, grid, meas);
  const DiscretePath x0 = initial_path(grid, problem, InitStrategy::prior_mean);

  auto distance = [&](const DiscretePath& p) {
    double d = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) d = std::max(d, (p.state(k) - rts.means[k]).norm());
    return d;
  };
  RtsEquivalenceReport r;
  const OptimizationResult trap = solve(problem, MeritKind::trapezoidal, x0, opts);
  const OptimizationResult euler = solve(problem, MeritKind::euler, x0, opts);
  r.trapezoidal_distance = distance(trap.path);
  r.euler_distance = distance(euler.path);
  r.trapezoidal_status = trap.status;
  r.euler_status = euler.status;
  return r;
}

// ---------------------------------------------------------------------------
// Benes density

double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

BenesDensityReport benes_density_check(std::size_t samples, double step, std::uint64_t seed, unsigned threads) {
  BenesDensityReport r;
  r.samples = samples;

  const int points = 40001;
  const double lo = -10.0, hi = 10.0;
  const double dx = (hi - lo) / (points - 1);
  for (double x0 : {0.0, 1.0}) {
    for (double delta : {0.5, 1.0}) {
      double sum = 0.0;
      for (int i = 0; i < points; ++i) {
        const double w = (i == 0 || i == points - 1) ? 0.5 : 1.0;
        sum += w * std::exp(benes_exact_log_transition(x0, lo + i * dx, delta));
      }
      r.normalization_error = std::max(r.normalization_error, std::abs(sum * dx - 1.0));
    }
  }
  for (int i = 1; i <= 100; ++i) {
    const double x = 0.05 * i;
    r.symmetry_error = std::max(r.symmetry_error, std::abs(benes_exact_log_transition(0.0, x, 1.0) -
                                                           benes_exact_log_transition(0.0, -x, 1.0)));
  }

  const auto steps = static_cast<std::size_t>(std::llround(1.0 / step));
  const double h = 1.0 / static_cast<double>(steps);
  const double sh = std::sqrt(h);
  const std::size_t block = 1000;
  const std::size_t blocks = (samples + block - 1) / block;
  std::vector<double> x(samples);
  parallel_for(blocks, threads, [&](std::size_t b) {
    RngStream rng(seed, b);
    const std::size_t end = std::min(samples, (b + 1) * block);
    // Eight samples advance together so consecutive tanh calls are independent.
    constexpr std::size_t lanes = 8;
    for (std::size_t i = b * block; i < end; i += lanes) {
      const std::size_t width = std::min(lanes, end - i);
      double v[lanes] = {};
      for (std::size_t k = 0; k < steps; ++k)
        for (std::size_t j = 0; j < width; ++j) v[j] += std::tanh(v[j]) * h + sh * rng.normal();
      std::copy(v, v + width, x.begin() + static_cast<std::ptrdiff_t>(i));
    }
  });
  r.ks_distance = ks_distance(std::move(x), [](double z) { return benes_exact_cdf(0.0, z, 1.0); });
  return r;
}

// ---------------------------------------------------------------------------
// Merit convergence surrogate

MeritConvergenceReport merit_convergence_surrogate(const std::vector<std::size_t>& levels) {
  const Problem problem = benes_problem({});
  const SmoothPath phi{[](double t) { return Vector::Constant(1, std::sin(t)); },
                       [](double t) { return Vector::Constant(1, std::cos(t)); }};
  const auto meas = measurement_times(problem.measurements);
  const TimeGrid fine = make_uniform_grid(problem.horizon, 4096, meas);
  const auto rule = QuadratureRule::gauss_legendre(7);
  MeritConvergenceReport r;
  r.energy_limit = energy_merit(phi, fine, problem, rule);
  r.map_limit = map_merit(phi, fine, problem, rule);
  for (std::size_t n : levels) {
    const TimeGrid grid = make_uniform_grid(problem.horizon, n, meas);
    Matrix states(1, static_cast<Index>(grid.size()));
    for (std::size_t k = 0; k < grid.size(); ++k) states(0, static_cast<Index>(k)) = std::sin(grid.time(k));
    const DiscretePath path(grid, std::move(states));
    MeritLevel lvl;
    lvl.segments = n;
    lvl.euler = euler_merit(path, problem).value;
    lvl.trapezoidal = trapezoidal_merit(path, problem).value;
    lvl.euler_error = std::abs(lvl.euler - r.energy_limit);
    lvl.trapezoidal_error = std::abs(lvl.trapezoidal - r.map_limit);
    r.levels.push_back(lvl);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Strong order

StrongOrderReport strong_order_study(const DriftModel& drift, const Diffusion& diffusion, const Vector& x0,
                                     double horizon, const std::vector<double>& steps, std::size_t runs,
                                     int refine, std::uint64_t seed) {
  if (steps.empty() || runs == 0 || refine < 1) throw std::invalid_argument("strong_order_study: bad arguments");
  const double hf = *std::min_element(steps.begin(), steps.end()) / refine;
  const auto fine_steps = static_cast<std::size_t>(std::llround(horizon / hf));
  std::vector<std::size_t> ratio;
  for (double h : steps) {
    const auto r = static_cast<std::size_t>(std::llround(h / hf));
    if (r == 0 || fine_steps % r != 0 || std::abs(static_cast<double>(r) * hf - h) > 1e-12 * h)
      throw std::invalid_argument("strong_order_study: steps must be multiples of the reference step");
    ratio.push_back(r);
  }
  const Index m = diffusion.matrix().cols();

  std::vector<double> sq(steps.size(), 0.0);
  Matrix dw(m, static_cast<Index>(fine_steps)), dz(m, static_cast<Index>(fine_steps));
  for (std::size_t run = 0; run < runs; ++run) {
    RngStream rng(seed, run);
    for (std::size_t k = 0; k < fine_steps; ++k) {
      const WienerPair p = draw_wiener_pair(m, hf, rng);
      dw.col(static_cast<Index>(k)) = p.dw;
      dz.col(static_cast<Index>(k)) = p.dz;
    }
    Vector ref = x0;
    for (std::size_t k = 0; k < fine_steps; ++k)
      ref = strong_order15_step(drift, diffusion, static_cast<double>(k) * hf, ref, hf,
                                dw.col(static_cast<Index>(k)), dz.col(static_cast<Index>(k)));

    for (std::size_t s = 0; s < steps.size(); ++s) {
      const std::size_t r = ratio[s];
      const double h = static_cast<double>(r) * hf;
      Vector x = x0;
      for (std::size_t c = 0; c < fine_steps / r; ++c) {
        Vector w = Vector::Zero(m), z = Vector::Zero(m);
        for (std::size_t i = 0; i < r; ++i) {
          const auto k = static_cast<Index>(c * r + i);
          z += dz.col(k) + w * hf;
          w += dw.col(k);
        }
        x = strong_order15_step(drift, diffusion, static_cast<double>(c) * h, x, h, w, z);
      }
      sq[s] += (x - ref).squaredNorm();
    }
  }

  StrongOrderReport out;
  out.steps = steps;
  for (double v : sq) out.rms_errors.push_back(std::sqrt(v / static_cast<double>(runs)));
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(steps.size());
  for (std::size_t s = 0; s < steps.size(); ++s) {
    mx += std::log(steps[s]) / n;
    my += std::log(out.rms_errors[s]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const double dx = std::log(steps[s]) - mx;
    sxy += dx * (std::log(out.rms_errors[s]) - my);
    sxx += dx * dx;
  }
  out.slope = sxy / sxx;
  return out;
}

WienerMomentReport wiener_pair_moments(double h, std::size_t draws, std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::vector<double> w(draws), z(draws);
  for (std::size_t i = 0; i < draws; ++i) {
    const WienerPair p = draw_wiener_pair(1, h, rng);
    w[i] = p.dw(0);
    z[i] = p.dz(0);
  }
  const double n = static_cast<double>(draws);
  const double mw = std::accumulate(w.begin(), w.end(), 0.0) / n;
  const double mz = std::accumulate(z.begin(), z.end(), 0.0) / n;
  WienerMomentReport r;
  for (std::size_t i = 0; i < draws; ++i) {
    r.var_dw += (w[i] - mw) * (w[i] - mw);
    r.cov += (w[i] - mw) * (z[i] - mz);
    r.var_dz += (z[i] - mz) * (z[i] - mz);
  }
  r.var_dw /= n - 1.0;
  r.cov /= n - 1.0;
  r.var_dz /= n - 1.0;
  r.max_relative_error = std::max({std::abs(r.var_dw / h - 1.0), std::abs(r.cov / (0.5 * h * h) - 1.0),
                                   std::abs(r.var_dz / (h * h * h / 3.0) - 1.0)});
  return r;
}

// ---------------------------------------------------------------------------
// Validation suite

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

ValidationReport run_validate(const ValidateOptions& options) {
  ValidationReport report;
  auto add = [&](std::string name, double value, double threshold) {
    report.checks.push_back({std::move(name), value <= threshold, value, threshold});
  };

  for (const char* name : {"benes", "vdp", "ou"}) {
    const Model model = builtin_model(name);
    const auto v = validate_model(*model.drift, options.config.model_samples, options.seed);
    add(std::string("model:") + name + ":divergence", v.max_divergence_error, 1e-10);
    add(std::string("model:") + name + ":jacobian", v.max_jacobian_rel_error, 1e-5);
  }

  const auto grads = gradient_suite(options.config.gradient_cases, options.seed, options.inject_gradient_fault);
  for (const auto& c : grads.checks) add("gradient:" + c.name, c.max_error, grads.tolerance);

  const auto dens = benes_density_check(options.config.ks_samples, options.config.ks_step, options.seed,
                                        options.threads);
  add("benes_density:normalization", dens.normalization_error, 1e-4);
  add("benes_density:symmetry", dens.symmetry_error, 1e-12);
  add("benes_density:ks", dens.ks_distance, 0.01);

  const auto rts = rts_equivalence(256, options.optimizer);
  add("rts:trapezoidal", rts.trapezoidal_distance, 1e-3);
  add("rts:euler", rts.euler_distance, 5e-3);
  return report;
}

}  // namespace sdemap
