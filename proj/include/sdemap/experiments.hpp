#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sdemap/config.hpp"
#include "sdemap/optimizer.hpp"
#include "sdemap/simulate.hpp"

namespace sdemap {

/// Runs fn(0) .. fn(count - 1) on up to `threads` workers. Work items are
/// claimed in index order; the first exception (lowest index) is rethrown
/// after all workers finish.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Problems

/// Scalar Benes model, Gaussian prior and one Gaussian measurement.
Problem benes_problem(const BenesConvergenceConfig& config);

/// Van der Pol model with Student-t likelihoods on the observed component.
Problem vdp_problem(const VdpRobustConfig& config, const SimulatedMeasurements& measurements);

/// OU model (a = 1, G = 1, nu = N(0, 1)) on [0, 2] with five Gaussian
/// measurements y ~ N(x, 0.1) at t = 0.25, 0.625, 1, 1.375, 1.75.
Problem ou_oracle_problem();

/// int_0^T |X_t - x(t)|^2 dt by the trapezoid rule on the grid of `truth`,
/// with x the piecewise-linear estimate.
double compute_ise(const DiscretePath& truth, const DiscretePath& estimate);

/// Linear-interpolation percentile (p in [0, 1]) of a non-empty sample.
double percentile(std::vector<double> values, double p);

// ---------------------------------------------------------------------------
// Benes convergence study

struct KindDistance {
  MeritKind a;
  MeritKind b;
  std::optional<double> distance;  ///< sup-distance of the finest maximizers
};

struct BenesConvergenceResult {
  std::vector<ConvergenceStudy> studies;
  std::vector<KindDistance> finest_distances;
};

/// Writes paths_{kind}_{N}.csv (t,x), convergence.csv and comparison.csv into
/// out_dir. Optimizer failures are recorded per level and the run continues.
BenesConvergenceResult run_benes_convergence(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                             unsigned threads);

// ---------------------------------------------------------------------------
// Van der Pol robust study

struct IseRecord {
  std::size_t replicate = 0;
  MeritKind kind = MeritKind::euler;
  std::optional<double> ise;  ///< absent when the replicate failed
  std::string status;          ///< optimizer status or "failed"
  int iterations = 0;
  double grad_norm = 0.0;
  std::size_t measurements = 0;
  std::size_t outliers = 0;
  double runtime = 0.0;        ///< seconds; written to timing.csv only
  std::string error;
};

struct KindSummary {
  MeritKind kind = MeritKind::euler;
  std::size_t completed = 0;
  std::size_t failures = 0;
  std::optional<double> median;
  std::optional<double> p5;
  std::optional<double> p95;
};

struct VdpRobustResult {
  std::vector<IseRecord> records;
  std::vector<KindSummary> summary;
  std::size_t measurements = 0;
  std::size_t outliers = 0;
  double outlier_fraction = 0.0;
};

/// Per-kind statistics and outlier fraction from ISE records alone.
VdpRobustResult summarize(std::vector<IseRecord> records);

/// Re-reads ise.csv and summarizes it.
VdpRobustResult summarize_ise_csv(const std::filesystem::path& path);

/// One replicate: order 1.5 simulation, mixture measurements, one solve per kind.
std::vector<IseRecord> run_vdp_replicate(const ExperimentConfig& config, std::size_t replicate);

/// Writes ise.csv, timing.csv and summary.json into out_dir.
VdpRobustResult run_vdp_robust(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                               unsigned threads);

// ---------------------------------------------------------------------------
// Reference checks

struct GradientCheck {
  std::string name;
  std::size_t cases = 0;
  double max_error = 0.0;
};

struct GradientSuiteReport {
  std::vector<GradientCheck> checks;
  double tolerance = 1e-6;
  bool passed() const;
};

/// Random grids (n <= 2, N <= 50), paths and measurements; compares analytic
/// gradients of R, S, U, V, H_e, H, the exact Benes merit and the Student-t
/// log-likelihood against fd_gradient. `inject_fault` perturbs the analytic
/// Euler-energy gradient.
GradientSuiteReport gradient_suite(std::size_t cases, std::uint64_t seed, bool inject_fault = false);

struct RtsEquivalenceReport {
  double trapezoidal_distance = 0.0;
  double euler_distance = 0.0;
  OptimizationStatus trapezoidal_status = OptimizationStatus::max_iter;
  OptimizationStatus euler_status = OptimizationStatus::max_iter;
};

/// Maximizers of V and S on ou_oracle_problem() at N segments against the RTS means.
RtsEquivalenceReport rts_equivalence(std::size_t segments, const OptimizerOptions& opts);

/// Kolmogorov-Smirnov distance of a sample to a continuous CDF.
double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf);

struct BenesDensityReport {
  double normalization_error = 0.0;  ///< max over x0 in {0, 1}, delta in {0.5, 1}
  double symmetry_error = 0.0;
  double ks_distance = 0.0;
  std::size_t samples = 0;
};

/// Normalization by trapezoid quadrature on [-10, 10]; KS distance of
/// Euler-Maruyama samples of X_1 from X_0 = 0 (step h) to the closed-form CDF.
BenesDensityReport benes_density_check(std::size_t samples, double step, std::uint64_t seed, unsigned threads);

struct MeritLevel {
  std::size_t segments = 0;
  double euler = 0.0;        ///< S_i on the restricted path
  double trapezoidal = 0.0;  ///< V_i on the restricted path
  double euler_error = 0.0;  ///< |S_i - H_e|
  double trapezoidal_error = 0.0;  ///< |V_i - H|
};

struct MeritConvergenceReport {
  double energy_limit = 0.0;  ///< H_e(phi)
  double map_limit = 0.0;     ///< H(phi)
  std::vector<MeritLevel> levels;
};

/// Benes problem, phi(t) = sin t on [0, 5]. H and H_e use the 7-point rule on a
/// 4096-segment grid.
MeritConvergenceReport merit_convergence_surrogate(const std::vector<std::size_t>& levels);

struct StrongOrderReport {
  std::vector<double> steps;
  std::vector<double> rms_errors;
  double slope = 0.0;  ///< least-squares slope of log error against log step
};

/// RMS terminal error of the order 1.5 scheme at each step against the same
/// scheme on a grid `refine` times finer than the smallest step, driven by the
/// same Wiener path (dW and dZ aggregated from the fine increments).
StrongOrderReport strong_order_study(const DriftModel& drift, const Diffusion& diffusion, const Vector& x0,
                                     double horizon, const std::vector<double>& steps, std::size_t runs,
                                     int refine, std::uint64_t seed);

struct WienerMomentReport {
  double var_dw = 0.0;
  double cov = 0.0;
  double var_dz = 0.0;
  double max_relative_error = 0.0;  ///< against (h, h^2 / 2, h^3 / 3)
};

WienerMomentReport wiener_pair_moments(double h, std::size_t draws, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Validation suite

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  bool passed() const;
};

struct ValidateOptions {
  ValidateConfig config;
  OptimizerOptions optimizer;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool inject_gradient_fault = false;
};

/// Model identities, gradient cross-checks, Benes density validation and the
/// linear-Gaussian equivalence. Failures are reported, not thrown.
ValidationReport run_validate(const ValidateOptions& options);

}  // namespace sdemap
