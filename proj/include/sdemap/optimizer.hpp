#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sdemap/functionals.hpp"

namespace sdemap {

struct OptimizerOptions {
  double grad_tol = 1e-8;      ///< stop when ||grad||_inf <= grad_tol
  int max_iter = 500;
  int memory = 10;             ///< L-BFGS history length
  double armijo = 1e-4;        ///< sufficient-increase constant
  double backtrack = 0.5;      ///< step shrink factor in (0, 1)
  int max_backtracks = 60;
  bool precondition = true;    ///< use the path-smoothness metric as initial inverse Hessian
  double preconditioner_mass = 1.0;

  void validate() const;
};

enum class OptimizationStatus { converged, max_iter, line_search_failure };

std::string to_string(OptimizationStatus status);

struct OptimizationResult {
  DiscretePath path;
  double merit = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  OptimizationStatus status = OptimizationStatus::max_iter;
  std::vector<double> trace;  ///< merit after each accepted iteration, starting with x0
};

/// Objective on flattened (node-major) paths.
using FlatObjective = std::function<MeritValue(const Vector&)>;

/// Symmetric positive definite metric (L + m M) (x) Q on node-major path
/// vectors, with L the difference Laplacian sum_k |dx_k|^2 / delta_k and M the
/// lumped mass matrix. apply_inverse() solves one tridiagonal system per state
/// component.
class PathPreconditioner {
 public:
  PathPreconditioner(const TimeGrid& grid, const Matrix& diffusion_cov, double mass);

  Vector apply_inverse(const Vector& v) const;

 private:
  Index dim_;
  std::size_t nodes_;
  Matrix cov_;
  std::vector<double> upper_;  // modified super-diagonal of the factorization
  std::vector<double> pivot_;
  std::vector<double> lower_;
};

struct FlatResult {
  Vector x;
  double merit = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  OptimizationStatus status = OptimizationStatus::max_iter;
  std::vector<double> trace;
};

/// Limited-memory BFGS ascent with Armijo backtracking. Trial points with value
/// -infinity or a MeshTooCoarseError count as insufficient increase, and so do
/// steps that leave the merit unchanged in floating point. Throws
/// std::invalid_argument when the objective is not finite at x0.
FlatResult maximize(const FlatObjective& objective, const Vector& x0, const OptimizerOptions& opts,
                    const PathPreconditioner* preconditioner = nullptr);

using PathObjective = std::function<MeritValue(const DiscretePath&)>;

OptimizationResult maximize(const PathObjective& objective, const DiscretePath& x0,
                            const OptimizerOptions& opts,
                            const std::optional<Matrix>& diffusion_cov = std::nullopt);

/// Maximizes the merit of the given kind for the problem, starting at x0.
OptimizationResult solve(const Problem& problem, MeritKind kind, const DiscretePath& x0,
                         const OptimizerOptions& opts = {});

enum class InitStrategy { prior_mean, meas_interp };

/// prior_mean: constant path at the mode of nu. meas_interp: piecewise-linear
/// through the observed component of each measurement, anchored at the prior
/// mode at t = 0 when no measurement sits there, constant past the last
/// anchor; unobserved components take the prior mode.
DiscretePath initial_path(const TimeGrid& grid, const Problem& problem, InitStrategy strategy);

struct StudyOptions {
  InitStrategy init = InitStrategy::prior_mean;
  bool cold_start = true;         ///< also solve every level from initial_path
  bool stop_on_failure = true;    ///< rethrow optimizer errors with the level index
};

struct LevelRecord {
  std::size_t segments = 0;       ///< N requested for the level
  std::optional<OptimizationResult> result;
  std::optional<double> sup_distance;  ///< to the finest maximizer on common points
  std::optional<double> cold_merit;
  std::optional<double> cold_distance;  ///< sup-distance warm vs cold maximizer
  std::string error;
};

struct ConvergenceStudy {
  MeritKind kind = MeritKind::euler;
  std::vector<LevelRecord> levels;
};

/// Solves the problem on nested uniform grids, warm-starting each level from
/// the previous maximizer sampled on the finer grid.
ConvergenceStudy convergence_study(const Problem& problem, MeritKind kind,
                                   const std::vector<std::size_t>& levels,
                                   const OptimizerOptions& opts = {}, const StudyOptions& study = {});

}  // namespace sdemap
