#include "sdemap/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace sdemap {

void OptimizerOptions::validate() const {
  if (!(grad_tol > 0.0)) throw std::invalid_argument("optimizer: grad_tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("optimizer: max_iter must be positive");
  if (memory < 1) throw std::invalid_argument("optimizer: memory must be positive");
  if (!(armijo > 0.0 && armijo < 1.0)) throw std::invalid_argument("optimizer: armijo must lie in (0, 1)");
  if (!(backtrack > 0.0 && backtrack < 1.0))
    throw std::invalid_argument("optimizer: backtrack must lie in (0, 1)");
  if (max_backtracks < 1) throw std::invalid_argument("optimizer: max_backtracks must be positive");
  if (!(preconditioner_mass > 0.0))
    throw std::invalid_argument("optimizer: preconditioner_mass must be positive");
}

std::string to_string(OptimizationStatus status) {
  switch (status) {
    case OptimizationStatus::converged: return "converged";
    case OptimizationStatus::max_iter: return "max_iter";
    case OptimizationStatus::line_search_failure: return "line_search_failure";
  }
  return "unknown";
}

PathPreconditioner::PathPreconditioner(const TimeGrid& grid, const Matrix& diffusion_cov, double mass)
    : dim_(diffusion_cov.rows()), nodes_(grid.size()), cov_(diffusion_cov) {
  const std::size_t n = nodes_;
  std::vector<double> diag(n, 0.0);
  upper_.assign(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double d = grid.step(k);
    diag[k] += 1.0 / d + 0.5 * mass * d;
    diag[k + 1] += 1.0 / d + 0.5 * mass * d;
    upper_[k] = -1.0 / d;
  }
  pivot_.assign(n, 0.0);
  lower_.assign(n, 0.0);
  pivot_[0] = diag[0];
  for (std::size_t k = 1; k < n; ++k) {
    lower_[k] = upper_[k - 1] / pivot_[k - 1];
    pivot_[k] = diag[k] - lower_[k] * upper_[k - 1];
  }
}

Vector PathPreconditioner::apply_inverse(const Vector& v) const {
  const Index n = dim_;
  Eigen::Map<const Matrix> in(v.data(), n, static_cast<Index>(nodes_));
  Matrix z = in;
  for (std::size_t k = 1; k < nodes_; ++k) z.col(k) -= lower_[k] * z.col(k - 1);
  z.col(nodes_ - 1) /= pivot_[nodes_ - 1];
  for (std::size_t k = nodes_ - 1; k-- > 0;) z.col(k) = (z.col(k) - upper_[k] * z.col(k + 1)) / pivot_[k];
  const Matrix out = cov_ * z;
  return Eigen::Map<const Vector>(out.data(), out.size());
}

namespace {

struct Pair {
  Vector s;
  Vector y;
  double rho;
};

}  // namespace

FlatResult maximize(const FlatObjective& objective, const Vector& x0, const OptimizerOptions& opts,
                    const PathPreconditioner* preconditioner) {
  opts.validate();

  MeritValue start;
  try {
    start = objective(x0);
  } catch (const MeshTooCoarseError& e) {
    throw std::invalid_argument(std::string("maximize: objective not finite at start: ") + e.what());
  }
  if (!start.is_finite() || !std::isfinite(start.value) || !start.gradient)
    throw std::invalid_argument("maximize: objective not finite at start");

  // Minimize F = -merit internally.
  Vector x = x0;
  double f = -start.value;
  Vector g = -*start.gradient;

  std::deque<Pair> history;
  auto initial_inverse = [&](const Vector& q) -> Vector {
    Vector r = preconditioner ? preconditioner->apply_inverse(q) : q;
    if (!history.empty()) {
      const Pair& last = history.back();
      const Vector hy = preconditioner ? preconditioner->apply_inverse(last.y) : last.y;
      r *= last.s.dot(last.y) / last.y.dot(hy);
    }
    return r;
  };
  auto direction = [&]() -> Vector {
    Vector q = g;
    std::vector<double> alpha(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
      alpha[i] = history[i].rho * history[i].s.dot(q);
      q -= alpha[i] * history[i].y;
    }
    Vector r = initial_inverse(q);
    for (std::size_t i = 0; i < history.size(); ++i) {
      const double beta = history[i].rho * history[i].y.dot(r);
      r += history[i].s * (alpha[i] - beta);
    }
    return -r;
  };

  FlatResult out;
  out.trace.push_back(-f);
  int iter = 0;
  bool retried = false;
  while (true) {
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= opts.grad_tol) {
      out.status = OptimizationStatus::converged;
      break;
    }
    if (iter >= opts.max_iter) {
      out.status = OptimizationStatus::max_iter;
      break;
    }

    Vector d = direction();
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      history.clear();
      d = direction();
      slope = g.dot(d);
    }
    double step = 1.0;
    if (history.empty() && !preconditioner) step = std::min(1.0, 1.0 / d.lpNorm<Eigen::Infinity>());

    bool accepted = false;
    Vector xt;
    double ft = 0.0;
    Vector gt;
    for (int j = 0; j < opts.max_backtracks; ++j) {
      xt = x + step * d;
      MeritValue trial;
      bool ok = true;
      try {
        trial = objective(xt);
      } catch (const MeshTooCoarseError&) {
        ok = false;
      }
      if (ok && trial.is_finite() && std::isfinite(trial.value) && trial.gradient &&
          -trial.value <= f + opts.armijo * step * slope && -trial.value < f) {
        ft = -trial.value;
        gt = -*trial.gradient;
        accepted = true;
        break;
      }
      step *= opts.backtrack;
    }

    if (!accepted) {
      if (!history.empty() && !retried) {
        history.clear();
        retried = true;
        continue;
      }
      out.status = OptimizationStatus::line_search_failure;
      break;
    }
    retried = false;

    if (ft > f) throw std::logic_error("maximize: merit decreased on an accepted step");
    Vector s = xt - x;
    Vector y = gt - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      history.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(history.size()) > opts.memory) history.pop_front();
    }
    x = std::move(xt);
    f = ft;
    g = std::move(gt);
    ++iter;
    out.trace.push_back(-f);
  }

  out.x = std::move(x);
  out.merit = -f;
  out.grad_norm = g.lpNorm<Eigen::Infinity>();
  out.iterations = iter;
  return out;
}

OptimizationResult maximize(const PathObjective& objective, const DiscretePath& x0,
                            const OptimizerOptions& opts, const std::optional<Matrix>& diffusion_cov) {
  const TimeGrid& grid = x0.grid();
  const Index dim = x0.dim();
  FlatObjective flat = [&](const Vector& v) { return objective(DiscretePath::from_flat(grid, dim, v)); };
  std::optional<PathPreconditioner> pre;
  if (opts.precondition && diffusion_cov) pre.emplace(grid, *diffusion_cov, opts.preconditioner_mass);
  FlatResult r = maximize(flat, x0.flat(), opts, pre ? &*pre : nullptr);
  return OptimizationResult{DiscretePath::from_flat(grid, dim, r.x), r.merit, r.grad_norm, r.iterations,
                            r.status, std::move(r.trace)};
}

OptimizationResult solve(const Problem& problem, MeritKind kind, const DiscretePath& x0,
                         const OptimizerOptions& opts) {
  PathObjective objective = [&](const DiscretePath& p) { return evaluate_merit(kind, p, problem); };
  return maximize(objective, x0, opts, problem.model.diffusion.covariance());
}

DiscretePath initial_path(const TimeGrid& grid, const Problem& problem, InitStrategy strategy) {
  const Vector mode = problem.model.initial->mode();
  DiscretePath path = DiscretePath::constant(grid, mode);
  if (strategy == InitStrategy::prior_mean) return path;

  if (problem.measurements.empty())
    throw std::invalid_argument("initial_path: meas_interp needs at least one measurement");
  Matrix states = path.states();
  bool any = false;
  const double tol = grid.tolerance();
  for (Index c = 0; c < mode.size(); ++c) {
    std::vector<std::pair<double, double>> anchors;
    for (const auto& m : problem.measurements) {
      const auto comp = m.likelihood->observed_component();
      if (comp && *comp == c) anchors.emplace_back(m.time, m.value(0));
    }
    if (anchors.empty()) continue;
    any = true;
    std::stable_sort(anchors.begin(), anchors.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    if (anchors.front().first > tol) anchors.insert(anchors.begin(), {0.0, mode(c)});
    std::size_t j = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double t = grid.time(k);
      while (j + 1 < anchors.size() && anchors[j + 1].first <= t) ++j;
      if (j + 1 >= anchors.size() || t <= anchors[j].first) {
        states(c, static_cast<Index>(k)) = anchors[j].second;
        continue;
      }
      const auto& [t0, y0] = anchors[j];
      const auto& [t1, y1] = anchors[j + 1];
      const double w = (t - t0) / (t1 - t0);
      states(c, static_cast<Index>(k)) = (1.0 - w) * y0 + w * y1;
    }
  }
  if (!any) throw std::invalid_argument("initial_path: no measurement observes a state component directly");
  return DiscretePath(grid, std::move(states));
}

ConvergenceStudy convergence_study(const Problem& problem, MeritKind kind,
                                   const std::vector<std::size_t>& levels, const OptimizerOptions& opts,
                                   const StudyOptions& study) {
  if (levels.empty()) throw std::invalid_argument("convergence_study: no levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == 0) throw std::invalid_argument("convergence_study: levels must be positive");
    if (i > 0 && (levels[i] <= levels[i - 1] || levels[i] % levels[i - 1] != 0))
      throw std::invalid_argument("convergence_study: levels must increase and divide each other");
  }
  problem.validate();
  const auto meas_times = measurement_times(problem.measurements);

  ConvergenceStudy out;
  out.kind = kind;
  out.levels.reserve(levels.size());
  const OptimizationResult* previous = nullptr;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    LevelRecord rec;
    rec.segments = levels[i];
    try {
      const TimeGrid grid = make_uniform_grid(problem.horizon, levels[i], meas_times);
      const DiscretePath cold = initial_path(grid, problem, study.init);
      const DiscretePath x0 = previous ? previous->path.resample(grid) : cold;
      rec.result = solve(problem, kind, x0, opts);
      if (!previous) {
        rec.cold_merit = rec.result->merit;
        rec.cold_distance = 0.0;
      } else if (study.cold_start) {
        const OptimizationResult cold_result = solve(problem, kind, cold, opts);
        rec.cold_merit = cold_result.merit;
        rec.cold_distance = sup_distance(rec.result->path, cold_result.path);
      }
    } catch (const std::exception& e) {
      const std::string msg = "level " + std::to_string(i) + " (N=" + std::to_string(levels[i]) + "): " + e.what();
      if (study.stop_on_failure) throw std::runtime_error("convergence_study: " + msg);
      rec.result.reset();
      rec.error = msg;
    }
    out.levels.push_back(std::move(rec));
    if (out.levels.back().result) previous = &*out.levels.back().result;
  }

  const LevelRecord& finest = out.levels.back();
  if (finest.result) {
    for (auto& rec : out.levels)
      if (rec.result) rec.sup_distance = sup_distance(rec.result->path, finest.result->path);
  }
  return out;
}

}  // namespace sdemap
