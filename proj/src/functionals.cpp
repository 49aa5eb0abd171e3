#include "sdemap/functionals.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sdemap/oracle.hpp"

namespace sdemap {

namespace {

using GradView = Eigen::Map<Matrix>;

GradView node_view(Vector& flat, Index dim) { return GradView(flat.data(), dim, flat.size() / dim); }

void check_dims(const DiscretePath& path, const DriftModel& drift, const Diffusion& diffusion) {
  if (path.dim() != drift.dim() || diffusion.dim() != drift.dim())
    throw std::invalid_argument("merit: path, drift and diffusion dimensions differ");
}

// ln|det M| and sign(det M) from a partially pivoted LU.
std::pair<double, double> signed_log_det(const Matrix& m) {
  Eigen::PartialPivLU<Matrix> lu(m);
  const Matrix& u = lu.matrixLU();
  double sign = lu.permutationP().determinant();
  double log_abs = 0.0;
  for (Index i = 0; i < u.rows(); ++i) {
    const double d = u(i, i);
    if (d == 0.0) return {0.0, -std::numeric_limits<double>::infinity()};
    if (d < 0.0) sign = -sign;
    log_abs += std::log(std::abs(d));
  }
  return {sign, log_abs};
}

template <typename Integrand>
double integrate_segments(const TimeGrid& grid, const QuadratureRule& rule, Integrand&& integrand) {
  double total = 0.0;
  for (std::size_t k = 0; k < grid.segments(); ++k) {
    const double t0 = grid.time(k), dt = grid.step(k);
    double seg = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q)
      seg += rule.weights[q] * integrand(k, rule.nodes[q], t0 + rule.nodes[q] * dt);
    total += dt * seg;
  }
  return total;
}

// Quadrature of J_e (and optionally the divergence term of J) on a
// piecewise-linear path, with node gradients.
MeritValue piecewise_linear_functional(const DiscretePath& path, const DriftModel& drift,
                                       const Diffusion& diffusion, const QuadratureRule& rule,
                                       bool with_divergence) {
  check_dims(path, drift, diffusion);
  const auto& grid = path.grid();
  const Index n = path.dim();
  const Matrix& q = diffusion.precision();
  Vector grad = Vector::Zero(path.states().size());
  auto g = node_view(grad, n);
  double value = 0.0;

  for (std::size_t k = 0; k < grid.segments(); ++k) {
    const Index a = static_cast<Index>(k), b = a + 1;
    const double t0 = grid.time(k), dt = grid.step(k);
    const Vector slope = (path.state(k + 1) - path.state(k)) / dt;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double theta = rule.nodes[i], w = rule.weights[i] * dt;
      const double t = t0 + theta * dt;
      const Vector phi = (1.0 - theta) * path.state(k) + theta * path.state(k + 1);
      const Vector r = slope - drift.drift(t, phi);
      const Vector s = q * r;
      value += -0.5 * w * r.dot(s);
      const Vector jts = drift.jacobian(t, phi).transpose() * s;
      g.col(a) += (w / dt) * s + w * (1.0 - theta) * jts;
      g.col(b) += -(w / dt) * s + w * theta * jts;
      if (with_divergence) {
        value += -0.5 * w * drift.divergence(t, phi);
        const Vector dd = divergence_gradient(drift, t, phi);
        g.col(a) += -0.5 * w * (1.0 - theta) * dd;
        g.col(b) += -0.5 * w * theta * dd;
      }
    }
  }
  return {value, std::move(grad)};
}

double smooth_functional(const SmoothPath& path, const TimeGrid& grid, const DriftModel& drift,
                         const Diffusion& diffusion, const QuadratureRule& rule, bool with_divergence) {
  return integrate_segments(grid, rule, [&](std::size_t, double, double t) {
    const Vector phi = path.value(t);
    const Vector r = path.derivative(t) - drift.drift(t, phi);
    double v = -0.5 * diffusion.squared_norm(r);
    if (with_divergence) v += -0.5 * drift.divergence(t, phi);
    return v;
  });
}

double smooth_posterior_terms(const SmoothPath& path, const Problem& problem) {
  double value = problem.model.initial->log_density(path.value(0.0));
  for (const auto& m : problem.measurements)
    value += m.likelihood->log_likelihood(m.value, path.value(m.time));
  return value;
}

}  // namespace

MeshTooCoarseError::MeshTooCoarseError(std::size_t segment, double determinant)
    : std::domain_error("trapezoidal scheme: det(I - jac*delta/2) = " + std::to_string(determinant) +
                        " <= 0 on segment " + std::to_string(segment) +
                        "; refine the mesh so the implicit step is a contraction"),
      segment_(segment) {}

QuadratureRule QuadratureRule::gauss_legendre(int points) {
  if (points < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
  const int n = points;
  // (P_n(z), P_n'(z)) by the three-term recurrence.
  auto legendre = [n](double z) {
    double p0 = 1.0, p1 = z;
    for (int j = 2; j <= n; ++j) {
      const double p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, n * (z * p1 - p0) / (z * z - 1.0)};
  };

  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(z);
      const double step = p / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double dp = legendre(z).second;
    const auto idx = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[idx] = 0.5 * (1.0 + z);
    rule.weights[idx] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  return rule;
}

MeritValue euler_energy(const DiscretePath& path, const DriftModel& drift, const Diffusion& diffusion) {
  check_dims(path, drift, diffusion);
  const auto& grid = path.grid();
  const Index n = path.dim();
  const Matrix& q = diffusion.precision();
  Vector grad = Vector::Zero(path.states().size());
  auto g = node_view(grad, n);
  double value = 0.0;
  for (std::size_t k = 0; k < grid.segments(); ++k) {
    const Index a = static_cast<Index>(k), b = a + 1;
    const double t = grid.time(k), dt = grid.step(k);
    const Vector x = path.state(k);
    const Vector r = (path.state(k + 1) - x) / dt - drift.drift(t, x);
    const Vector s = q * r;
    value += -0.5 * dt * r.dot(s);
    g.col(b) -= s;
    g.col(a) += s + dt * (drift.jacobian(t, x).transpose() * s);
  }
  return {value, std::move(grad)};
}

MeritValue trapezoidal_om(const DiscretePath& path, const DriftModel& drift, const Diffusion& diffusion) {
  check_dims(path, drift, diffusion);
  const auto& grid = path.grid();
  const Index n = path.dim();
  const Matrix& q = diffusion.precision();
  const Matrix eye = Matrix::Identity(n, n);

  std::vector<Vector> f(grid.size());
  std::vector<Matrix> jac(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vector x = path.state(k);
    f[k] = drift.drift(grid.time(k), x);
    jac[k] = drift.jacobian(grid.time(k), x);
  }

  Vector grad = Vector::Zero(path.states().size());
  auto g = node_view(grad, n);
  double value = 0.0;
  for (std::size_t k = 0; k < grid.segments(); ++k) {
    const Index a = static_cast<Index>(k), b = a + 1;
    const double dt = grid.step(k);

    const Matrix m = eye - 0.5 * dt * jac[k + 1];
    const auto [sign, log_abs] = signed_log_det(m);
    if (!(sign > 0.0) || !std::isfinite(log_abs)) {
      throw MeshTooCoarseError(k, sign * std::exp(log_abs));
    }
    value += log_abs;
    const Matrix m_inv = m.partialPivLu().inverse();
    const Vector x1 = path.state(k + 1);
    g.col(b) += -0.5 * dt * jacobian_trace_gradient(drift, grid.time(k + 1), x1, m_inv);

    const Vector r = (x1 - path.state(k)) / dt - 0.5 * (f[k] + f[k + 1]);
    const Vector s = q * r;
    value += -0.5 * dt * r.dot(s);
    g.col(a) += s + 0.5 * dt * (jac[k].transpose() * s);
    g.col(b) += -s + 0.5 * dt * (jac[k + 1].transpose() * s);
  }
  return {value, std::move(grad)};
}

MeritValue benes_exact_prior(const DiscretePath& path) {
  if (path.dim() != 1) throw std::invalid_argument("benes_exact_prior: scalar paths only");
  const auto& grid = path.grid();
  Vector grad = Vector::Zero(static_cast<Index>(grid.size()));
  double value = 0.0;
  for (std::size_t k = 0; k < grid.segments(); ++k) {
    const double x0 = path.state(k)(0), x1 = path.state(k + 1)(0), dt = grid.step(k);
    value += benes_exact_log_transition(x0, x1, dt);
    const auto [d0, d1] = benes_exact_log_transition_gradient(x0, x1, dt);
    grad(static_cast<Index>(k)) += d0;
    grad(static_cast<Index>(k) + 1) += d1;
  }
  return {value, std::move(grad)};
}

MeritValue continuous_energy(const DiscretePath& path, const DriftModel& drift, const Diffusion& diffusion,
                             const QuadratureRule& rule) {
  return piecewise_linear_functional(path, drift, diffusion, rule, false);
}

MeritValue continuous_om(const DiscretePath& path, const DriftModel& drift, const Diffusion& diffusion,
                         const QuadratureRule& rule) {
  return piecewise_linear_functional(path, drift, diffusion, rule, true);
}

double continuous_energy(const SmoothPath& path, const TimeGrid& grid, const DriftModel& drift,
                         const Diffusion& diffusion, const QuadratureRule& rule) {
  return smooth_functional(path, grid, drift, diffusion, rule, false);
}

double continuous_om(const SmoothPath& path, const TimeGrid& grid, const DriftModel& drift,
                     const Diffusion& diffusion, const QuadratureRule& rule) {
  return smooth_functional(path, grid, drift, diffusion, rule, true);
}

MeritValue add_posterior_terms(MeritValue prior, const DiscretePath& path, const Problem& problem) {
  if (!prior.is_finite()) return MeritValue::negative_infinity();
  const Index n = path.dim();
  Vector grad = prior.gradient ? std::move(*prior.gradient) : Vector::Zero(path.states().size());
  auto g = node_view(grad, n);

  const Vector x0 = path.state(0);
  const double log_nu = problem.model.initial->log_density(x0);
  if (std::isnan(log_nu)) throw std::domain_error("initial density returned NaN");
  if (log_nu == -std::numeric_limits<double>::infinity()) return MeritValue::negative_infinity();
  double value = prior.value + log_nu;
  g.col(0) += problem.model.initial->grad_log_density(x0);

  for (const auto& m : problem.measurements) {
    const std::size_t k = path.grid().index_of(m.time);
    const Vector x = path.state(k);
    const double ll = m.likelihood->log_likelihood(m.value, x);
    if (std::isnan(ll)) throw std::domain_error("measurement likelihood returned NaN");
    if (ll == -std::numeric_limits<double>::infinity()) return MeritValue::negative_infinity();
    value += ll;
    g.col(static_cast<Index>(k)) += m.likelihood->grad_log_likelihood(m.value, x);
  }
  return {value, std::move(grad)};
}

MeritValue euler_merit(const DiscretePath& path, const Problem& problem) {
  return add_posterior_terms(euler_energy(path, *problem.model.drift, problem.model.diffusion), path,
                             problem);
}

MeritValue trapezoidal_merit(const DiscretePath& path, const Problem& problem) {
  return add_posterior_terms(trapezoidal_om(path, *problem.model.drift, problem.model.diffusion), path,
                             problem);
}

MeritValue benes_exact_merit(const DiscretePath& path, const Problem& problem) {
  return add_posterior_terms(benes_exact_prior(path), path, problem);
}

MeritValue energy_merit(const DiscretePath& path, const Problem& problem, const QuadratureRule& rule) {
  return add_posterior_terms(continuous_energy(path, *problem.model.drift, problem.model.diffusion, rule),
                             path, problem);
}

MeritValue map_merit(const DiscretePath& path, const Problem& problem, const QuadratureRule& rule) {
  return add_posterior_terms(continuous_om(path, *problem.model.drift, problem.model.diffusion, rule),
                             path, problem);
}

double energy_merit(const SmoothPath& path, const TimeGrid& grid, const Problem& problem,
                    const QuadratureRule& rule) {
  return continuous_energy(path, grid, *problem.model.drift, problem.model.diffusion, rule) +
         smooth_posterior_terms(path, problem);
}

double map_merit(const SmoothPath& path, const TimeGrid& grid, const Problem& problem,
                 const QuadratureRule& rule) {
  return continuous_om(path, grid, *problem.model.drift, problem.model.diffusion, rule) +
         smooth_posterior_terms(path, problem);
}

std::string to_string(MeritKind kind) {
  switch (kind) {
    case MeritKind::euler: return "euler";
    case MeritKind::trapezoidal: return "trapezoidal";
    case MeritKind::exact: return "exact";
    case MeritKind::energy: return "energy";
    case MeritKind::onsager_machlup: return "onsager_machlup";
  }
  return "unknown";
}

MeritKind parse_merit_kind(std::string_view name) {
  if (name == "euler") return MeritKind::euler;
  if (name == "trapezoidal") return MeritKind::trapezoidal;
  if (name == "exact") return MeritKind::exact;
  if (name == "energy") return MeritKind::energy;
  if (name == "onsager_machlup") return MeritKind::onsager_machlup;
  throw std::invalid_argument("unknown merit kind '" + std::string(name) + "'");
}

MeritValue evaluate_merit(MeritKind kind, const DiscretePath& path, const Problem& problem) {
  switch (kind) {
    case MeritKind::euler: return euler_merit(path, problem);
    case MeritKind::trapezoidal: return trapezoidal_merit(path, problem);
    case MeritKind::exact: return benes_exact_merit(path, problem);
    case MeritKind::energy: return energy_merit(path, problem);
    case MeritKind::onsager_machlup: return map_merit(path, problem);
  }
  throw std::invalid_argument("evaluate_merit: unknown kind");
}

}  // namespace sdemap
