#include "sdemap/simulate.hpp"

#include <cmath>
#include <string>

namespace sdemap {

NonFiniteStateError::NonFiniteStateError(std::size_t step)
    : std::runtime_error("simulation: non-finite state at step " + std::to_string(step)), step_(step) {}

WienerPair draw_wiener_pair(Index dim, double h, RngStream& rng) {
  WienerPair p{Vector(dim), Vector(dim)};
  const double sh = std::sqrt(h);
  for (Index j = 0; j < dim; ++j) {
    const double u1 = rng.normal();
    const double u2 = rng.normal();
    p.dw(j) = u1 * sh;
    p.dz(j) = 0.5 * h * sh * (u1 + u2 / std::sqrt(3.0));
  }
  return p;
}

Vector euler_maruyama_step(const DriftModel& drift, const Diffusion& diffusion, double t, const Vector& x,
                           double h, const Vector& dw) {
  return x + drift.drift(t, x) * h + diffusion.matrix() * dw;
}

Vector strong_order15_step(const DriftModel& drift, const Diffusion& diffusion, double t, const Vector& x,
                           double h, const Vector& dw, const Vector& dz) {
  const Matrix& g = diffusion.matrix();
  const Index m = g.cols();
  const double sh = std::sqrt(h);
  const Vector a = drift.drift(t, x);
  const Vector base = x + a * (h / static_cast<double>(m));
  Vector next = x + g * dw - 0.25 * h * (2.0 * static_cast<double>(m) - 4.0) * a;
  for (Index j = 0; j < m; ++j) {
    const Vector ap = drift.drift(t, base + g.col(j) * sh);
    const Vector am = drift.drift(t, base - g.col(j) * sh);
    next += (ap - am) * (dz(j) / (2.0 * sh)) + 0.25 * h * (ap + am);
  }
  return next;
}

namespace {

std::size_t step_count(double h, double horizon) {
  if (!(h > 0.0)) throw std::invalid_argument("simulation: step must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("simulation: horizon must be positive");
  const double ratio = horizon / h;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
    throw std::invalid_argument("simulation: step must divide the horizon");
  return static_cast<std::size_t>(n);
}

template <class Step>
DiscretePath simulate(const Vector& x0, double h, double horizon, Step&& step) {
  const std::size_t n = step_count(h, horizon);
  std::vector<double> times(n + 1);
  for (std::size_t k = 0; k <= n; ++k) times[k] = horizon * static_cast<double>(k) / static_cast<double>(n);
  Matrix states(x0.size(), static_cast<Index>(n + 1));
  states.col(0) = x0;
  Vector x = x0;
  for (std::size_t k = 0; k < n; ++k) {
    x = step(times[k], x);
    if (!x.allFinite()) throw NonFiniteStateError(k);
    states.col(static_cast<Index>(k + 1)) = x;
  }
  return DiscretePath(TimeGrid(std::move(times), {}), std::move(states));
}

}  // namespace

DiscretePath euler_maruyama(const DriftModel& drift, const Diffusion& diffusion, const Vector& x0, double h,
                            double horizon, RngStream& rng) {
  const Index m = diffusion.matrix().cols();
  const double sh = std::sqrt(h);
  return simulate(x0, h, horizon, [&](double t, const Vector& x) {
    Vector dw(m);
    for (Index j = 0; j < m; ++j) dw(j) = rng.normal() * sh;
    return euler_maruyama_step(drift, diffusion, t, x, h, dw);
  });
}

DiscretePath strong_order15(const DriftModel& drift, const Diffusion& diffusion, const Vector& x0, double h,
                            double horizon, RngStream& rng) {
  const Index m = diffusion.matrix().cols();
  return simulate(x0, h, horizon, [&](double t, const Vector& x) {
    const WienerPair p = draw_wiener_pair(m, h, rng);
    return strong_order15_step(drift, diffusion, t, x, h, p.dw, p.dz);
  });
}

Vector sample_gaussian(const Vector& mean, const Matrix& cov, RngStream& rng) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("sample_gaussian: covariance not positive definite");
  Vector z(mean.size());
  for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean + llt.matrixL() * z;
}

std::size_t SimulatedMeasurements::outlier_count() const {
  std::size_t c = 0;
  for (bool b : outlier) c += b ? 1 : 0;
  return c;
}

SimulatedMeasurements sample_measurements(const DiscretePath& path, double step, double sigma_y,
                                          double sigma_outlier, double p_outlier, Index component,
                                          RngStream& rng) {
  if (!(step > 0.0)) throw std::invalid_argument("sample_measurements: step must be positive");
  if (!(sigma_y > 0.0) || !(sigma_outlier > 0.0))
    throw std::invalid_argument("sample_measurements: standard deviations must be positive");
  if (!(p_outlier >= 0.0 && p_outlier <= 1.0))
    throw std::invalid_argument("sample_measurements: outlier probability must lie in [0, 1]");
  if (component < 0 || component >= path.dim())
    throw std::invalid_argument("sample_measurements: observed component out of range");

  const double horizon = path.grid().horizon();
  const auto count = static_cast<std::size_t>(std::floor(horizon / step + 1e-9));
  SimulatedMeasurements out;
  for (std::size_t i = 0; i <= count; ++i) {
    const double t = std::min(horizon, static_cast<double>(i) * step);
    const double u = path.at(t)(component);
    const bool flag = rng.bernoulli(p_outlier);
    const double e = rng.normal();
    out.times.push_back(t);
    out.values.push_back(u + (flag ? sigma_outlier : sigma_y) * e);
    out.outlier.push_back(flag);
  }
  return out;
}

MeasurementSet to_measurement_set(const SimulatedMeasurements& sim,
                                  std::shared_ptr<const MeasurementLikelihood> likelihood) {
  MeasurementSet out;
  out.reserve(sim.times.size());
  for (std::size_t i = 0; i < sim.times.size(); ++i)
    out.push_back({sim.times[i], Vector::Constant(1, sim.values[i]), likelihood});
  return out;
}

std::pair<double, Vector> student_t_loglik(double y, const Vector& x, double sigma, Index component) {
  const StudentTLikelihood lik(component, sigma);
  const Vector yv = Vector::Constant(1, y);
  return {lik.log_likelihood(yv, x), lik.grad_log_likelihood(yv, x)};
}

}  // namespace sdemap
