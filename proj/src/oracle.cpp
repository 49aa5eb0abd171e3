#include "sdemap/oracle.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace sdemap {

NonFiniteProbeError::NonFiniteProbeError(Index component)
    : std::runtime_error("fd_gradient: non-finite objective value probing component " +
                         std::to_string(component)),
      component_(component) {}

Vector fd_gradient(const std::function<double(const Vector&)>& objective, const Vector& x, double h) {
  Vector g(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x(i)));
    probe(i) = x(i) + step;
    const double up = objective(probe);
    const double xp = probe(i);
    probe(i) = x(i) - step;
    const double down = objective(probe);
    const double xm = probe(i);
    probe(i) = x(i);
    if (!std::isfinite(up) || !std::isfinite(down)) throw NonFiniteProbeError(i);
    g(i) = (up - down) / (xp - xm);
  }
  return g;
}

double gradient_relative_error(const Vector& analytic, const Vector& reference) {
  const double scale = std::max(analytic.lpNorm<Eigen::Infinity>(), reference.lpNorm<Eigen::Infinity>());
  if (scale == 0.0) return 0.0;
  return (analytic - reference).lpNorm<Eigen::Infinity>() / scale;
}

double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double benes_exact_log_transition(double x_from, double x_to, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("benes_exact_log_transition: delta must be positive");
  const double dx = x_to - x_from;
  return log_cosh(x_to) - log_cosh(x_from) - 0.5 * delta - dx * dx / (2.0 * delta) -
         0.5 * std::log(2.0 * std::numbers::pi * delta);
}

std::pair<double, double> benes_exact_log_transition_gradient(double x_from, double x_to, double delta) {
  const double slope = (x_to - x_from) / delta;
  return {-std::tanh(x_from) + slope, std::tanh(x_to) - slope};
}

double benes_exact_cdf(double x_from, double x, double delta) {
  auto phi = [](double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); };
  const double s = std::sqrt(delta);
  // e^{+-x0} / (2 cosh x0) written without overflow.
  const double w_plus = 1.0 / (1.0 + std::exp(-2.0 * x_from));
  const double w_minus = 1.0 - w_plus;
  return w_plus * phi((x - x_from - delta) / s) + w_minus * phi((x - x_from + delta) / s);
}

ExactTransition exact_linear_transition(const Matrix& drift, const Matrix& diffusion_cov, double delta) {
  using CMatrix = Eigen::MatrixXcd;
  using Complex = std::complex<double>;
  const Index n = drift.rows();
  Eigen::EigenSolver<Matrix> es(drift);
  if (es.info() != Eigen::Success) throw NumericalFailure("exact_linear_transition: eigensolver failed");
  const CMatrix v = es.eigenvectors();
  const Eigen::VectorXcd lambda = es.eigenvalues();
  Eigen::PartialPivLU<CMatrix> lu(v);
  const CMatrix v_inv = lu.inverse();
  if (!(v_inv.allFinite()) || (v * v_inv - CMatrix::Identity(n, n)).norm() > 1e-8)
    throw NumericalFailure("exact_linear_transition: drift matrix is not diagonalizable");

  CMatrix expd = CMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) expd(i, i) = std::exp(lambda(i) * delta);
  const CMatrix phi = v * expd * v_inv;

  const CMatrix b = v_inv * diffusion_cov.cast<Complex>() * v_inv.adjoint();
  CMatrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Complex c = lambda(i) + std::conj(lambda(j));
      const Complex integral = std::abs(c * delta) < 1e-8 ? delta * (1.0 + 0.5 * c * delta)
                                                          : (std::exp(c * delta) - 1.0) / c;
      m(i, j) = b(i, j) * integral;
    }
  }
  const CMatrix cov = v * m * v.adjoint();
  ExactTransition out;
  out.transition = phi.real();
  out.covariance = 0.5 * (cov.real() + cov.real().transpose());
  return out;
}

SmootherResult rts_smoother(const LinearGaussianSpec& lgs, const TimeGrid& grid,
                            const std::vector<LinearMeasurement>& measurements) {
  const Index n = lgs.drift.rows();
  const std::size_t size = grid.size();
  std::vector<std::vector<const LinearMeasurement*>> at_node(size);
  for (const auto& m : measurements) at_node[grid.index_of(m.time)].push_back(&m);

  const Matrix gg = lgs.diffusion * lgs.diffusion.transpose();
  std::vector<Vector> mf(size), mp(size);
  std::vector<Matrix> pf(size), pp(size), phis(size);

  auto update = [&](std::size_t k, Vector& mean, Matrix& cov) {
    for (const auto* m : at_node[k]) {
      const Matrix s = m->observation * cov * m->observation.transpose() + m->noise;
      Eigen::LLT<Matrix> llt(s);
      if (llt.info() != Eigen::Success)
        throw NumericalFailure("rts_smoother: innovation covariance not positive definite at node " +
                               std::to_string(k));
      const Matrix gain = llt.solve(m->observation * cov).transpose();
      mean += gain * (m->value - m->observation * mean);
      cov -= gain * s * gain.transpose();
      cov = 0.5 * (cov + cov.transpose()).eval();
    }
  };

  mp[0] = lgs.initial_mean;
  pp[0] = lgs.initial_covariance;
  mf[0] = mp[0];
  pf[0] = pp[0];
  update(0, mf[0], pf[0]);
  for (std::size_t k = 0; k + 1 < size; ++k) {
    const ExactTransition tr = exact_linear_transition(lgs.drift, gg, grid.step(k));
    phis[k] = tr.transition;
    mp[k + 1] = tr.transition * mf[k];
    pp[k + 1] = tr.transition * pf[k] * tr.transition.transpose() + tr.covariance;
    mf[k + 1] = mp[k + 1];
    pf[k + 1] = pp[k + 1];
    update(k + 1, mf[k + 1], pf[k + 1]);
  }

  SmootherResult out;
  out.means.resize(size);
  out.covariances.resize(size);
  out.means[size - 1] = mf[size - 1];
  out.covariances[size - 1] = pf[size - 1];
  for (std::size_t k = size - 1; k-- > 0;) {
    Eigen::LLT<Matrix> llt(pp[k + 1]);
    if (llt.info() != Eigen::Success)
      throw NumericalFailure("rts_smoother: predicted covariance not positive definite at node " +
                             std::to_string(k + 1));
    const Matrix c = llt.solve(phis[k] * pf[k]).transpose();
    out.means[k] = mf[k] + c * (out.means[k + 1] - mp[k + 1]);
    Matrix cov = pf[k] + c * (out.covariances[k + 1] - pp[k + 1]) * c.transpose();
    out.covariances[k] = 0.5 * (cov + cov.transpose());
  }
  (void)n;
  return out;
}

std::pair<LinearGaussianSpec, std::vector<LinearMeasurement>> linear_gaussian_from_problem(
    const Problem& problem) {
  const auto* lin = dynamic_cast<const LinearDrift*>(problem.model.drift.get());
  const auto* gauss = dynamic_cast<const GaussianDensity*>(problem.model.initial.get());
  if (!lin || !gauss)
    throw std::invalid_argument("linear_gaussian_from_problem: need LinearDrift and GaussianDensity");
  LinearGaussianSpec lgs{lin->matrix(), problem.model.diffusion.matrix(), gauss->mean(), gauss->covariance()};
  std::vector<LinearMeasurement> meas;
  for (const auto& m : problem.measurements) {
    const auto* lik = dynamic_cast<const GaussianLikelihood*>(m.likelihood.get());
    if (!lik) throw std::invalid_argument("linear_gaussian_from_problem: need Gaussian likelihoods");
    meas.push_back({m.time, m.value, lik->observation(), lik->noise()});
  }
  return {std::move(lgs), std::move(meas)};
}

namespace {

QuadratureReport finish(QuadratureReport r) {
  r.energy_difference = std::abs(r.energy_3 - r.energy_7);
  r.om_difference = std::abs(r.om_3 - r.om_7);
  return r;
}

}  // namespace

QuadratureReport quadrature_refine_check(const DiscretePath& path, const DriftModel& drift,
                                         const Diffusion& diffusion) {
  const auto q3 = QuadratureRule::gauss_legendre(3);
  const auto q7 = QuadratureRule::gauss_legendre(7);
  QuadratureReport r;
  r.energy_3 = continuous_energy(path, drift, diffusion, q3).value;
  r.energy_7 = continuous_energy(path, drift, diffusion, q7).value;
  r.om_3 = continuous_om(path, drift, diffusion, q3).value;
  r.om_7 = continuous_om(path, drift, diffusion, q7).value;
  return finish(r);
}

QuadratureReport quadrature_refine_check(const SmoothPath& path, const TimeGrid& grid,
                                         const DriftModel& drift, const Diffusion& diffusion) {
  const auto q3 = QuadratureRule::gauss_legendre(3);
  const auto q7 = QuadratureRule::gauss_legendre(7);
  QuadratureReport r;
  r.energy_3 = continuous_energy(path, grid, drift, diffusion, q3);
  r.energy_7 = continuous_energy(path, grid, drift, diffusion, q7);
  r.om_3 = continuous_om(path, grid, drift, diffusion, q3);
  r.om_7 = continuous_om(path, grid, drift, diffusion, q7);
  return finish(r);
}

}  // namespace sdemap
