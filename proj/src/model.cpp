#include "sdemap/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sdemap/rng.hpp"

namespace sdemap {

Matrix DriftModel::jacobian_derivative(double t, const Vector& x, Index j) const {
  const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
  Vector xp = x, xm = x;
  xp(j) += h;
  xm(j) -= h;
  return (jacobian(t, xp) - jacobian(t, xm)) / (xp(j) - xm(j));
}

Vector jacobian_trace_gradient(const DriftModel& model, double t, const Vector& x, const Matrix& weight) {
  Vector c(x.size());
  for (Index j = 0; j < x.size(); ++j) {
    // trace(W D) without forming the product
    c(j) = weight.cwiseProduct(model.jacobian_derivative(t, x, j).transpose()).sum();
  }
  return c;
}

Vector divergence_gradient(const DriftModel& model, double t, const Vector& x) {
  Vector c(x.size());
  for (Index j = 0; j < x.size(); ++j) c(j) = model.jacobian_derivative(t, x, j).trace();
  return c;
}

LinearDrift::LinearDrift(Matrix a, std::string name) : a_(std::move(a)), name_(std::move(name)) {
  if (a_.rows() != a_.cols() || a_.rows() < 1)
    throw std::invalid_argument("LinearDrift: matrix must be square and non-empty");
}

Vector BenesDrift::drift(double, const Vector& x) const { return x.array().tanh().matrix(); }

Matrix BenesDrift::jacobian(double t, const Vector& x) const {
  return Matrix::Constant(1, 1, divergence(t, x));
}

double BenesDrift::divergence(double, const Vector& x) const {
  const double th = std::tanh(x(0));
  return 1.0 - th * th;
}

Matrix BenesDrift::jacobian_derivative(double, const Vector& x, Index) const {
  const double th = std::tanh(x(0));
  return Matrix::Constant(1, 1, -2.0 * th * (1.0 - th * th));
}

Vector VanDerPolDrift::drift(double, const Vector& x) const {
  const double u = x(0), v = x(1);
  Vector f(2);
  f << v, -u + damping_ * (1.0 - u * u) * v;
  return f;
}

Matrix VanDerPolDrift::jacobian(double, const Vector& x) const {
  const double u = x(0), v = x(1);
  Matrix j(2, 2);
  j << 0.0, 1.0,
       -1.0 - 2.0 * damping_ * u * v, damping_ * (1.0 - u * u);
  return j;
}

double VanDerPolDrift::divergence(double, const Vector& x) const {
  return damping_ * (1.0 - x(0) * x(0));
}

Matrix VanDerPolDrift::jacobian_derivative(double, const Vector& x, Index j) const {
  const double u = x(0), v = x(1);
  Matrix d = Matrix::Zero(2, 2);
  if (j == 0) {
    d(1, 0) = -2.0 * damping_ * v;
    d(1, 1) = -2.0 * damping_ * u;
  } else {
    d(1, 0) = -2.0 * damping_ * u;
  }
  return d;
}

CallbackDrift::CallbackDrift(Index dim, VectorFn drift, MatrixFn jacobian, ScalarFn divergence,
                             std::string name)
    : dim_(dim),
      drift_(std::move(drift)),
      jacobian_(std::move(jacobian)),
      divergence_(std::move(divergence)),
      name_(std::move(name)) {
  if (dim_ < 1) throw std::invalid_argument("CallbackDrift: dimension must be >= 1");
  if (!drift_ || !jacobian_) throw std::invalid_argument("CallbackDrift: drift and jacobian required");
}

double CallbackDrift::divergence(double t, const Vector& x) const {
  return divergence_ ? divergence_(t, x) : jacobian_(t, x).trace();
}

Diffusion::Diffusion(Matrix g) : g_(std::move(g)) {
  if (g_.rows() != g_.cols() || g_.rows() < 1)
    throw std::invalid_argument("Diffusion: G must be square and non-empty");
  Eigen::FullPivLU<Matrix> lu(g_);
  if (!lu.isInvertible()) throw std::invalid_argument("Diffusion: G must have full rank");
  const Matrix g_inv = lu.inverse();
  q_ = g_inv.transpose() * g_inv;
  cov_ = g_ * g_.transpose();
  log_abs_det_ = std::log(std::abs(lu.determinant()));
}

GaussianDensity::GaussianDensity(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
    throw std::invalid_argument("GaussianDensity: covariance shape mismatch");
  Eigen::LLT<Matrix> llt(cov_);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("GaussianDensity: covariance must be positive definite");
  precision_ = llt.solve(Matrix::Identity(cov_.rows(), cov_.cols()));
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  log_norm_ = -0.5 * (static_cast<double>(mean_.size()) * std::log(2.0 * std::numbers::pi) + log_det);
}

double GaussianDensity::log_density(const Vector& x) const {
  const Vector r = x - mean_;
  return log_norm_ - 0.5 * r.dot(precision_ * r);
}

Vector GaussianDensity::grad_log_density(const Vector& x) const { return -(precision_ * (x - mean_)); }

CallbackDensity::CallbackDensity(Index dim, std::function<double(const Vector&)> log_density,
                                 std::function<Vector(const Vector&)> grad, Vector mode)
    : dim_(dim), log_density_(std::move(log_density)), grad_(std::move(grad)), mode_(std::move(mode)) {
  if (!log_density_ || !grad_) throw std::invalid_argument("CallbackDensity: callbacks required");
  if (mode_.size() != dim_) throw std::invalid_argument("CallbackDensity: mode dimension mismatch");
}

GaussianLikelihood::GaussianLikelihood(Matrix h, Matrix r) : h_(std::move(h)), r_(std::move(r)) {
  if (r_.rows() != h_.rows() || r_.cols() != h_.rows())
    throw std::invalid_argument("GaussianLikelihood: noise covariance shape mismatch");
  Eigen::LLT<Matrix> llt(r_);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("GaussianLikelihood: noise covariance must be positive definite");
  r_inv_ = llt.solve(Matrix::Identity(r_.rows(), r_.cols()));
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  log_norm_ = -0.5 * (static_cast<double>(r_.rows()) * std::log(2.0 * std::numbers::pi) + log_det);
}

std::shared_ptr<GaussianLikelihood> GaussianLikelihood::component(Index dim, Index component,
                                                                  double variance) {
  if (component < 0 || component >= dim)
    throw std::invalid_argument("GaussianLikelihood: component out of range");
  Matrix h = Matrix::Zero(1, dim);
  h(0, component) = 1.0;
  return std::make_shared<GaussianLikelihood>(h, Matrix::Constant(1, 1, variance));
}

double GaussianLikelihood::log_likelihood(const Vector& y, const Vector& x) const {
  const Vector r = y - h_ * x;
  return log_norm_ - 0.5 * r.dot(r_inv_ * r);
}

Vector GaussianLikelihood::grad_log_likelihood(const Vector& y, const Vector& x) const {
  return h_.transpose() * (r_inv_ * (y - h_ * x));
}

std::optional<Index> GaussianLikelihood::observed_component() const {
  if (h_.rows() != 1) return std::nullopt;
  Index c = -1;
  for (Index j = 0; j < h_.cols(); ++j) {
    if (h_(0, j) == 1.0 && c < 0) {
      c = j;
    } else if (h_(0, j) != 0.0) {
      return std::nullopt;
    }
  }
  if (c < 0) return std::nullopt;
  return c;
}

StudentTLikelihood::StudentTLikelihood(Index component, double sigma)
    : component_(component), sigma_(sigma) {
  if (!(sigma_ > 0.0)) throw std::invalid_argument("StudentTLikelihood: sigma must be positive");
  if (component_ < 0) throw std::invalid_argument("StudentTLikelihood: negative component");
}

double StudentTLikelihood::log_likelihood(const Vector& y, const Vector& x) const {
  const double r = x(component_) - y(0);
  return -2.5 * std::log1p(r * r / (4.0 * sigma_ * sigma_));
}

Vector StudentTLikelihood::grad_log_likelihood(const Vector& y, const Vector& x) const {
  const double r = x(component_) - y(0);
  Vector g = Vector::Zero(x.size());
  g(component_) = -5.0 * r / (4.0 * sigma_ * sigma_ + r * r);
  return g;
}

std::vector<double> measurement_times(const MeasurementSet& measurements) {
  std::vector<double> t;
  t.reserve(measurements.size());
  for (const auto& m : measurements) t.push_back(m.time);
  return t;
}

void Problem::validate() const {
  if (!model.drift || !model.initial) throw std::invalid_argument("Problem: incomplete model");
  const Index n = model.drift->dim();
  if (model.diffusion.dim() != n || model.initial->dim() != n)
    throw std::invalid_argument("Problem: drift, diffusion and initial density dimensions differ");
  if (!(horizon > 0.0)) throw std::invalid_argument("Problem: horizon must be positive");
  const double tol = time_tolerance(horizon);
  for (const auto& m : measurements) {
    if (!m.likelihood) throw std::invalid_argument("Problem: measurement without likelihood");
    if (m.time < -tol || m.time > horizon + tol)
      throw std::invalid_argument("Problem: measurement instant outside [0, T]");
  }
}

Model builtin_model(std::string_view name, const BuiltinParams& params) {
  if (name == "benes") {
    return Model{std::make_shared<BenesDrift>(), Diffusion(Matrix::Identity(1, 1)),
                 std::make_shared<GaussianDensity>(Vector::Zero(1),
                                                   Matrix::Constant(1, 1, params.benes_initial_variance))};
  }
  if (name == "vdp") {
    return Model{std::make_shared<VanDerPolDrift>(params.vdp_damping),
                 Diffusion(params.vdp_noise * Matrix::Identity(2, 2)),
                 std::make_shared<GaussianDensity>(Vector::Zero(2),
                                                   params.vdp_initial_variance * Matrix::Identity(2, 2))};
  }
  if (name == "ou") {
    if (!(params.ou_rate > 0.0)) throw std::invalid_argument("builtin_model: OU rate must be positive");
    return Model{std::make_shared<LinearDrift>(Matrix::Constant(1, 1, -params.ou_rate), "ou"),
                 Diffusion(Matrix::Identity(1, 1)),
                 std::make_shared<GaussianDensity>(Vector::Zero(1),
                                                   Matrix::Constant(1, 1, params.ou_initial_variance))};
  }
  throw std::invalid_argument("builtin_model: unknown model '" + std::string(name) + "'");
}

ModelValidationReport validate_model(const DriftModel& model, std::size_t samples, std::uint64_t seed,
                                     double state_scale, double horizon) {
  if (samples == 0) throw std::invalid_argument("validate_model: need at least one sample");
  RngStream rng(seed, 0);
  ModelValidationReport report;
  report.samples = samples;
  const Index n = model.dim();
  for (std::size_t s = 0; s < samples; ++s) {
    const double t = horizon * rng.uniform();
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = state_scale * rng.normal();

    const Matrix jac = model.jacobian(t, x);
    report.max_divergence_error =
        std::max(report.max_divergence_error, std::abs(model.divergence(t, x) - jac.trace()));

    Matrix fd(n, n);
    for (Index j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
      Vector xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      fd.col(j) = (model.drift(t, xp) - model.drift(t, xm)) / (xp(j) - xm(j));
    }
    const double scale = std::max(1.0, jac.cwiseAbs().maxCoeff());
    report.max_jacobian_rel_error =
        std::max(report.max_jacobian_rel_error, (jac - fd).cwiseAbs().maxCoeff() / scale);
  }
  report.passed = report.max_divergence_error <= 1e-10 && report.max_jacobian_rel_error <= 1e-5;
  return report;
}

}  // namespace sdemap
