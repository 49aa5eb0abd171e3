#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdemap/path.hpp"

namespace sdemap {

/// Drift vector field f(t, x) of dX = f(t, X) dt + G dW, with its Jacobian and
/// divergence supplied analytically.
class DriftModel {
 public:
  virtual ~DriftModel() = default;

  virtual Index dim() const = 0;
  virtual std::string name() const = 0;
  virtual Vector drift(double t, const Vector& x) const = 0;
  virtual Matrix jacobian(double t, const Vector& x) const = 0;
  virtual double divergence(double t, const Vector& x) const { return jacobian(t, x).trace(); }

  /// Partial derivative of the Jacobian with respect to x_j. The default uses
  /// central differences of jacobian() with step 1e-6 * max(1, |x_j|).
  virtual Matrix jacobian_derivative(double t, const Vector& x, Index j) const;
};

/// c_j = trace(W * d(jac)/dx_j) at (t, x).
Vector jacobian_trace_gradient(const DriftModel& model, double t, const Vector& x, const Matrix& weight);

/// Gradient of div f with respect to x.
Vector divergence_gradient(const DriftModel& model, double t, const Vector& x);

/// f(x) = A x. Covers f = 0, scalar f = x and the Ornstein-Uhlenbeck drift -a x.
class LinearDrift final : public DriftModel {
 public:
  explicit LinearDrift(Matrix a, std::string name = "linear");

  Index dim() const override { return a_.rows(); }
  std::string name() const override { return name_; }
  Vector drift(double, const Vector& x) const override { return a_ * x; }
  Matrix jacobian(double, const Vector&) const override { return a_; }
  double divergence(double, const Vector&) const override { return a_.trace(); }
  Matrix jacobian_derivative(double, const Vector&, Index) const override {
    return Matrix::Zero(a_.rows(), a_.cols());
  }
  const Matrix& matrix() const { return a_; }

 private:
  Matrix a_;
  std::string name_;
};

/// Scalar f(x) = tanh(x).
class BenesDrift final : public DriftModel {
 public:
  Index dim() const override { return 1; }
  std::string name() const override { return "benes"; }
  Vector drift(double t, const Vector& x) const override;
  Matrix jacobian(double t, const Vector& x) const override;
  double divergence(double t, const Vector& x) const override;
  Matrix jacobian_derivative(double t, const Vector& x, Index j) const override;
};

/// f(u, v) = (v, -u + damping (1 - u^2) v).
class VanDerPolDrift final : public DriftModel {
 public:
  explicit VanDerPolDrift(double damping = 2.0) : damping_(damping) {}

  Index dim() const override { return 2; }
  std::string name() const override { return "vdp"; }
  Vector drift(double t, const Vector& x) const override;
  Matrix jacobian(double t, const Vector& x) const override;
  double divergence(double t, const Vector& x) const override;
  Matrix jacobian_derivative(double t, const Vector& x, Index j) const override;
  double damping() const { return damping_; }

 private:
  double damping_;
};

/// Drift assembled from callbacks; used for user models and the Python bindings.
/// Missing divergence / Jacobian-derivative callbacks fall back to the trace
/// and finite-difference defaults.
class CallbackDrift final : public DriftModel {
 public:
  using VectorFn = std::function<Vector(double, const Vector&)>;
  using MatrixFn = std::function<Matrix(double, const Vector&)>;
  using ScalarFn = std::function<double(double, const Vector&)>;

  CallbackDrift(Index dim, VectorFn drift, MatrixFn jacobian, ScalarFn divergence = nullptr,
                std::string name = "callback");

  Index dim() const override { return dim_; }
  std::string name() const override { return name_; }
  Vector drift(double t, const Vector& x) const override { return drift_(t, x); }
  Matrix jacobian(double t, const Vector& x) const override { return jacobian_(t, x); }
  double divergence(double t, const Vector& x) const override;

 private:
  Index dim_;
  VectorFn drift_;
  MatrixFn jacobian_;
  ScalarFn divergence_;
  std::string name_;
};

/// Constant full-rank diffusion matrix G with cached Q = (G G^T)^-1.
class Diffusion {
 public:
  explicit Diffusion(Matrix g);

  Index dim() const { return g_.rows(); }
  const Matrix& matrix() const { return g_; }
  /// Q = (G G^T)^-1.
  const Matrix& precision() const { return q_; }
  /// G G^T.
  const Matrix& covariance() const { return cov_; }
  double log_abs_det() const { return log_abs_det_; }

  /// ||v||_Q^2 = v^T Q v.
  double squared_norm(const Vector& v) const { return v.dot(q_ * v); }

 private:
  Matrix g_;
  Matrix q_;
  Matrix cov_;
  double log_abs_det_;
};

/// Density nu of the initial state. log_density may return -infinity.
class InitialDensity {
 public:
  virtual ~InitialDensity() = default;
  virtual Index dim() const = 0;
  virtual double log_density(const Vector& x) const = 0;
  virtual Vector grad_log_density(const Vector& x) const = 0;
  virtual Vector mode() const = 0;
};

class GaussianDensity final : public InitialDensity {
 public:
  GaussianDensity(Vector mean, Matrix covariance);

  Index dim() const override { return mean_.size(); }
  double log_density(const Vector& x) const override;
  Vector grad_log_density(const Vector& x) const override;
  Vector mode() const override { return mean_; }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }

 private:
  Vector mean_;
  Matrix cov_;
  Matrix precision_;
  double log_norm_;
};

class CallbackDensity final : public InitialDensity {
 public:
  CallbackDensity(Index dim, std::function<double(const Vector&)> log_density,
                  std::function<Vector(const Vector&)> grad, Vector mode);

  Index dim() const override { return dim_; }
  double log_density(const Vector& x) const override { return log_density_(x); }
  Vector grad_log_density(const Vector& x) const override { return grad_(x); }
  Vector mode() const override { return mode_; }

 private:
  Index dim_;
  std::function<double(const Vector&)> log_density_;
  std::function<Vector(const Vector&)> grad_;
  Vector mode_;
};

/// Measurement density psi_t(y | x). log_likelihood may return -infinity.
class MeasurementLikelihood {
 public:
  virtual ~MeasurementLikelihood() = default;
  virtual double log_likelihood(const Vector& y, const Vector& x) const = 0;
  virtual Vector grad_log_likelihood(const Vector& y, const Vector& x) const = 0;
  /// Component of the state observed directly, if any; used to seed initial paths.
  virtual std::optional<Index> observed_component() const { return std::nullopt; }
};

/// y ~ N(H x, R), including the normalizing constant.
class GaussianLikelihood final : public MeasurementLikelihood {
 public:
  GaussianLikelihood(Matrix h, Matrix r);
  /// Scalar observation of component `component` with variance `variance`.
  static std::shared_ptr<GaussianLikelihood> component(Index dim, Index component, double variance);

  double log_likelihood(const Vector& y, const Vector& x) const override;
  Vector grad_log_likelihood(const Vector& y, const Vector& x) const override;
  std::optional<Index> observed_component() const override;
  const Matrix& observation() const { return h_; }
  const Matrix& noise() const { return r_; }

 private:
  Matrix h_;
  Matrix r_;
  Matrix r_inv_;
  double log_norm_;
};

/// Student t with 4 degrees of freedom and scale sigma on one state component:
/// ln psi = -(5/2) ln(1 + (u - y)^2 / (4 sigma^2)). Unnormalized, maximum 0.
class StudentTLikelihood final : public MeasurementLikelihood {
 public:
  StudentTLikelihood(Index component, double sigma);

  double log_likelihood(const Vector& y, const Vector& x) const override;
  Vector grad_log_likelihood(const Vector& y, const Vector& x) const override;
  std::optional<Index> observed_component() const override { return component_; }
  double sigma() const { return sigma_; }

 private:
  Index component_;
  double sigma_;
};

struct Measurement {
  double time = 0.0;
  Vector value;
  std::shared_ptr<const MeasurementLikelihood> likelihood;
};

using MeasurementSet = std::vector<Measurement>;

std::vector<double> measurement_times(const MeasurementSet& measurements);

/// Prior model: dynamics, diffusion and initial density.
struct Model {
  std::shared_ptr<const DriftModel> drift;
  Diffusion diffusion;
  std::shared_ptr<const InitialDensity> initial;

  Index dim() const { return drift->dim(); }
};

/// A complete estimation problem on [0, horizon].
struct Problem {
  Model model;
  MeasurementSet measurements;
  double horizon = 1.0;

  void validate() const;
};

struct BuiltinParams {
  double benes_initial_variance = 0.16;
  double vdp_initial_variance = 0.01;
  double vdp_damping = 2.0;
  double vdp_noise = 0.1;
  double ou_rate = 1.0;
  double ou_initial_variance = 1.0;
};

/// "benes", "vdp" or "ou". Throws std::invalid_argument for unknown names.
Model builtin_model(std::string_view name, const BuiltinParams& params = {});

struct ModelValidationReport {
  double max_divergence_error = 0.0;
  double max_jacobian_rel_error = 0.0;
  std::size_t samples = 0;
  bool passed = false;
};

/// Samples (t, x) and compares div against trace(jac) (tolerance 1e-10) and jac
/// against central differences of f (relative tolerance 1e-5).
ModelValidationReport validate_model(const DriftModel& model, std::size_t samples,
                                     std::uint64_t seed = 7, double state_scale = 2.0,
                                     double horizon = 1.0);

}  // namespace sdemap
