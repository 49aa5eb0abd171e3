#pragma once

// Independent reference computations used to check the main pipeline.

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sdemap/functionals.hpp"
#include "sdemap/model.hpp"

namespace sdemap {

// ---------------------------------------------------------------------------
// Finite differences

class NonFiniteProbeError : public std::runtime_error {
 public:
  explicit NonFiniteProbeError(Index component);
  Index component() const { return component_; }

 private:
  Index component_;
};

/// Central differences with step h * max(1, |x_i|) in each component.
Vector fd_gradient(const std::function<double(const Vector&)>& objective, const Vector& x, double h = 1e-6);

/// ||analytic - reference||_inf / max(||reference||_inf, ||analytic||_inf); 0 if both vanish.
double gradient_relative_error(const Vector& analytic, const Vector& reference);

// ---------------------------------------------------------------------------
// Exact Benes transition density for dX = tanh(X) dt + dW:
//   p(x1 | x0; d) = cosh(x1) / cosh(x0) * exp(-d / 2) * N(x1; x0, d)

double log_cosh(double x);
double benes_exact_log_transition(double x_from, double x_to, double delta);
/// (d/dx_from, d/dx_to) of the log transition density.
std::pair<double, double> benes_exact_log_transition_gradient(double x_from, double x_to, double delta);
/// Closed-form CDF of X_{t+delta} given X_t = x_from.
double benes_exact_cdf(double x_from, double x, double delta);

// ---------------------------------------------------------------------------
// Linear-Gaussian reference smoother

struct LinearGaussianSpec {
  Matrix drift;       ///< A in f(x) = A x
  Matrix diffusion;   ///< G
  Vector initial_mean;
  Matrix initial_covariance;
};

struct LinearMeasurement {
  double time = 0.0;
  Vector value;
  Matrix observation;  ///< H
  Matrix noise;        ///< R (may be zero)
};

struct ExactTransition {
  Matrix transition;  ///< exp(A d)
  Matrix covariance;  ///< int_0^d exp(A s) G G^T exp(A s)^T ds
};

/// Exact discretization for diagonalizable A via its eigendecomposition.
ExactTransition exact_linear_transition(const Matrix& drift, const Matrix& diffusion_cov, double delta);

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SmootherResult {
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
};

/// Kalman filter + Rauch-Tung-Striebel smoother on the grid under the exact
/// discretization. Measurement instants must be grid points.
SmootherResult rts_smoother(const LinearGaussianSpec& lgs, const TimeGrid& grid,
                            const std::vector<LinearMeasurement>& measurements);

/// Extracts the linear-Gaussian data from a problem with LinearDrift,
/// GaussianDensity and GaussianLikelihood measurements. Throws otherwise.
std::pair<LinearGaussianSpec, std::vector<LinearMeasurement>> linear_gaussian_from_problem(
    const Problem& problem);

// ---------------------------------------------------------------------------
// Quadrature refinement

struct QuadratureReport {
  double energy_3 = 0.0;
  double energy_7 = 0.0;
  double om_3 = 0.0;
  double om_7 = 0.0;
  double energy_difference = 0.0;
  double om_difference = 0.0;
};

/// J and J_e with the 3-point and 7-point Gauss rules. Diagnostic only.
QuadratureReport quadrature_refine_check(const DiscretePath& path, const DriftModel& drift,
                                         const Diffusion& diffusion);
QuadratureReport quadrature_refine_check(const SmoothPath& path, const TimeGrid& grid,
                                         const DriftModel& drift, const Diffusion& diffusion);

}  // namespace sdemap
