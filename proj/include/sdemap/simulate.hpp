#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "sdemap/model.hpp"
#include "sdemap/rng.hpp"

namespace sdemap {

/// Raised when a simulated state stops being finite.
class NonFiniteStateError : public std::runtime_error {
 public:
  explicit NonFiniteStateError(std::size_t step);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Wiener increment dW over a step of length h together with the multiple
/// integral dZ = int_t^{t+h} (W_s - W_t) ds, per noise component.
struct WienerPair {
  Vector dw;
  Vector dz;
};

/// dW = U1 sqrt(h), dZ = h^{3/2} (U1 + U2 / sqrt(3)) / 2 with U1, U2 ~ N(0, I).
/// Gives Var dW = h, Cov(dW, dZ) = h^2 / 2, Var dZ = h^3 / 3.
WienerPair draw_wiener_pair(Index dim, double h, RngStream& rng);

Vector euler_maruyama_step(const DriftModel& drift, const Diffusion& diffusion, double t, const Vector& x,
                           double h, const Vector& dw);

/// Explicit strong order 1.5 step for additive noise (derivative-free form):
///   Y' = Y + G dW + (1 / (2 sqrt h)) sum_j (a+^j - a-^j) dZ^j
///          + h / 4 [sum_j (a+^j + a-^j) - (2m - 4) a]
/// with a+-^j the drift at Y + a h / m +- G_j sqrt(h). The drift is evaluated
/// at the left endpoint t; the built-in models are autonomous.
Vector strong_order15_step(const DriftModel& drift, const Diffusion& diffusion, double t, const Vector& x,
                           double h, const Vector& dw, const Vector& dz);

/// Simulates on the uniform grid 0, h, ..., T (h must divide T). Draws one
/// normal per component and step.
DiscretePath euler_maruyama(const DriftModel& drift, const Diffusion& diffusion, const Vector& x0, double h,
                            double horizon, RngStream& rng);

/// As euler_maruyama, with draw_wiener_pair increments and the order 1.5 step.
DiscretePath strong_order15(const DriftModel& drift, const Diffusion& diffusion, const Vector& x0, double h,
                            double horizon, RngStream& rng);

/// Draws from N(mean, cov) using the Cholesky factor of cov.
Vector sample_gaussian(const Vector& mean, const Matrix& cov, RngStream& rng);

struct SimulatedMeasurements {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<bool> outlier;

  std::size_t outlier_count() const;
};

/// Observes component `component` of the path at t = 0, step, 2 step, ... <= T.
/// With probability p_outlier y ~ N(u_t, sigma_outlier^2), else N(u_t, sigma_y^2).
/// Each instant consumes one uniform and one normal draw, in that order.
SimulatedMeasurements sample_measurements(const DiscretePath& path, double step, double sigma_y,
                                          double sigma_outlier, double p_outlier, Index component,
                                          RngStream& rng);

/// Attaches one likelihood to every simulated measurement.
MeasurementSet to_measurement_set(const SimulatedMeasurements& sim,
                                  std::shared_ptr<const MeasurementLikelihood> likelihood);

/// ln psi = -(5/2) ln(1 + (u - y)^2 / (4 sigma^2)) with u = x(component), and
/// its gradient with respect to x.
std::pair<double, Vector> student_t_loglik(double y, const Vector& x, double sigma, Index component);

}  // namespace sdemap
