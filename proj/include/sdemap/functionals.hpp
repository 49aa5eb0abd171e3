#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sdemap/model.hpp"

namespace sdemap {

/// Extended-real merit value. A value of -infinity is an explicit state (zero
/// prior or likelihood density) and carries no gradient; finite values always
/// carry the gradient with respect to the flattened path.
struct MeritValue {
  double value = -std::numeric_limits<double>::infinity();
  std::optional<Vector> gradient;

  bool is_finite() const { return value > -std::numeric_limits<double>::infinity(); }
  static MeritValue negative_infinity() { return {}; }
};

/// Raised when det(I - 1/2 jac(t_{k+1}, x_{k+1}) delta_k) <= 0, i.e. the implicit
/// trapezoidal step is not a contraction on this grid.
class MeshTooCoarseError : public std::domain_error {
 public:
  MeshTooCoarseError(std::size_t segment, double determinant);
  std::size_t segment() const { return segment_; }

 private:
  std::size_t segment_;
};

/// Per-segment quadrature on the reference interval [0, 1]; weights sum to 1
/// and are scaled by the segment length when applied.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  static QuadratureRule gauss_legendre(int points);
};

/// Smooth path given by callbacks for phi(t) and its derivative.
struct SmoothPath {
  std::function<Vector(double)> value;
  std::function<Vector(double)> derivative;
};

// Discrete prior functionals on x_0..x_N.

/// R(x) = -1/2 sum_k delta_k ||dx_k / delta_k - f(t_k, x_k)||_Q^2.
MeritValue euler_energy(const DiscretePath& path, const DriftModel& drift, const Diffusion& diffusion);

/// U(x) = sum_k ln det(I - 1/2 jac(t_{k+1}, x_{k+1}) delta_k)
///        - 1/2 sum_k delta_k ||dx_k / delta_k - (f_k + f_{k+1}) / 2||_Q^2.
/// Throws MeshTooCoarseError when a determinant is not positive.
MeritValue trapezoidal_om(const DiscretePath& path, const DriftModel& drift, const Diffusion& diffusion);

/// Sum of exact Benes transition log-densities ln p(x_{k+1} | x_k; delta_k).
MeritValue benes_exact_prior(const DiscretePath& path);

// Continuous functionals evaluated by per-segment quadrature.

/// J_e(phi) = -1/2 int ||phi' - f(t, phi)||_Q^2 dt on the piecewise-linear path,
/// with gradient with respect to the nodes.
MeritValue continuous_energy(const DiscretePath& path, const DriftModel& drift, const Diffusion& diffusion,
                             const QuadratureRule& rule = QuadratureRule::gauss_legendre(3));

/// J(phi) = J_e(phi) - 1/2 int div f(t, phi) dt, with gradient.
MeritValue continuous_om(const DiscretePath& path, const DriftModel& drift, const Diffusion& diffusion,
                         const QuadratureRule& rule = QuadratureRule::gauss_legendre(3));

double continuous_energy(const SmoothPath& path, const TimeGrid& grid, const DriftModel& drift,
                         const Diffusion& diffusion, const QuadratureRule& rule);
double continuous_om(const SmoothPath& path, const TimeGrid& grid, const DriftModel& drift,
                     const Diffusion& diffusion, const QuadratureRule& rule);

// Posterior merits: prior functional + ln nu(x_0) + sum_t ln psi_t(y_t | x_t).

/// S = R + ln nu + sum ln psi.
MeritValue euler_merit(const DiscretePath& path, const Problem& problem);
/// V = U + ln nu + sum ln psi.
MeritValue trapezoidal_merit(const DiscretePath& path, const Problem& problem);
/// Exact-transition merit for the scalar Benes SDE dX = tanh(X) dt + dW.
MeritValue benes_exact_merit(const DiscretePath& path, const Problem& problem);
/// H_e = J_e + ln nu + sum ln psi on the piecewise-linear path.
MeritValue energy_merit(const DiscretePath& path, const Problem& problem,
                        const QuadratureRule& rule = QuadratureRule::gauss_legendre(3));
/// H = J + ln nu + sum ln psi on the piecewise-linear path.
MeritValue map_merit(const DiscretePath& path, const Problem& problem,
                     const QuadratureRule& rule = QuadratureRule::gauss_legendre(3));

double energy_merit(const SmoothPath& path, const TimeGrid& grid, const Problem& problem,
                    const QuadratureRule& rule);
double map_merit(const SmoothPath& path, const TimeGrid& grid, const Problem& problem,
                 const QuadratureRule& rule);

/// Adds ln nu(x_0) and the measurement log-likelihoods to a prior functional.
/// Measurement instants must be grid points.
MeritValue add_posterior_terms(MeritValue prior, const DiscretePath& path, const Problem& problem);

enum class MeritKind { euler, trapezoidal, exact, energy, onsager_machlup };

std::string to_string(MeritKind kind);
MeritKind parse_merit_kind(std::string_view name);

MeritValue evaluate_merit(MeritKind kind, const DiscretePath& path, const Problem& problem);

}  // namespace sdemap
