#pragma once

#include <Eigen/Dense>

#include "sdemap/grid.hpp"

namespace sdemap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// States x_0..x_N aligned with a TimeGrid, read everywhere as the piecewise
/// linear interpolant with breaks on the grid.
///
/// Storage is n x (N+1), one column per grid point, so the flattened vector
/// used by the optimizer is node-major: x_k occupies [k*n, (k+1)*n).
class DiscretePath {
 public:
  DiscretePath(TimeGrid grid, Matrix states);

  static DiscretePath constant(TimeGrid grid, const Vector& state);
  static DiscretePath from_flat(TimeGrid grid, Index dim, const Vector& flat);

  const TimeGrid& grid() const { return grid_; }
  Index dim() const { return states_.rows(); }
  std::size_t size() const { return grid_.size(); }
  const Matrix& states() const { return states_; }
  auto state(std::size_t k) const { return states_.col(static_cast<Index>(k)); }

  Vector flat() const;
  void set_flat(const Vector& flat);

  /// Piecewise-linear interpolant evaluated at t (clamped to [0, T]).
  Vector at(double t) const;

  /// Piecewise-linear interpolant sampled on another grid with the same horizon.
  DiscretePath resample(const TimeGrid& grid) const;

 private:
  TimeGrid grid_;
  Matrix states_;
};

/// Largest Euclidean distance between the two paths over the grid points of
/// `a` that are also grid points of `b`. Throws if there are none.
double sup_distance(const DiscretePath& a, const DiscretePath& b);

}  // namespace sdemap
