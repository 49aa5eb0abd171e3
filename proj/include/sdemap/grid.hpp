#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace sdemap {

/// Ordered partition 0 = t_0 < t_1 < ... < t_N = T of the estimation window.
///
/// Every measurement instant is a grid point. The product N * mesh is bounded
/// by a constant (default 10 * T) so that refinement sequences stay
/// quasi-uniform.
class TimeGrid {
 public:
  TimeGrid(std::vector<double> times, std::vector<double> measurement_times,
           std::optional<double> mesh_bound = std::nullopt);

  const std::vector<double>& times() const { return times_; }
  double time(std::size_t k) const { return times_[k]; }
  std::size_t size() const { return times_.size(); }
  std::size_t segments() const { return times_.size() - 1; }
  double horizon() const { return times_.back(); }
  double step(std::size_t k) const { return times_[k + 1] - times_[k]; }
  double mesh() const;
  double mesh_bound() const { return mesh_bound_; }

  const std::vector<double>& measurement_times() const { return meas_times_; }
  const std::vector<std::size_t>& measurement_indices() const { return meas_index_; }

  /// Index of the grid point equal to t (within tolerance); nullopt otherwise.
  std::optional<std::size_t> find(double t) const;
  /// As find(), but throws std::out_of_range when t is not a grid point.
  std::size_t index_of(double t) const;
  /// Segment k with t_k <= t <= t_{k+1}; t is clamped to [0, T].
  std::size_t segment_of(double t) const;

  /// Matching tolerance used for merging and lookups.
  double tolerance() const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::vector<double> times_;
  std::vector<double> meas_times_;
  std::vector<std::size_t> meas_index_;
  double mesh_bound_ = 0.0;
};

/// Time-matching tolerance for a window of length `horizon`.
double time_tolerance(double horizon);

/// N near-uniform segments on [0, T] with the measurement instants merged in.
TimeGrid make_uniform_grid(double horizon, std::size_t segments,
                           const std::vector<double>& measurement_times,
                           std::optional<double> mesh_bound = std::nullopt);

/// Splits every segment into `factor` equal parts. The result contains the
/// input grid.
TimeGrid refine_grid(const TimeGrid& grid, int factor);

}  // namespace sdemap
