#include "sdemap/grid.hpp"

#include <algorithm>
#include <iterator>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sdemap {

double time_tolerance(double horizon) { return 1e-10 * std::max(1.0, std::abs(horizon)); }

TimeGrid::TimeGrid(std::vector<double> times, std::vector<double> measurement_times,
                   std::optional<double> mesh_bound)
    : times_(std::move(times)), meas_times_(std::move(measurement_times)) {
  if (times_.size() < 2) throw std::invalid_argument("TimeGrid: need at least two points");
  if (times_.front() != 0.0) throw std::invalid_argument("TimeGrid: first point must be 0");
  for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
    if (!(times_[k + 1] > times_[k]))
      throw std::invalid_argument("TimeGrid: points must be strictly increasing (index " +
                                  std::to_string(k + 1) + ")");
  }
  mesh_bound_ = mesh_bound.value_or(10.0 * horizon());
  if (!(mesh_bound_ > 0.0)) throw std::invalid_argument("TimeGrid: mesh bound must be positive");
  const double bound_tol = 1e-12 * mesh_bound_;
  if (static_cast<double>(segments()) * mesh() > mesh_bound_ + bound_tol)
    throw std::invalid_argument("TimeGrid: N * mesh exceeds the configured bound");

  std::sort(meas_times_.begin(), meas_times_.end());
  meas_index_.reserve(meas_times_.size());
  for (double t : meas_times_) {
    auto k = find(t);
    if (!k)
      throw std::invalid_argument("TimeGrid: measurement instant " + std::to_string(t) +
                                  " is not a grid point");
    meas_index_.push_back(*k);
  }
}

double TimeGrid::mesh() const {
  double m = 0.0;
  for (std::size_t k = 0; k + 1 < times_.size(); ++k) m = std::max(m, step(k));
  return m;
}

double TimeGrid::tolerance() const { return time_tolerance(horizon()); }

std::optional<std::size_t> TimeGrid::find(double t) const {
  const double tol = tolerance();
  auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
  if (it != times_.end() && std::abs(*it - t) <= tol)
    return static_cast<std::size_t>(it - times_.begin());
  return std::nullopt;
}

std::size_t TimeGrid::index_of(double t) const {
  auto k = find(t);
  if (!k) throw std::out_of_range("TimeGrid: " + std::to_string(t) + " is not a grid point");
  return *k;
}

std::size_t TimeGrid::segment_of(double t) const {
  if (t <= times_.front()) return 0;
  if (t >= times_.back()) return segments() - 1;
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  return static_cast<std::size_t>(it - times_.begin()) - 1;
}

TimeGrid make_uniform_grid(double horizon, std::size_t segments,
                           const std::vector<double>& measurement_times,
                           std::optional<double> mesh_bound) {
  if (!(horizon > 0.0)) throw std::invalid_argument("make_uniform_grid: T must be positive");
  if (segments == 0) throw std::invalid_argument("make_uniform_grid: N must be at least 1");
  const double tol = time_tolerance(horizon);
  for (double t : measurement_times) {
    if (!(t >= -tol && t <= horizon + tol))
      throw std::invalid_argument("make_uniform_grid: measurement instant " + std::to_string(t) +
                                  " outside [0, T]");
  }

  std::vector<double> times(segments + 1);
  for (std::size_t k = 0; k <= segments; ++k)
    times[k] = horizon * static_cast<double>(k) / static_cast<double>(segments);
  times.back() = horizon;

  std::vector<double> extra;
  for (double t : measurement_times) {
    auto it = std::lower_bound(times.begin(), times.end(), t - tol);
    bool present = it != times.end() && std::abs(*it - t) <= tol;
    if (!present) extra.push_back(t);
  }
  if (!extra.empty()) {
    std::sort(extra.begin(), extra.end());
    extra.erase(std::unique(extra.begin(), extra.end(),
                            [tol](double a, double b) { return std::abs(a - b) <= tol; }),
                extra.end());
    std::vector<double> merged;
    merged.reserve(times.size() + extra.size());
    std::merge(times.begin(), times.end(), extra.begin(), extra.end(), std::back_inserter(merged));
    times = std::move(merged);
  }
  return TimeGrid(std::move(times), measurement_times, mesh_bound);
}

TimeGrid refine_grid(const TimeGrid& grid, int factor) {
  if (factor < 2) throw std::invalid_argument("refine_grid: factor must be at least 2");
  const auto& t = grid.times();
  std::vector<double> times;
  times.reserve(grid.segments() * static_cast<std::size_t>(factor) + 1);
  for (std::size_t k = 0; k < grid.segments(); ++k) {
    const double a = t[k], b = t[k + 1];
    times.push_back(a);
    for (int j = 1; j < factor; ++j) times.push_back(a + (b - a) * j / factor);
  }
  times.push_back(t.back());
  return TimeGrid(std::move(times), grid.measurement_times(), grid.mesh_bound());
}

}  // namespace sdemap
