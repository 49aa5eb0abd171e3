#include "sdemap/path.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sdemap {

DiscretePath::DiscretePath(TimeGrid grid, Matrix states)
    : grid_(std::move(grid)), states_(std::move(states)) {
  if (states_.cols() != static_cast<Index>(grid_.size()))
    throw std::invalid_argument("DiscretePath: state count does not match grid length");
  if (states_.rows() < 1) throw std::invalid_argument("DiscretePath: state dimension must be >= 1");
}

DiscretePath DiscretePath::constant(TimeGrid grid, const Vector& state) {
  Matrix states = state.replicate(1, static_cast<Index>(grid.size()));
  return DiscretePath(std::move(grid), std::move(states));
}

DiscretePath DiscretePath::from_flat(TimeGrid grid, Index dim, const Vector& flat) {
  if (flat.size() != dim * static_cast<Index>(grid.size()))
    throw std::invalid_argument("DiscretePath::from_flat: size mismatch");
  Matrix states = Eigen::Map<const Matrix>(flat.data(), dim, static_cast<Index>(grid.size()));
  return DiscretePath(std::move(grid), std::move(states));
}

Vector DiscretePath::flat() const { return Eigen::Map<const Vector>(states_.data(), states_.size()); }

void DiscretePath::set_flat(const Vector& flat) {
  if (flat.size() != states_.size()) throw std::invalid_argument("DiscretePath::set_flat: size mismatch");
  Eigen::Map<Vector>(states_.data(), states_.size()) = flat;
}

Vector DiscretePath::at(double t) const {
  const std::size_t k = grid_.segment_of(t);
  const double t0 = grid_.time(k), t1 = grid_.time(k + 1);
  const double theta = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
  return (1.0 - theta) * state(k) + theta * state(k + 1);
}

DiscretePath DiscretePath::resample(const TimeGrid& grid) const {
  if (std::abs(grid.horizon() - grid_.horizon()) > grid_.tolerance())
    throw std::invalid_argument("DiscretePath::resample: horizons differ");
  Matrix states(dim(), static_cast<Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) states.col(static_cast<Index>(k)) = at(grid.time(k));
  return DiscretePath(grid, std::move(states));
}

double sup_distance(const DiscretePath& a, const DiscretePath& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("sup_distance: dimension mismatch");
  double d = 0.0;
  std::size_t common = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    auto j = b.grid().find(a.grid().time(k));
    if (!j) continue;
    ++common;
    d = std::max(d, (a.state(k) - b.state(*j)).norm());
  }
  if (common == 0) throw std::invalid_argument("sup_distance: no common grid points");
  return d;
}

}  // namespace sdemap
