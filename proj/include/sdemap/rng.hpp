#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace sdemap {

/// Reproducible random stream identified by (master seed, stream index).
/// Distinct pairs give independent engines; equal pairs give identical draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t index() const { return index_; }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t index_;
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};  // ziggurat
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace sdemap
