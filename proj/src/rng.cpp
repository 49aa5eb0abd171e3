#include "sdemap/rng.hpp"

namespace sdemap {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t index) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(index), hi(index), 0x5d3e9a17u};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t index)
    : seed_(seed), index_(index), engine_(seeded_engine(seed, index)) {}

}  // namespace sdemap
