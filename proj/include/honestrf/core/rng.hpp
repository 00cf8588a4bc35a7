#pragma once

#include <cstdint>
#include <random>

namespace honestrf {

using Rng = std::mt19937_64;

/// Independent random streams derived from one master seed. Every task (tree,
/// anchor, trial, coupled draw) owns a stream identified by (purpose, index), so
/// results never depend on which worker thread ran the task.
enum class Stream : std::uint64_t {
  subsample = 1,
  tree = 2,
  data = 3,
  anchor = 4,
  fresh = 5,
  trial = 6,
  coupling = 7,
  probe = 8,
};

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream purpose,
                                    std::uint64_t index) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ static_cast<std::uint64_t>(purpose)) ^
                    index);
}

inline Rng make_rng(std::uint64_t master, Stream purpose, std::uint64_t index) {
  return Rng(derive_seed(master, purpose, index));
}

/// Uniform draw on [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace honestrf
