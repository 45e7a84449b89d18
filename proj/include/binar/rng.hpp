#pragma once

#include <cstdint>
#include <random>

namespace binar {

// Every random quantity in the library is drawn from a std::mt19937_64
// engine through boost::random distributions, whose output is specified
// (unlike the std:: distributions), so results are portable.
using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the independent stream number `index` under `master`.
///
/// derive_seed(master, index) = splitmix64(splitmix64(master) ^ splitmix64(~index)).
/// Streams are addressed by index, so a replication's draws do not depend
/// on which thread runs it or in which order replications are scheduled.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(~index));
}

inline Engine make_engine(std::uint64_t master, std::uint64_t index) {
  return Engine{derive_seed(master, index)};
}

}  // namespace binar
