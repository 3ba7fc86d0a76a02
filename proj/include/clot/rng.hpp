#pragma once

#include <array>
#include <cstdint>

namespace clot {

// xoshiro256++ seeded through splitmix64. Same seed, same stream — explicit
// value passed to every stochastic operation; no global state anywhere.
struct Rng {
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                                  // [0, 1)
  double normal();                                   // standard normal
  std::uint64_t uniform_below(std::uint64_t bound);  // unbiased in [0, bound)
  Rng fork(std::uint64_t tag);                       // derived child stream

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace clot
