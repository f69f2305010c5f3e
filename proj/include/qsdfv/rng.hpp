#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qsdfv {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream derivation: replica r of sweep cell c gets a seed that
// depends only on (master, c, r), so parallel scheduling cannot change results.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell,
                                 std::uint64_t replica) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64_next(s);
  s = a ^ (cell * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  std::uint64_t b = splitmix64_next(s);
  s = b ^ (replica * 0x9e3779b97f4a7c15ULL + 1);
  return splitmix64_next(s);
}

// mt19937_64 wrapper with fixed sampling algorithms. We avoid the std
// distribution classes so a given seed always produces the same stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double exponential(double rate) {
    double u = 1.0 - uniform01();  // (0, 1]
    return -std::log(u) / rate;
  }

  // uniform in {0, ..., n-1}
  std::uint64_t uniform_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(gen_()) * n) >> 64);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace qsdfv
