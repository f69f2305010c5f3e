#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qsdfv/fenwick.hpp"
#include "qsdfv/rng.hpp"

namespace qsdfv {

// Positions of the N Fleming-Viot particles together with the derived
// structures every event needs: an occupation count per site, the running
// first and second position moments, the rightmost position, and a Fenwick
// index over the particles weighted by position (total weight = M1, which is
// also the total event rate of the system).
class ParticleConfig {
 public:
  ParticleConfig(int n, int initial_position = 1)
      : ParticleConfig(std::vector<int>(static_cast<std::size_t>(n), initial_position)) {}

  explicit ParticleConfig(std::vector<int> positions) : pos_(std::move(positions)) {
    if (pos_.size() < 2)
      throw std::invalid_argument("particle config: need at least 2 particles");
    weights_ = FenwickTree(pos_.size());
    for (std::size_t i = 0; i < pos_.size(); ++i) {
      int x = pos_[i];
      if (x < 1) throw std::invalid_argument("particle config: positions must be >= 1");
      ensure_site(x);
      occ_[static_cast<std::size_t>(x)] += 1;
      m1_ += x;
      m2_ += static_cast<std::int64_t>(x) * x;
      if (x > rmax_) rmax_ = x;
      weights_.set(i, x);
    }
  }

  int n() const { return static_cast<int>(pos_.size()); }
  int position(int i) const { return pos_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& positions() const { return pos_; }
  std::int64_t m1() const { return m1_; }
  std::int64_t m2() const { return m2_; }
  int rightmost() const { return rmax_; }
  int occupancy(int x) const {
    return (x >= 1 && x < static_cast<int>(occ_.size())) ? occ_[static_cast<std::size_t>(x)] : 0;
  }
  double empirical(int x) const {
    return static_cast<double>(occupancy(x)) / static_cast<double>(n());
  }
  // m(x) for x = 1..rightmost, stored 0-based (index i <-> state i+1)
  std::vector<double> empirical_measure() const {
    std::vector<double> m(static_cast<std::size_t>(rmax_));
    for (int x = 1; x <= rmax_; ++x)
      m[static_cast<std::size_t>(x) - 1] = empirical(x);
    return m;
  }
  // M2 / M1, sandwiched between 1 and the rightmost position
  double psi() const { return static_cast<double>(m2_) / static_cast<double>(m1_); }

  void move_particle(int i, int y) {
    int x = pos_[static_cast<std::size_t>(i)];
    if (y == x) return;
    ensure_site(y);
    occ_[static_cast<std::size_t>(x)] -= 1;
    occ_[static_cast<std::size_t>(y)] += 1;
    m1_ += y - x;
    m2_ += static_cast<std::int64_t>(y) * y - static_cast<std::int64_t>(x) * x;
    pos_[static_cast<std::size_t>(i)] = y;
    weights_.set(static_cast<std::size_t>(i), y);
    if (y > rmax_) rmax_ = y;
    while (rmax_ > 1 && occ_[static_cast<std::size_t>(rmax_)] == 0) --rmax_;
  }

  // particle i with probability position(i) / M1
  int sample_weighted(Rng& rng) const {
    return static_cast<int>(weights_.find(
        static_cast<std::int64_t>(rng.uniform_below(static_cast<std::uint64_t>(m1_)))));
  }

  // uniform over the other N-1 particles
  int sample_uniform_other(int i, Rng& rng) const {
    int j = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n() - 1)));
    return j >= i ? j + 1 : j;
  }

  void check_consistency() const;

 private:
  void ensure_site(int x) {
    if (x >= static_cast<int>(occ_.size()))
      occ_.resize(static_cast<std::size_t>(x) * 2 + 1, 0);
  }

  std::vector<int> pos_;
  std::vector<int> occ_;  // occ_[x] = number of particles at site x
  FenwickTree weights_;
  std::int64_t m1_ = 0;
  std::int64_t m2_ = 0;
  int rmax_ = 1;
};

}  // namespace qsdfv
