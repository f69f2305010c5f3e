#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qsdfv/fenwick.hpp"
#include "qsdfv/offspring_law.hpp"
#include "qsdfv/particle_config.hpp"
#include "qsdfv/rng.hpp"

namespace qsdfv {

class PopulationCapError : public std::runtime_error {
 public:
  PopulationCapError(double time_reached, std::size_t population)
      : std::runtime_error("branching population cap exceeded"),
        time_reached(time_reached),
        population(population) {}
  double time_reached;
  std::size_t population;
};

struct Individual {
  int type;
  int pos;
};

// State of the multitype branching process: a finite list of individuals,
// each carrying a type in {0..N-1} and a position >= 1.
struct MultitypeState {
  int n_types = 1;
  std::vector<Individual> individuals;

  static MultitypeState paired_with(const ParticleConfig& xi) {
    MultitypeState z;
    z.n_types = xi.n();
    z.individuals.reserve(static_cast<std::size_t>(xi.n()));
    for (int i = 0; i < xi.n(); ++i)
      z.individuals.push_back(Individual{i, xi.position(i)});
    return z;
  }

  std::size_t size() const { return individuals.size(); }
  long long count(int type, int pos) const {
    long long c = 0;
    for (const auto& ind : individuals)
      if (ind.type == type && ind.pos == pos) ++c;
    return c;
  }
  int rightmost() const {
    int r = 0;
    for (const auto& ind : individuals) r = std::max(r, ind.pos);
    return r;
  }
};

// Multitype branching dynamics: individual positions evolve with the absorbed
// rates restricted to {1, 2, ...} (the jump to 0 from state 1 is suppressed),
// and for every ordered pair (i, j), i != j, at rate qbar/(N-1) every
// j-individual spawns an i-individual at its own position. Population only
// grows; a configurable cap guards against runaway horizons.
class BranchingSimulator {
 public:
  BranchingSimulator(const OffspringLaw& law, MultitypeState init,
                     std::uint64_t seed, std::size_t population_cap = 1000000);
  virtual ~BranchingSimulator() = default;

  double time() const { return time_; }
  std::size_t population() const { return types_.size(); }
  int rightmost() const { return rmax_; }
  std::uint64_t event_count() const { return events_; }
  MultitypeState state() const;

  // one event; returns false (with the clock advanced to t_end) once the
  // next event would land past t_end
  bool step_until(double t_end);
  void run_until(double t_end) {
    while (step_until(t_end)) {
    }
  }

 protected:
  void spatial_event();
  // branch every source-type individual into a newborn of the target type;
  // returns the index of the newborn spawned by `tracked` (or -1)
  long long branch_event(int target_type, int source_type, long long tracked);
  void move_individual(std::size_t k, int new_pos);
  void append_individual(int type, int pos);

  virtual void on_pair_event(int target_type, int source_type) {
    branch_event(target_type, source_type, -1);
  }
  virtual void on_individual_moved(std::size_t /*k*/, int /*new_pos*/) {}

  const OffspringLaw& law() const { return law_; }
  Rng& rng() { return rng_; }
  int n_types() const { return n_types_; }
  int position_of(std::size_t k) const { return pos_[k]; }
  int type_of(std::size_t k) const { return types_[k]; }

 private:
  OffspringLaw law_;
  int n_types_;
  std::size_t cap_;
  Rng rng_;
  double time_ = 0.0;
  std::uint64_t events_ = 0;

  std::vector<int> types_;
  std::vector<int> pos_;
  std::vector<std::vector<std::size_t>> by_type_;
  FenwickTree weights_;  // individual k sampled with weight pos_[k]
  std::vector<std::int64_t> occ_;
  int rmax_ = 0;
};

// Harris coupling of the Fleming-Viot particles with the branching process:
// particle i always sits on a type-i individual (its "ride"). Spatial moves
// of the ridden individual carry the particle along; pair events (i, j) are
// thinned with probability q(xi(i), 0)/qbar into refeed jumps of particle i,
// which then re-attaches to the newborn spawned by particle j's ride.
class CoupledSimulator : public BranchingSimulator {
 public:
  CoupledSimulator(const OffspringLaw& law, const ParticleConfig& xi0,
                   std::uint64_t seed, std::size_t population_cap = 1000000);

  const ParticleConfig& particles() const { return xi_; }

  // after every event: zeta(i, xi(i)) >= 1 and R(xi) <= R(zeta)
  bool invariants_ok() const;

  // run and report whether the invariants held after every single event
  bool run_checked(double t_end) {
    bool ok = true;
    while (step_until(t_end))
      if (!invariants_ok()) ok = false;
    return ok;
  }

 private:
  void on_pair_event(int target_type, int source_type) override;
  void on_individual_moved(std::size_t k, int new_pos) override;

  ParticleConfig xi_;
  std::vector<long long> ride_;  // particle -> individual index
  std::vector<int> ridden_by_;   // individual -> particle or -1
};

// Reflected Galton-Watson walker: the absorbing jump from state 1 is a no-op.
class ReflectedGw {
 public:
  ReflectedGw(const OffspringLaw& law, int x0, std::uint64_t seed)
      : law_(law), x_(x0), rng_(seed) {
    if (x0 < 1) throw std::invalid_argument("reflected GW: start must be >= 1");
  }

  int position() const { return x_; }
  double time() const { return time_; }

  // advance one event or stop at t_end; returns false at t_end
  bool step_until(double t_end) {
    double dt = rng_.exponential(static_cast<double>(x_));
    if (time_ + dt >= t_end) {
      time_ = t_end;
      return false;
    }
    time_ += dt;
    int l = law_.sample(rng_);
    if (l != 1 && !(l == 0 && x_ == 1)) x_ += l - 1;
    return true;
  }
  void run_until(double t_end) {
    while (step_until(t_end)) {
    }
  }

 private:
  OffspringLaw law_;
  int x_;
  Rng rng_;
  double time_ = 0.0;
};

}  // namespace qsdfv
