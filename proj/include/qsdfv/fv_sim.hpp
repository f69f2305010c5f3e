#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qsdfv/offspring_law.hpp"
#include "qsdfv/particle_config.hpp"
#include "qsdfv/stats.hpp"

namespace qsdfv {

// One event of the Fleming-Viot dynamics. offspring == 1 events are no-ops
// kept in the stream so the per-particle rate stays exactly its position.
struct FvEvent {
  double time;
  int particle;
  int offspring;
  int from;
  int to;
};

// Exact event-driven simulation. The next event time is exponential with
// rate M1 (each unit of position carries rate 1); the jumping particle is
// chosen with probability position/M1; an offspring count l ~ p is drawn;
// l = 1 does nothing; l >= 2 moves the particle up by l-1; l = 0 moves it
// down unless it sits at 1, in which case it adopts the position of a
// uniformly chosen other particle. Deterministic given (seed, start).
class FvSimulator {
 public:
  FvSimulator(const OffspringLaw& law, ParticleConfig start, std::uint64_t seed)
      : law_(law), state_(std::move(start)), rng_(seed) {}

  const ParticleConfig& config() const { return state_; }
  double time() const { return time_; }
  std::uint64_t event_count() const { return events_; }

  FvEvent step();

  // advance to t_end; returns number of events executed
  std::uint64_t run_until(double t_end) {
    std::uint64_t n = 0;
    while (peek_next_time() < t_end) {
      step();
      ++n;
    }
    time_ = t_end;
    pending_ = false;
    return n;
  }

  // time of the next event without executing it
  double peek_next_time() {
    if (!pending_) {
      next_time_ = time_ + rng_.exponential(static_cast<double>(state_.m1()));
      pending_ = true;
    }
    return next_time_;
  }

 private:
  OffspringLaw law_;
  ParticleConfig state_;
  Rng rng_;
  double time_ = 0.0;
  double next_time_ = 0.0;
  bool pending_ = false;
  std::uint64_t events_ = 0;
};

// Exact generator application:
//   L f(xi) = sum_i sum_y [q(xi_i, y) + q(xi_i, 0) N/(N-1) m(y, xi)]
//             [f(xi^{i,y}) - f(xi)].
// The two addends are also available separately (spatial drift vs refeed).
using ConfigFunction = std::function<double(const ParticleConfig&)>;

double apply_generator(const OffspringLaw& law, const ParticleConfig& xi,
                       const ConfigFunction& f);
double apply_generator_drift(const OffspringLaw& law, const ParticleConfig& xi,
                             const ConfigFunction& f);
double apply_generator_refeed(const OffspringLaw& law, const ParticleConfig& xi,
                              const ConfigFunction& f);

// Output of a stationary run: time-weighted averages over [burn_in, horizon]
// with batch-means confidence intervals for the scalar functionals.
struct StationaryRunResult {
  std::vector<double> mbar;  // time-averaged empirical measure, 0-based
  CiValue psi;
  CiValue rightmost;
  CiValue exp_rho_r;  // time average of exp(rho * R)
  CiValue m1_over_n;
  CiValue m_site[3];  // m(1), m(2), m(3)
  CiValue m1m2_product;
  double rho = 0.0;
  bool rho_warning = false;  // requested rho >= beta
  std::uint64_t events = 0;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  double burn_in = 0.0;
  double wall_seconds = 0.0;
};

// Time-weighted statistics of one trajectory started from `start`.
// rho <= 0 selects the default beta/2 for the exponential-moment accumulator.
StationaryRunResult stationary_run(const OffspringLaw& law,
                                   const ParticleConfig& start, double horizon,
                                   double burn_in, std::uint64_t seed,
                                   double rho = 0.0, int batches = 20);

}  // namespace qsdfv
