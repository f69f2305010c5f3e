#include "qsdfv/fv_sim.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "qsdfv/stats.hpp"

namespace qsdfv {

namespace {

#ifdef NDEBUG
constexpr std::uint64_t kCheckEvery = 10000;
#else
constexpr std::uint64_t kCheckEvery = 1;
#endif

}  // namespace

void ParticleConfig::check_consistency() const {
  std::int64_t m1 = 0, m2 = 0;
  int rmax = 1;
  std::vector<int> occ(occ_.size(), 0);
  for (int x : pos_) {
    if (x < 1) throw std::logic_error("particle below 1");
    occ[static_cast<std::size_t>(x)] += 1;
    m1 += x;
    m2 += static_cast<std::int64_t>(x) * x;
    if (x > rmax) rmax = x;
  }
  if (occ != occ_) throw std::logic_error("occupation index out of sync");
  if (m1 != m1_ || m2 != m2_) throw std::logic_error("moment accumulators out of sync");
  if (rmax != rmax_) throw std::logic_error("rightmost marker out of sync");
  if (weights_.total() != m1_) throw std::logic_error("weight index out of sync");
}

FvEvent FvSimulator::step() {
  double t = peek_next_time();
  pending_ = false;
  time_ = t;
  int i = state_.sample_weighted(rng_);
  int x = state_.position(i);
  int l = law_.sample(rng_);
  int y = x;
  if (l == 0) {
    y = (x == 1) ? state_.position(state_.sample_uniform_other(i, rng_)) : x - 1;
  } else if (l >= 2) {
    y = x + l - 1;
  }
  if (y != x) state_.move_particle(i, y);
  ++events_;
  if (events_ % kCheckEvery == 0) state_.check_consistency();
  return FvEvent{t, i, l, x, y};
}

namespace {

// enumerate every jump target of the generator at xi and accumulate
// rate * (f(xi^{i,y}) - f(xi)); `parts` selects drift (bit 0) / refeed (bit 1)
double generator_sum(const OffspringLaw& law, const ParticleConfig& xi,
                     const ConfigFunction& f, unsigned parts) {
  ParticleConfig scratch = xi;
  const double f0 = f(scratch);
  const int n = xi.n();
  const double refeed_factor =
      static_cast<double>(n) / static_cast<double>(n - 1);
  double acc = 0.0;
  auto add = [&](int i, int y, double rate) {
    if (rate == 0.0) return;
    int x = scratch.position(i);
    if (y == x) return;  // f-difference vanishes
    scratch.move_particle(i, y);
    acc += rate * (f(scratch) - f0);
    scratch.move_particle(i, x);
  };
  for (int i = 0; i < n; ++i) {
    const int x = xi.position(i);
    if (parts & 1u) {
      if (x >= 2) add(i, x - 1, static_cast<double>(x) * law.prob(0));
      for (int l = 2; l <= law.max_offspring(); ++l)
        add(i, x + l - 1, static_cast<double>(x) * law.prob(l));
    }
    if ((parts & 2u) && law.rate(x, 0) > 0.0) {
      const double kill = law.rate(x, 0) * refeed_factor;
      for (int y = 1; y <= xi.rightmost(); ++y)
        if (xi.occupancy(y) > 0) add(i, y, kill * xi.empirical(y));
    }
  }
  return acc;
}

}  // namespace

double apply_generator(const OffspringLaw& law, const ParticleConfig& xi,
                       const ConfigFunction& f) {
  return generator_sum(law, xi, f, 3u);
}

double apply_generator_drift(const OffspringLaw& law, const ParticleConfig& xi,
                             const ConfigFunction& f) {
  return generator_sum(law, xi, f, 1u);
}

double apply_generator_refeed(const OffspringLaw& law, const ParticleConfig& xi,
                              const ConfigFunction& f) {
  return generator_sum(law, xi, f, 2u);
}

namespace {

// time-weighted scalar accumulator split into equal-width time batches
class BatchAccumulator {
 public:
  BatchAccumulator(double t0, double t1, int batches)
      : t0_(t0), width_((t1 - t0) / batches), integral_(batches, 0.0) {}

  void add(double a, double b, double value) {
    // distribute value * dt over the batches covered by [a, b)
    int k = static_cast<int>((a - t0_) / width_);
    k = std::min(std::max(k, 0), static_cast<int>(integral_.size()) - 1);
    while (b > a) {
      double edge = t0_ + (k + 1) * width_;
      double hi = std::min(b, edge);
      integral_[static_cast<std::size_t>(k)] += (hi - a) * value;
      a = hi;
      if (k + 1 < static_cast<int>(integral_.size())) ++k;
      else break;
    }
  }

  CiValue ci() const {
    std::vector<double> means(integral_.size());
    for (std::size_t k = 0; k < integral_.size(); ++k)
      means[k] = integral_[k] / width_;
    return batch_means_from_batches(means);
  }

 private:
  double t0_;
  double width_;
  std::vector<double> integral_;
};

}  // namespace

StationaryRunResult stationary_run(const OffspringLaw& law,
                                   const ParticleConfig& start, double horizon,
                                   double burn_in, std::uint64_t seed, double rho,
                                   int batches) {
  if (!(burn_in >= 0.0 && burn_in < horizon))
    throw std::invalid_argument("stationary_run: need 0 <= burn_in < horizon");
  auto wall0 = std::chrono::steady_clock::now();

  StationaryRunResult res;
  res.rho = rho > 0.0 ? rho : 0.5 * law.beta();
  res.rho_warning = res.rho >= law.beta();
  res.seed = seed;
  res.horizon = horizon;
  res.burn_in = burn_in;

  FvSimulator sim(law, start, seed);
  const int n = start.n();

  // scalar series, batched for confidence intervals
  BatchAccumulator psi_acc(burn_in, horizon, batches);
  BatchAccumulator r_acc(burn_in, horizon, batches);
  BatchAccumulator expr_acc(burn_in, horizon, batches);
  BatchAccumulator m1n_acc(burn_in, horizon, batches);
  BatchAccumulator site_acc[3] = {BatchAccumulator(burn_in, horizon, batches),
                                  BatchAccumulator(burn_in, horizon, batches),
                                  BatchAccumulator(burn_in, horizon, batches)};
  BatchAccumulator prod_acc(burn_in, horizon, batches);

  // full occupation histogram, accumulated lazily: site x is settled up to
  // last_flush[x]; only the two sites touched by an event pay per-event cost
  std::vector<double> occ_integral;
  std::vector<double> last_flush;
  auto ensure = [&](int x) {
    if (x >= static_cast<int>(occ_integral.size())) {
      occ_integral.resize(static_cast<std::size_t>(x) + 1, 0.0);
      last_flush.resize(static_cast<std::size_t>(x) + 1, burn_in);
    }
  };
  auto flush_site = [&](int x, double now) {
    ensure(x);
    int o = sim.config().occupancy(x);
    if (o > 0)
      occ_integral[static_cast<std::size_t>(x)] +=
          o * (now - last_flush[static_cast<std::size_t>(x)]);
    last_flush[static_cast<std::size_t>(x)] = now;
  };

  while (true) {
    double t_now = sim.time();
    double t_next = std::min(sim.peek_next_time(), horizon);
    double a = std::max(t_now, burn_in), b = t_next;
    if (b > a) {
      const ParticleConfig& c = sim.config();
      psi_acc.add(a, b, c.psi());
      r_acc.add(a, b, static_cast<double>(c.rightmost()));
      expr_acc.add(a, b, std::exp(res.rho * c.rightmost()));
      m1n_acc.add(a, b, static_cast<double>(c.m1()) / n);
      for (int x = 1; x <= 3; ++x)
        site_acc[x - 1].add(a, b, c.empirical(x));
      prod_acc.add(a, b, c.empirical(1) * c.empirical(2));
    }
    if (t_next >= horizon) break;
    FvEvent ev = sim.step();
    if (ev.time > burn_in && ev.to != ev.from) {
      flush_site(ev.from, ev.time);
      flush_site(ev.to, ev.time);
    }
  }
  // settle every still-occupied site up to the horizon
  for (int x = 1; x <= sim.config().rightmost(); ++x) flush_site(x, horizon);

  const double elapsed = horizon - burn_in;
  res.mbar.resize(occ_integral.size() > 1 ? occ_integral.size() - 1 : 0);
  for (std::size_t x = 1; x < occ_integral.size(); ++x)
    res.mbar[x - 1] = occ_integral[x] / (elapsed * n);

  res.psi = psi_acc.ci();
  res.rightmost = r_acc.ci();
  res.exp_rho_r = expr_acc.ci();
  res.m1_over_n = m1n_acc.ci();
  for (int k = 0; k < 3; ++k) res.m_site[k] = site_acc[k].ci();
  res.m1m2_product = prod_acc.ci();
  res.events = sim.event_count();
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return res;
}

}  // namespace qsdfv
