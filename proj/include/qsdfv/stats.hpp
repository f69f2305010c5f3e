#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qsdfv/exact_numerics.hpp"
#include "qsdfv/offspring_law.hpp"
#include "qsdfv/particle_config.hpp"

namespace qsdfv {

struct CiValue {
  double mean = 0.0;
  double half_width = 0.0;
};

// total variation distance (1/2) sum |a - b|; the shorter vector is
// zero-extended
double tv_distance(std::span<const double> a, std::span<const double> b);

double student_t_975(int df);

// 95% batch-means interval for a time-weighted series. Batches are contiguous
// groups of equal total weight; a sample straddling a boundary contributes to
// both sides, so the mean of the batch means equals the global weighted mean
// exactly.
CiValue batch_means_ci(std::span<const double> values,
                       std::span<const double> weights, int batches);
CiValue batch_means_from_batches(std::span<const double> batch_means);

// weighted least squares fit y = a + b log(x), with the standard error of b;
// used for "no increasing trend" checks across particle-count grids
struct TrendFit {
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
};
TrendFit wls_log_trend(std::span<const double> xs, std::span<const double> ys,
                       std::span<const double> ses);

// Cross-replica covariance of the empirical measure at sites (x, y) at a
// fixed time t from a fixed start, against the 2 p(0) e^{2 p(0) t} / N bound.
struct CovarianceCheck {
  double estimate = 0.0;   // |E[m(x) m(y)] - E m(x) E m(y)|, replica estimate
  double sigma = 0.0;      // standard error of the covariance estimate
  double bound = 0.0;
  double margin = 0.0;     // bound - (estimate + 3 sigma)
  double mean_x = 0.0;
  double mean_y = 0.0;
};
CovarianceCheck correlation_check(const OffspringLaw& law,
                                  const ParticleConfig& start, double t, int x,
                                  int y, int replicas, std::uint64_t seed,
                                  int threads = 1);

// |E m(x, xi_t) - m(., xi_0) T_t(x)| per site with Monte Carlo error bars
struct SemigroupGap {
  std::vector<double> gap;        // per site, 0-based
  std::vector<double> se;         // standard error of the replica mean
  double max_gap = 0.0;
  int argmax = 1;
  double se_at_max = 0.0;
  bool truncation_warning = false;
};
SemigroupGap semigroup_gap(const OffspringLaw& law, const ParticleConfig& start,
                           double t, int replicas,
                           const TruncatedSubGenerator& gen, std::uint64_t seed,
                           int threads = 1);

// One row of an N-sweep: stationary estimates for a single particle count.
struct SweepRow {
  int n_particles = 0;
  int replicas = 0;
  std::uint64_t first_seed = 0;
  double tv_to_reference = 0.0;   // TV(mbar, nu*), replica-averaged
  double tv_se = 0.0;
  double chaos_gap = 0.0;         // |E[m(1)m(2)] - nu*(1)nu*(2)|
  double chaos_se = 0.0;
  CiValue psi;
  CiValue rightmost;
  CiValue exp_rho_r_over_n;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double rho = 0.0;
};

}  // namespace qsdfv
