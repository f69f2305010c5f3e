#include "qsdfv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qsdfv/fv_sim.hpp"
#include "qsdfv/parallel.hpp"

namespace qsdfv {

double tv_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  std::size_t n = std::max(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    double ai = i < a.size() ? a[i] : 0.0;
    double bi = i < b.size() ? b[i] : 0.0;
    s += std::abs(ai - bi);
  }
  return 0.5 * s;
}

double student_t_975(int df) {
  static const double table[] = {
      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
      2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
      2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  if (df < 1) throw std::invalid_argument("student_t_975: df must be >= 1");
  if (df <= 30) return table[df - 1];
  return 1.96;
}

CiValue batch_means_from_batches(std::span<const double> batch_means) {
  const int b = static_cast<int>(batch_means.size());
  if (b < 2) throw std::invalid_argument("batch means: need at least 2 batches");
  double mean = 0.0;
  for (double m : batch_means) mean += m;
  mean /= b;
  double var = 0.0;
  for (double m : batch_means) var += (m - mean) * (m - mean);
  var /= (b - 1);
  return CiValue{mean, student_t_975(b - 1) * std::sqrt(var / b)};
}

CiValue batch_means_ci(std::span<const double> values,
                       std::span<const double> weights, int batches) {
  if (batches < 2) throw std::invalid_argument("batch_means_ci: batches must be >= 2");
  if (values.size() != weights.size())
    throw std::invalid_argument("batch_means_ci: size mismatch");
  if (values.size() < static_cast<std::size_t>(batches))
    throw std::invalid_argument("batch_means_ci: series shorter than batch count");
  double total_w = 0.0;
  for (double w : weights) total_w += w;
  if (!(total_w > 0.0)) throw std::invalid_argument("batch_means_ci: zero total weight");

  // equal-weight batches; samples are split across boundaries so nothing is
  // dropped and the grand mean is reproduced exactly
  const double batch_w = total_w / batches;
  std::vector<double> sums(static_cast<std::size_t>(batches), 0.0);
  int k = 0;
  double room = batch_w;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double w = weights[i];
    while (w > room && k + 1 < batches) {
      sums[static_cast<std::size_t>(k)] += room * values[i];
      w -= room;
      ++k;
      room = batch_w;
    }
    sums[static_cast<std::size_t>(k)] += w * values[i];
    room -= w;
  }
  std::vector<double> means(sums.size());
  for (std::size_t j = 0; j < sums.size(); ++j) means[j] = sums[j] / batch_w;
  return batch_means_from_batches(means);
}

TrendFit wls_log_trend(std::span<const double> xs, std::span<const double> ys,
                       std::span<const double> ses) {
  const std::size_t n = xs.size();
  if (n < 2 || ys.size() != n || ses.size() != n)
    throw std::invalid_argument("wls_log_trend: need matching arrays of size >= 2");
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0 / std::max(ses[i] * ses[i], 1e-300);
    double x = std::log(xs[i]);
    sw += w;
    swx += w * x;
    swy += w * ys[i];
    swxx += w * x * x;
    swxy += w * x * ys[i];
  }
  double det = sw * swxx - swx * swx;
  TrendFit fit;
  fit.slope = (sw * swxy - swx * swy) / det;
  fit.intercept = (swxx * swy - swx * swxy) / det;
  fit.slope_se = std::sqrt(sw / det);
  return fit;
}

CovarianceCheck correlation_check(const OffspringLaw& law,
                                  const ParticleConfig& start, double t, int x,
                                  int y, int replicas, std::uint64_t seed,
                                  int threads) {
  if (replicas < 2) throw std::invalid_argument("correlation_check: need replicas >= 2");
  std::vector<double> mx(static_cast<std::size_t>(replicas));
  std::vector<double> my(static_cast<std::size_t>(replicas));
  parallel_for(static_cast<std::size_t>(replicas), threads, [&](std::size_t r) {
    FvSimulator sim(law, start, derive_seed(seed, 0, r));
    sim.run_until(t);
    mx[r] = sim.config().empirical(x);
    my[r] = sim.config().empirical(y);
  });

  const double R = replicas;
  double mean_x = 0.0, mean_y = 0.0;
  for (int r = 0; r < replicas; ++r) {
    mean_x += mx[static_cast<std::size_t>(r)];
    mean_y += my[static_cast<std::size_t>(r)];
  }
  mean_x /= R;
  mean_y /= R;
  double cov = 0.0;
  for (int r = 0; r < replicas; ++r)
    cov += (mx[static_cast<std::size_t>(r)] - mean_x) * (my[static_cast<std::size_t>(r)] - mean_y);
  cov /= R;
  // standard error via the influence function h_r = (x_r - mx)(y_r - my) - cov
  double var_h = 0.0;
  for (int r = 0; r < replicas; ++r) {
    double h = (mx[static_cast<std::size_t>(r)] - mean_x) *
                   (my[static_cast<std::size_t>(r)] - mean_y) - cov;
    var_h += h * h;
  }
  var_h /= R;

  CovarianceCheck out;
  out.estimate = std::abs(cov);
  out.sigma = std::sqrt(var_h / R);
  out.bound = 2.0 * law.qbar() * std::exp(2.0 * law.qbar() * t) / start.n();
  out.margin = out.bound - (out.estimate + 3.0 * out.sigma);
  out.mean_x = mean_x;
  out.mean_y = mean_y;
  return out;
}

SemigroupGap semigroup_gap(const OffspringLaw& law, const ParticleConfig& start,
                           double t, int replicas,
                           const TruncatedSubGenerator& gen, std::uint64_t seed,
                           int threads) {
  if (replicas < 2) throw std::invalid_argument("semigroup_gap: need replicas >= 2");
  const int L = gen.L();
  const int nthreads = std::max(threads, 1);

  // per-thread accumulation of sum m(x) and sum m(x)^2 in chunks, then a
  // deterministic merge in chunk order
  const int chunk = 256;
  const int n_chunks = (replicas + chunk - 1) / chunk;
  std::vector<std::vector<double>> sums(static_cast<std::size_t>(n_chunks)),
      sqs(static_cast<std::size_t>(n_chunks));
  parallel_for(static_cast<std::size_t>(n_chunks), nthreads, [&](std::size_t c) {
    std::vector<double> s(static_cast<std::size_t>(L), 0.0);
    std::vector<double> q(static_cast<std::size_t>(L), 0.0);
    int lo = static_cast<int>(c) * chunk;
    int hi = std::min(lo + chunk, replicas);
    for (int r = lo; r < hi; ++r) {
      FvSimulator sim(law, start, derive_seed(seed, 1, static_cast<std::uint64_t>(r)));
      sim.run_until(t);
      const ParticleConfig& cfg = sim.config();
      int top = std::min(cfg.rightmost(), L);
      for (int xx = 1; xx <= top; ++xx) {
        double m = cfg.empirical(xx);
        s[static_cast<std::size_t>(xx) - 1] += m;
        q[static_cast<std::size_t>(xx) - 1] += m * m;
      }
    }
    sums[c] = std::move(s);
    sqs[c] = std::move(q);
  });

  std::vector<double> mean(static_cast<std::size_t>(L), 0.0),
      mom2(static_cast<std::size_t>(L), 0.0);
  for (int c = 0; c < n_chunks; ++c)
    for (int i = 0; i < L; ++i) {
      mean[static_cast<std::size_t>(i)] += sums[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
      mom2[static_cast<std::size_t>(i)] += sqs[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
    }
  for (int i = 0; i < L; ++i) {
    mean[static_cast<std::size_t>(i)] /= replicas;
    mom2[static_cast<std::size_t>(i)] /= replicas;
  }

  // reference flow: the conditioned semigroup from the initial empirical
  // measure (the mean-field limit of the particle system)
  DistributionVector mu0(L, std::vector<double>(static_cast<std::size_t>(L), 0.0));
  for (int i = 0; i < start.n(); ++i) {
    int xx = start.position(i);
    if (xx > L) throw NumericsError("semigroup_gap: start beyond truncation level");
    mu0.at(xx) += 1.0 / start.n();
  }
  SemigroupResult ref = conditioned_semigroup(gen, mu0, t);

  SemigroupGap out;
  out.truncation_warning = ref.truncation_warning;
  out.gap.resize(static_cast<std::size_t>(L));
  out.se.resize(static_cast<std::size_t>(L));
  for (int xx = 1; xx <= L; ++xx) {
    double m = mean[static_cast<std::size_t>(xx) - 1];
    double var = std::max(mom2[static_cast<std::size_t>(xx) - 1] - m * m, 0.0);
    out.gap[static_cast<std::size_t>(xx) - 1] = std::abs(m - ref.dist.at(xx));
    out.se[static_cast<std::size_t>(xx) - 1] = std::sqrt(var / replicas);
    if (out.gap[static_cast<std::size_t>(xx) - 1] > out.max_gap) {
      out.max_gap = out.gap[static_cast<std::size_t>(xx) - 1];
      out.argmax = xx;
      out.se_at_max = out.se[static_cast<std::size_t>(xx) - 1];
    }
  }
  return out;
}

}  // namespace qsdfv
