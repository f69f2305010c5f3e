#include "qsdfv/offspring_law.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace qsdfv {

namespace {

double mean_offspring(const std::vector<double>& p) {
  double m = 0.0;
  for (std::size_t l = 1; l < p.size(); ++l) m += static_cast<double>(l) * p[l];
  return m;
}

// root of rho * Gamma(rho) = v by bisection; rho Gamma(rho) is continuous,
// zero at zero and strictly increasing, so the bracket is safe
double solve_beta(const OffspringLaw& law) {
  const double v = law.drift();
  auto h = [&](double rho) { return rho * law.gamma(rho) - v; };
  double lo = 0.0, hi = 1.0;
  while (h(hi) < 0.0) hi *= 2.0;
  while (hi - lo > 1e-12) {
    double mid = 0.5 * (lo + hi);
    (h(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

OffspringLaw::OffspringLaw(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw LawError("offspring law: empty probability vector");
  while (probs_.size() > 1 && probs_.back() == 0.0) probs_.pop_back();
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw LawError("offspring law: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw LawError("offspring law: probabilities sum to " + std::to_string(sum));
  if (!(probs_[0] > 0.0))
    throw LawError("offspring law: p(0) must be positive (no absorption otherwise)");
  v_ = 1.0 - mean_offspring(probs_);
  if (!(v_ > 0.0))
    throw LawError("offspring law: not subcritical (mean offspring >= 1)");

  cdf_.resize(probs_.size());
  std::partial_sum(probs_.begin(), probs_.end(), cdf_.begin());
  cdf_.back() = 1.0;

  beta_ = solve_beta(*this);
}

OffspringLaw OffspringLaw::binary(double p0) {
  return OffspringLaw({p0, 0.0, 1.0 - p0});
}

OffspringLaw OffspringLaw::pure_death() { return OffspringLaw({1.0}); }

OffspringLaw OffspringLaw::geometric_truncated(double r, int l_max) {
  if (!(r >= 0.0 && r < 1.0)) throw LawError("geometric-truncated: r must be in [0,1)");
  if (l_max < 1) throw LawError("geometric-truncated: l_max must be >= 1");
  std::vector<double> p(static_cast<std::size_t>(l_max) + 1, 0.0);
  double tail = 1.0;
  for (int l = 0; l < l_max; ++l) {
    p[l] = (1.0 - r) * std::pow(r, l);
    tail -= p[l];
  }
  p[l_max] = tail;  // fold the geometric tail into the top atom
  return OffspringLaw(std::move(p));
}

OffspringLaw OffspringLaw::truncated(const std::function<double(int)>& p,
                                     double tol, int l_cap) {
  std::vector<double> q;
  double sum = 0.0;
  for (int l = 0; l <= l_cap; ++l) {
    q.push_back(p(l));
    sum += q.back();
    if (1.0 - sum <= tol) {
      q.back() += 1.0 - sum;
      return OffspringLaw(std::move(q));
    }
  }
  throw LawError("truncated law: tail mass still above tolerance at l_cap");
}

double OffspringLaw::gamma(double rho) const {
  double g = probs_[0];
  for (int l = 1; l + 1 <= max_offspring(); ++l) {
    double ld = static_cast<double>(l);
    g += probs_[l + 1] * ld * ld * std::exp(rho * ld);
  }
  return g;
}

double OffspringLaw::gen_fn(double s) const {
  // Horner
  double acc = 0.0;
  for (std::size_t k = probs_.size(); k-- > 0;) acc = acc * s + probs_[k];
  return acc;
}

double OffspringLaw::rate(std::int64_t x, std::int64_t y) const {
  if (x <= 0 || y < 0) return 0.0;
  if (y == x - 1) return static_cast<double>(x) * probs_[0];
  if (y > x) return static_cast<double>(x) * prob(static_cast<int>(y - x + 1));
  return 0.0;
}

int OffspringLaw::sample(Rng& rng) const {
  double u = rng.uniform01();
  for (std::size_t l = 0; l + 1 < cdf_.size(); ++l)
    if (u < cdf_[l]) return static_cast<int>(l);
  return max_offspring();
}

GWConstants constants(const OffspringLaw& law) {
  return GWConstants{
      law.drift(), law.qbar(), law.beta(),
      [law](double rho) { return law.gamma(rho); },
      [law](double s) { return law.gen_fn(s); }};
}

}  // namespace qsdfv
