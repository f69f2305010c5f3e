#include "qsdfv/exact_numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace qsdfv {

DistributionVector DistributionVector::point(int L, int x) {
  DistributionVector d(L, std::vector<double>(static_cast<std::size_t>(L), 0.0));
  d.at(x) = 1.0;
  return d;
}

DistributionVector DistributionVector::two_point(int L, int x1, double w1, int x2) {
  DistributionVector d(L, std::vector<double>(static_cast<std::size_t>(L), 0.0));
  d.at(x1) = w1;
  d.at(x2) += 1.0 - w1;
  return d;
}

DistributionVector DistributionVector::geometric(int L, double ratio) {
  DistributionVector d(L, std::vector<double>(static_cast<std::size_t>(L), 0.0));
  double w = 1.0, sum = 0.0;
  for (int x = 1; x <= L; ++x, w *= ratio) {
    d.at(x) = w;
    sum += w;
  }
  for (double& m : d.mass) m /= sum;
  return d;
}

double DistributionVector::moment(int k) const {
  double s = 0.0;
  for (int x = 1; x <= L; ++x) s += std::pow(static_cast<double>(x), k) * at(x);
  return s;
}

void DistributionVector::validate(double tol) const {
  if (static_cast<int>(mass.size()) != L)
    throw NumericsError("distribution: size does not match truncation level");
  double sum = 0.0;
  for (double m : mass) {
    if (!(m >= 0.0)) throw NumericsError("distribution: negative mass");
    sum += m;
  }
  if (std::abs(sum - 1.0) > tol)
    throw NumericsError("distribution: mass sums to " + std::to_string(sum));
}

bool in_k_alpha(const DistributionVector& mu, double alpha) {
  double m1 = 0.0, m2 = 0.0;
  for (int x = 1; x <= mu.L; ++x) {
    double xd = x;
    m1 += xd * mu.at(x);
    m2 += xd * xd * mu.at(x);
  }
  return m2 <= alpha * m1;
}

TruncatedSubGenerator::TruncatedSubGenerator(const OffspringLaw& law, int L)
    : law_(law), L_(L) {
  if (L < 1) throw NumericsError("truncation level must be >= 1");
  lost_.assign(static_cast<std::size_t>(L), 0.0);
  for (int x = 1; x <= L; ++x) {
    double lost = 0.0;
    for (int l = 2; l <= law_.max_offspring(); ++l)
      if (x + l - 1 > L) lost += static_cast<double>(x) * law_.prob(l);
    lost_[static_cast<std::size_t>(x) - 1] = lost;
  }
}

void TruncatedSubGenerator::apply(std::span<const double> u,
                                  std::span<double> du) const {
  const int L = L_;
  const double p0 = law_.qbar();
  for (int y = 0; y < L; ++y) du[y] = -u[y] * law_.total_rate(y + 1);
  for (int x = 1; x <= L; ++x) {
    const double ux = u[x - 1];
    if (ux == 0.0) continue;
    if (x >= 2) du[x - 2] += ux * static_cast<double>(x) * p0;
    for (int l = 2; l <= law_.max_offspring(); ++l) {
      int y = x + l - 1;
      if (y <= L) du[y - 1] += ux * static_cast<double>(x) * law_.prob(l);
    }
  }
}

double TruncatedSubGenerator::kill_flux(std::span<const double> u) const {
  return u[0] * law_.qbar();
}

double TruncatedSubGenerator::leak_flux(std::span<const double> u) const {
  double s = 0.0;
  for (int x = 1; x <= L_; ++x) s += u[x - 1] * lost_[static_cast<std::size_t>(x) - 1];
  return s;
}

namespace {

void rk4_step(const TruncatedSubGenerator& gen, std::vector<double>& u, double dt,
              std::vector<double>& k1, std::vector<double>& k2,
              std::vector<double>& k3, std::vector<double>& k4,
              std::vector<double>& tmp) {
  const std::size_t n = u.size();
  gen.apply(u, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k1[i];
  gen.apply(tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k2[i];
  gen.apply(tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + dt * k3[i];
  gen.apply(tmp, k4);
  for (std::size_t i = 0; i < n; ++i)
    u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace

SemigroupResult conditioned_semigroup(const TruncatedSubGenerator& gen,
                                      const DistributionVector& mu, double t,
                                      double dt) {
  if (mu.L != gen.L())
    throw NumericsError("conditioned_semigroup: truncation level mismatch");
  if (t < 0.0) throw NumericsError("conditioned_semigroup: negative time");

  const double dt_max = 0.1 / (gen.L() * (1.0 - gen.law().prob(1)));
  if (dt <= 0.0 || dt > dt_max) dt = dt_max;

  std::vector<double> u = mu.mass;
  SemigroupResult res;
  res.leak = 0.0;
  if (t > 0.0) {
    const int n_steps = static_cast<int>(std::ceil(t / dt));
    const double h = t / n_steps;
    std::vector<double> k1(u.size()), k2(u.size()), k3(u.size()), k4(u.size()),
        tmp(u.size());
    for (int s = 0; s < n_steps; ++s) {
      double leak_before = gen.leak_flux(u);
      rk4_step(gen, u, h, k1, k2, k3, k4, tmp);
      res.leak += 0.5 * h * (leak_before + gen.leak_flux(u));
    }
  }

  double surviving = std::accumulate(u.begin(), u.end(), 0.0);
  if (surviving < 1e-12)
    throw NumericsError(
        "conditioned_semigroup: surviving mass underflow; increase L or lower t");
  res.surviving_mass = surviving;
  res.truncation_warning = res.leak > 1e-6 * surviving;
  for (double& x : u) x /= surviving;
  res.dist = DistributionVector(gen.L(), std::move(u));
  return res;
}

namespace {

double tv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace

YaglomResult yaglom_qsd(const TruncatedSubGenerator& gen, double tol,
                        int max_iters) {
  DistributionVector cur = DistributionVector::point(gen.L(), 1);
  for (int it = 1; it <= max_iters; ++it) {
    DistributionVector next = conditioned_semigroup(gen, cur, 1.0).dist;
    double d = tv(cur.mass, next.mass);
    cur = std::move(next);
    if (d < tol) {
      double theta = gen.kill_flux(cur.mass);
      return YaglomResult{std::move(cur), theta, it, d};
    }
  }
  throw NumericsError("yaglom_qsd: no convergence after max_iters");
}

namespace {

// T_l(g) = (1-g)^l - 1 + l g, the quadratic-and-higher remainder; evaluated
// by series for small g where the direct form cancels catastrophically
double binom_remainder(int l, double g) {
  if (l < 2) return 0.0;
  if (g > 1e-3) return std::pow(1.0 - g, l) - 1.0 + l * g;
  double term = static_cast<double>(l) * (l - 1) / 2.0 * g * g;  // k = 2
  double sum = term;
  for (int k = 3; k <= l && k <= 8; ++k) {
    term *= -g * static_cast<double>(l - k + 1) / k;
    sum += term;
  }
  return sum;
}

// phi(g)/g where phi(g) = f(1-g) - (1-g); equals v + sum_l p(l) T_l(g)/g
double survival_decay_rate(const OffspringLaw& law, double g) {
  double s = 0.0;
  for (int l = 2; l <= law.max_offspring(); ++l)
    s += law.prob(l) * binom_remainder(l, g);
  return law.drift() + (g > 0.0 ? s / g : 0.0);
}

}  // namespace

double survival_gf(const OffspringLaw& law, double z, double t) {
  if (!(z >= 0.0 && z <= 1.0)) throw NumericsError("survival_gf: z outside [0,1]");
  if (t < 0.0) throw NumericsError("survival_gf: negative time");
  if (z == 1.0) return 0.0;

  // work on u = log g so that relative accuracy survives g -> 0;
  // du/dt = -phi(e^u)/e^u, a smooth bounded right-hand side
  auto rhs = [&](double u) { return -survival_decay_rate(law, std::exp(u)); };
  auto rk4 = [&](double u, double h) {
    double k1 = rhs(u);
    double k2 = rhs(u + 0.5 * h * k1);
    double k3 = rhs(u + 0.5 * h * k2);
    double k4 = rhs(u + h * k3);
    return u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };

  double u = std::log(1.0 - z);
  double remaining = t;
  double h = std::min(0.05, t);
  const double atol = 1e-12;
  while (remaining > 0.0) {
    h = std::min(h, remaining);
    double full = rk4(u, h);
    double half = rk4(rk4(u, 0.5 * h), 0.5 * h);
    double err = std::abs(full - half) / 15.0;
    double tol_step = atol * std::max(h / t, 1e-6);
    if (err <= tol_step || h <= 1e-9) {
      u = half + (half - full) / 15.0;  // local extrapolation
      remaining -= h;
      if (err < 0.1 * tol_step) h *= 2.0;
    } else {
      h *= 0.5;
    }
  }
  return std::exp(u);
}

double gf_branching(const OffspringLaw& law, double z, double t) {
  return 1.0 - survival_gf(law, z, t);
}

namespace {

// (1-g)^l - 1, accurate for both tiny and order-one g
double pow1m_minus1(double g, double l) {
  if (g >= 1.0) return -1.0;
  return std::expm1(l * std::log1p(-g));
}

}  // namespace

double gf_conditioned(const OffspringLaw& law, const DistributionVector& mu,
                      double t, double z) {
  if (!(z >= 0.0 && z < 1.0)) throw NumericsError("gf_conditioned: z outside [0,1)");
  const double gz = survival_gf(law, z, t);
  const double g0 = survival_gf(law, 0.0, t);
  double num = 0.0, den = 0.0;
  for (int x = 1; x <= mu.L; ++x) {
    const double w = mu.at(x);
    if (w == 0.0) continue;
    const double l = static_cast<double>(x);
    num += w * (pow1m_minus1(gz, l) - pow1m_minus1(g0, l));
    den += w * (-pow1m_minus1(g0, l));
  }
  if (den < 1e-300) throw NumericsError("gf_conditioned: survival probability underflow");
  return num / den;
}

namespace {

double poly_eval(const std::vector<double>& c, double u) {
  double acc = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) acc = acc * u + c[k];
  return acc;
}

double adaptive_simpson(const std::function<double(double)>& h, double a,
                        double b, double fa, double fm, double fb, double whole,
                        double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = h(lm), frm = h(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(h, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(h, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& h, double a, double b,
                 double tol) {
  if (a == b) return 0.0;
  double fa = h(a), fb = h(b), fm = h(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(h, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace

double gf_minimal_qsd(const OffspringLaw& law, double z) {
  if (!(z >= 0.0 && z < 1.0))
    throw std::domain_error("gf_minimal_qsd: z must lie in [0,1)");
  if (z == 0.0) return 0.0;

  // f(u) - u = (1 - u) w(u) with w a polynomial, w > 0 on [0,1], w(1) = v;
  // synthetic division gives w exactly from the offspring coefficients
  const auto& p = law.probs();
  const int d = law.max_offspring();
  std::vector<double> c(p.begin(), p.end());
  if (d >= 1)
    c[1] -= 1.0;
  else
    c.push_back(-1.0);
  std::vector<double> w(std::max<std::size_t>(c.size() - 1, 1), 0.0);
  w[0] = c[0];
  for (std::size_t k = 1; k + 1 < c.size(); ++k) w[k] = c[k] + w[k - 1];
  const double v = std::accumulate(w.begin(), w.end(), 0.0);  // = w(1)

  // second division: (w(1) - w(u)) / (1 - u), again a polynomial
  std::vector<double> r(std::max<std::size_t>(w.size() - 1, 1), 0.0);
  r[0] = v - w[0];
  for (std::size_t k = 1; k + 1 < w.size(); ++k) r[k] = r[k - 1] - w[k];
  if (w.size() == 1) r[0] = 0.0;

  auto integrand = [&](double u) { return poly_eval(r, u) / (v * poly_eval(w, u)); };
  const double i2 = integrate(integrand, 0.0, z, 1e-10);
  return 1.0 - (1.0 - z) * std::exp(-v * i2);
}

void write_distribution_csv(
    const std::string& path, const DistributionVector& d,
    const std::vector<std::pair<std::string, std::string>>& metadata) {
  std::ofstream out(path);
  if (!out) throw NumericsError("cannot open " + path);
  for (const auto& [k, val] : metadata) out << "# " << k << "=" << val << "\n";
  out << "x,mass\n";
  char buf[64];
  for (int x = 1; x <= d.L; ++x) {
    std::snprintf(buf, sizeof(buf), "%.12g", d.at(x));
    out << x << "," << buf << "\n";
  }
}

}  // namespace qsdfv
