#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "qsdfv/rng.hpp"

namespace qsdfv {

class LawError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Finite-support offspring distribution of a subcritical continuous-time
// Galton-Watson process. Individuals die at rate 1 and leave l children with
// probability prob(l); the population state x jumps to x + l - 1.
//
// Validation happens here, once; everything downstream assumes a valid law:
//   prob(l) >= 0, sum = 1 (1e-12), prob(0) > 0, mean offspring < 1.
class OffspringLaw {
 public:
  explicit OffspringLaw(std::vector<double> probs);

  // named families used by experiment configs
  static OffspringLaw binary(double p0);  // p(0)=p0, p(2)=1-p0
  static OffspringLaw pure_death();       // p(0)=1
  // p(l) = (1-r) r^l truncated at l_max, tail mass folded into the top atom
  static OffspringLaw geometric_truncated(double r, int l_max);
  // generic truncation: accumulate p(l) until the remaining tail mass is
  // below tol, then fold it into the top atom
  static OffspringLaw truncated(const std::function<double(int)>& p,
                                double tol = 1e-12, int l_cap = 4096);

  int max_offspring() const { return static_cast<int>(probs_.size()) - 1; }
  double prob(int l) const {
    return (l >= 0 && l < static_cast<int>(probs_.size())) ? probs_[l] : 0.0;
  }
  const std::vector<double>& probs() const { return probs_; }

  // drift rate v = 1 - mean offspring; mean displacement at state x is -v x
  double drift() const { return v_; }
  // sup_x q(x,0); only state 1 can jump to 0, at rate p(0)
  double qbar() const { return probs_[0]; }
  // Gamma(rho) = p(0) + sum_{l>=1} p(l+1) l^2 e^{rho l}
  double gamma(double rho) const;
  // unique rho > 0 with rho * Gamma(rho) = v (Gamma is nondecreasing)
  double beta() const { return beta_; }
  // offspring generating function f(s) = sum p(l) s^l
  double gen_fn(double s) const;

  // jump rate q(x, y) of the absorbed process: x p(0) to x-1, x p(y-x+1)
  // upward, zero otherwise; total function, zero from the absorbing state
  double rate(std::int64_t x, std::int64_t y) const;
  // sum over y != x of q(x, y) = x (1 - p(1))
  double total_rate(std::int64_t x) const {
    return static_cast<double>(x) * (1.0 - prob(1));
  }

  // offspring count drawn by cdf inversion
  int sample(Rng& rng) const;

 private:
  std::vector<double> probs_;
  std::vector<double> cdf_;
  double v_ = 0.0;
  double beta_ = 0.0;
};

// Analytic constants bundled for callers that want them by name.
struct GWConstants {
  double v;
  double q_bar;
  double beta;
  std::function<double(double)> gamma;
  std::function<double(double)> f;
};

GWConstants constants(const OffspringLaw& law);

}  // namespace qsdfv
