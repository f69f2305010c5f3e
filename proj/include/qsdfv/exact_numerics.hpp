#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsdfv/offspring_law.hpp"

namespace qsdfv {

class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Probability vector on the truncated state space {1..L}. Throughout the
// project, vectors over positive states are 0-based: mass[i] is the mass of
// state i+1.
struct DistributionVector {
  int L = 0;
  std::vector<double> mass;

  DistributionVector() = default;
  DistributionVector(int truncation, std::vector<double> m)
      : L(truncation), mass(std::move(m)) {}

  static DistributionVector point(int L, int x);
  static DistributionVector two_point(int L, int x1, double w1, int x2);
  static DistributionVector geometric(int L, double ratio);

  double at(int x) const { return mass[static_cast<std::size_t>(x) - 1]; }
  double& at(int x) { return mass[static_cast<std::size_t>(x) - 1]; }
  double moment(int k) const;
  void validate(double tol = 1e-10) const;
};

// x^2-to-x moment ratio test: mu in K(alpha) iff sum x^2 mu / sum x mu <= alpha
bool in_k_alpha(const DistributionVector& mu, double alpha);

// Sub-Markov generator of the absorbed process restricted to {1..L}. Rows
// keep an exact account of where mass goes: inside the box, to the absorbing
// state (kill) and past the truncation level (lost), so that
//   sum_y rate(x,y) + kill_rate(x) + lost_rate(x) == x (1 - p(1))  exactly.
class TruncatedSubGenerator {
 public:
  TruncatedSubGenerator(const OffspringLaw& law, int L);

  int L() const { return L_; }
  const OffspringLaw& law() const { return law_; }
  double kill_rate(int x) const { return x == 1 ? law_.qbar() : 0.0; }
  double lost_rate(int x) const { return lost_[static_cast<std::size_t>(x) - 1]; }
  double total_outflow(int x) const { return law_.total_rate(x); }

  // du = u Qtilde for a row vector u on {1..L} (forward equation RHS)
  void apply(std::span<const double> u, std::span<double> du) const;

  // instantaneous rates of mass loss for the unnormalized flow
  double kill_flux(std::span<const double> u) const;
  double leak_flux(std::span<const double> u) const;

 private:
  OffspringLaw law_;
  int L_;
  std::vector<double> lost_;
};

struct SemigroupResult {
  DistributionVector dist;     // mu T_t, normalized
  double surviving_mass;       // sum of the unnormalized vector at time t
  double leak;                 // integral of the truncation leak flux
  bool truncation_warning;     // leak > 1e-6 * surviving mass
};

// mu T_t: integrate the linear forward equation with fixed-step RK4 and
// normalize at the end. dt <= 0.1 / (L (1 - p(1))) keeps the explicit
// stepper stable; pass dt <= 0 to pick that bound automatically.
SemigroupResult conditioned_semigroup(const TruncatedSubGenerator& gen,
                                      const DistributionVector& mu, double t,
                                      double dt = -1.0);

struct YaglomResult {
  DistributionVector qsd;  // minimal quasi-stationary distribution
  double theta;            // extinction rate under the QSD (kill flux)
  int iterations;
  double final_tv;
};

// Yaglom iteration: apply T_1 starting from delta_1 until successive iterates
// are within tol in total variation.
YaglomResult yaglom_qsd(const TruncatedSubGenerator& gen, double tol = 1e-10,
                        int max_iters = 10000);

// g(t, z) = 1 - F(t, z) where F is the generating function of the absorbed
// process started from one individual; computed with full relative accuracy
// even when the survival probability is tiny.
double survival_gf(const OffspringLaw& law, double z, double t);

// F(t, z) = E z^{Z_t} from a single ancestor
double gf_branching(const OffspringLaw& law, double z, double t);

// G(mu T_t; z), assembled from g(t, z) and g(t, 0)
double gf_conditioned(const OffspringLaw& law, const DistributionVector& mu,
                      double t, double z);

// G(nu*; z) = 1 - exp(-v int_0^z du / (f(u) - u)), z in [0, 1); the simple
// zero of f(u) - u at u = 1 is factored out analytically so the quadrature
// only ever sees a smooth integrand.
double gf_minimal_qsd(const OffspringLaw& law, double z);

// CSV with a '# key=value' metadata header and rows "x,mass"
void write_distribution_csv(const std::string& path,
                            const DistributionVector& d,
                            const std::vector<std::pair<std::string, std::string>>& metadata);

}  // namespace qsdfv
