#pragma once

// Test-only reference computations. These are deliberately independent of the
// library's solvers: the QSD oracle below uses discrete power iteration on
// the truncated matrix, not the semigroup integrator it is used to check.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "qsdfv/exact_numerics.hpp"
#include "qsdfv/offspring_law.hpp"

namespace qsdfv::oracle {

struct EigenQsd {
  DistributionVector qsd;
  double eigenvalue;  // leading eigenvalue of the sub-generator (= -theta)
  int iterations;
};

// Leading left eigenvector of the truncated sub-generator by power iteration
// on I + dt Q^T with dt below the stability threshold. Entrywise positive, so
// convergence to the Perron vector is guaranteed.
inline EigenQsd eigen_iteration_qsd(const OffspringLaw& law, int L,
                                    double tol = 1e-14, int max_iters = 2000000) {
  // dense row-major q[x][y], states 1..L at indices 0..L-1
  std::vector<std::vector<double>> q(
      static_cast<std::size_t>(L), std::vector<double>(static_cast<std::size_t>(L), 0.0));
  for (int x = 1; x <= L; ++x) {
    for (int y = 1; y <= L; ++y)
      if (y != x) q[x - 1][y - 1] = law.rate(x, y);
    q[x - 1][x - 1] = -law.total_rate(x);
  }
  const double dt = 1.0 / (law.total_rate(L) + 1.0);

  std::vector<double> u(static_cast<std::size_t>(L), 1.0 / L), next(static_cast<std::size_t>(L));
  double lambda = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    // next = u (I + dt Q)
    for (int y = 0; y < L; ++y) next[static_cast<std::size_t>(y)] = u[static_cast<std::size_t>(y)];
    for (int x = 0; x < L; ++x) {
      if (u[static_cast<std::size_t>(x)] == 0.0) continue;
      for (int y = 0; y < L; ++y)
        next[static_cast<std::size_t>(y)] += dt * u[static_cast<std::size_t>(x)] * q[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
    }
    double sum = 0.0;
    for (double w : next) sum += w;
    double diff = 0.0;
    for (int y = 0; y < L; ++y) {
      next[static_cast<std::size_t>(y)] /= sum;
      diff += std::abs(next[static_cast<std::size_t>(y)] - u[static_cast<std::size_t>(y)]);
    }
    u.swap(next);
    lambda = (sum - 1.0) / dt;  // growth factor 1 + dt*lambda
    if (diff < tol)
      return EigenQsd{DistributionVector(L, u), lambda, it};
  }
  throw std::runtime_error("eigen_iteration_qsd: no convergence");
}

}  // namespace qsdfv::oracle
