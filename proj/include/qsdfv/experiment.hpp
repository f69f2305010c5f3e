#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qsdfv/offspring_law.hpp"
#include "qsdfv/stats.hpp"

namespace qsdfv {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Offspring-law section of a config: a named family or an explicit vector.
struct LawSpec {
  std::string family = "binary";  // "binary" | "geometric-truncated" | "explicit"
  double p0 = 0.75;
  double r = 0.4;
  int l_max = 16;
  std::vector<double> probs;

  OffspringLaw to_law() const;
  nlohmann::json to_json() const;
  static LawSpec from_json(const nlohmann::json& j);
};

struct QsdParams {
  int L = 200;
  double tol = 1e-10;
  std::vector<double> z_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

struct SimulateParams {
  int n = 200;
  double horizon = 500.0;
  double burn_in = 50.0;
  double rho = 0.0;  // 0 -> beta/2
  int batches = 20;
};

struct SweepParams {
  std::vector<int> n_list = {25, 100, 400};
  double horizon = 500.0;
  double burn_in = 50.0;
  int replicas = 32;
  double rho = 0.0;  // 0 -> beta/4
  int L = 200;
  double tol = 1e-10;
  double tv_threshold = 0.05;  // required TV at the largest N
};

struct CoupleParams {
  std::vector<int> n_list = {2, 5, 20};
  double horizon = 2.0;
  int seeds = 100;
  std::uint64_t population_cap = 1000000;
};

struct LdParams {
  int x0 = 40;
  double T = 1.0;
  std::vector<double> deltas = {10.0, 20.0, 30.0};
  int replicas = 200000;
  double moment_rho = 0.2;
  int moment_x0 = 5;
  double moment_t = 2.0;
  int moment_replicas = 100000;
};

struct ChaosParams {
  int n = 200;
  double t = 1.0;
  std::vector<std::pair<int, int>> pairs = {{1, 1}};
  int replicas = 10000;
};

struct SemigroupParams {
  std::vector<int> n_list = {100, 200, 400};
  double t = 1.0;
  int replicas = 100000;
  int L = 200;
};

// Fully resolved run configuration. The seed must be given explicitly; there
// is no nondeterministic default.
struct ExperimentSpec {
  LawSpec law;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int threads = 1;

  QsdParams qsd;
  SimulateParams simulate;
  SweepParams sweep;
  CoupleParams couple;
  LdParams ld;
  ChaosParams chaos;
  SemigroupParams semigroup;

  static ExperimentSpec from_json(const nlohmann::json& j);
  static ExperimentSpec from_file(const std::string& path);
  nlohmann::json to_json() const;
};

struct CheckLine {
  std::string name;
  bool pass;
  std::string detail;
};

struct SubcommandResult {
  std::vector<CheckLine> checks;
  std::vector<std::string> artifacts;
  bool ok() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

// Sweep-cell tags feeding the counter-based seed derivation; replica r of a
// subcommand uses derive_seed(master, tag, r), so matched replica indices
// share driving randomness across particle counts.
enum class SeedTag : std::uint64_t {
  kChaos = 0,
  kSemigroup = 1,
  kSweep = 2,
  kCouple = 3,
  kLd = 4,
  kSimulate = 5,
};

SubcommandResult run_qsd(const ExperimentSpec& spec);
SubcommandResult run_simulate(const ExperimentSpec& spec);
SubcommandResult run_sweep(const ExperimentSpec& spec);
SubcommandResult run_couple(const ExperimentSpec& spec);
SubcommandResult run_ld(const ExperimentSpec& spec);
SubcommandResult run_chaos(const ExperimentSpec& spec);
SubcommandResult run_semigroup(const ExperimentSpec& spec);

// sweep core, reusable without artifact writing
SweepResult sweep_stationary(const OffspringLaw& law, const SweepParams& params,
                             std::uint64_t master_seed, int threads,
                             const DistributionVector& reference);

// reflected-GW checks, reusable without artifact writing
struct LdMomentCheck {
  double estimate = 0.0;
  double sigma = 0.0;
  double bound = 0.0;
};
LdMomentCheck reflected_moment_check(const OffspringLaw& law, double rho, int x0,
                                     double t, int replicas,
                                     std::uint64_t master_seed, int threads);

struct LdShapeRow {
  double delta = 0.0;
  long long hits = 0;
  double freq = 0.0;
};
std::vector<LdShapeRow> reflected_ld_shape(const OffspringLaw& law, int x0,
                                           double T, std::vector<double> deltas,
                                           int replicas, std::uint64_t master_seed,
                                           int threads);

}  // namespace qsdfv
