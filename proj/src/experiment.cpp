#include "qsdfv/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qsdfv/branching.hpp"
#include "qsdfv/exact_numerics.hpp"
#include "qsdfv/fv_sim.hpp"
#include "qsdfv/parallel.hpp"

namespace qsdfv {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// config

OffspringLaw LawSpec::to_law() const {
  if (family == "binary") return OffspringLaw::binary(p0);
  if (family == "geometric-truncated")
    return OffspringLaw::geometric_truncated(r, l_max);
  if (family == "explicit") return OffspringLaw(probs);
  throw ConfigError("law: unknown family '" + family + "'");
}

json LawSpec::to_json() const {
  json j;
  j["family"] = family;
  if (family == "binary") j["p0"] = p0;
  if (family == "geometric-truncated") {
    j["r"] = r;
    j["l_max"] = l_max;
  }
  if (family == "explicit") j["probs"] = probs;
  return j;
}

LawSpec LawSpec::from_json(const json& j) {
  LawSpec s;
  if (j.contains("probs")) {
    s.family = "explicit";
    s.probs = j.at("probs").get<std::vector<double>>();
    return s;
  }
  s.family = j.value("family", "binary");
  if (s.family == "binary") {
    s.p0 = j.value("p0", 0.75);
  } else if (s.family == "geometric-truncated") {
    s.r = j.at("r").get<double>();
    s.l_max = j.at("l_max").get<int>();
  } else if (s.family == "explicit") {
    throw ConfigError("law: explicit family requires a 'probs' array");
  } else {
    throw ConfigError("law: unknown family '" + s.family + "'");
  }
  return s;
}

namespace {

void require_window(double burn_in, double horizon, const std::string& where) {
  if (!(burn_in >= 0.0) || !(burn_in < horizon))
    throw ConfigError(where + ": need 0 <= burn_in < horizon");
}

void require_n_list(const std::vector<int>& ns, const std::string& where) {
  if (ns.empty()) throw ConfigError(where + ": N list must not be empty");
  for (int n : ns)
    if (n < 2) throw ConfigError(where + ": every N must be >= 2");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  ExperimentSpec spec;
  if (!j.contains("seed"))
    throw ConfigError("config: 'seed' is required (runs must be reproducible)");
  spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("law")) spec.law = LawSpec::from_json(j.at("law"));
  spec.out_dir = j.value("out", spec.out_dir);
  spec.threads = j.value("threads", spec.threads);

  if (j.contains("qsd")) {
    const json& q = j.at("qsd");
    spec.qsd.L = get_or(q, "L", spec.qsd.L);
    spec.qsd.tol = get_or(q, "tol", spec.qsd.tol);
    spec.qsd.z_grid = get_or(q, "z_grid", spec.qsd.z_grid);
    if (spec.qsd.L < 2) throw ConfigError("qsd: L must be >= 2");
  }
  if (j.contains("simulate")) {
    const json& q = j.at("simulate");
    spec.simulate.n = get_or(q, "N", spec.simulate.n);
    spec.simulate.horizon = get_or(q, "horizon", spec.simulate.horizon);
    spec.simulate.burn_in = get_or(q, "burn_in", spec.simulate.burn_in);
    spec.simulate.rho = get_or(q, "rho", spec.simulate.rho);
    spec.simulate.batches = get_or(q, "batches", spec.simulate.batches);
    if (spec.simulate.n < 2) throw ConfigError("simulate: N must be >= 2");
    require_window(spec.simulate.burn_in, spec.simulate.horizon, "simulate");
  }
  if (j.contains("sweep")) {
    const json& q = j.at("sweep");
    spec.sweep.n_list = get_or(q, "N", spec.sweep.n_list);
    spec.sweep.horizon = get_or(q, "horizon", spec.sweep.horizon);
    spec.sweep.burn_in = get_or(q, "burn_in", spec.sweep.burn_in);
    spec.sweep.replicas = get_or(q, "replicas", spec.sweep.replicas);
    spec.sweep.rho = get_or(q, "rho", spec.sweep.rho);
    spec.sweep.L = get_or(q, "L", spec.sweep.L);
    spec.sweep.tol = get_or(q, "tol", spec.sweep.tol);
    spec.sweep.tv_threshold = get_or(q, "tv_threshold", spec.sweep.tv_threshold);
    require_n_list(spec.sweep.n_list, "sweep");
    require_window(spec.sweep.burn_in, spec.sweep.horizon, "sweep");
    if (spec.sweep.replicas < 2) throw ConfigError("sweep: replicas must be >= 2");
  }
  if (j.contains("couple")) {
    const json& q = j.at("couple");
    spec.couple.n_list = get_or(q, "N", spec.couple.n_list);
    spec.couple.horizon = get_or(q, "horizon", spec.couple.horizon);
    spec.couple.seeds = get_or(q, "seeds", spec.couple.seeds);
    spec.couple.population_cap =
        get_or(q, "population_cap", spec.couple.population_cap);
    require_n_list(spec.couple.n_list, "couple");
    if (spec.couple.seeds < 1) throw ConfigError("couple: seeds must be >= 1");
  }
  if (j.contains("ld")) {
    const json& q = j.at("ld");
    spec.ld.x0 = get_or(q, "x0", spec.ld.x0);
    spec.ld.T = get_or(q, "T", spec.ld.T);
    spec.ld.deltas = get_or(q, "deltas", spec.ld.deltas);
    spec.ld.replicas = get_or(q, "replicas", spec.ld.replicas);
    if (q.contains("moment")) {
      const json& m = q.at("moment");
      spec.ld.moment_rho = get_or(m, "rho", spec.ld.moment_rho);
      spec.ld.moment_x0 = get_or(m, "x0", spec.ld.moment_x0);
      spec.ld.moment_t = get_or(m, "t", spec.ld.moment_t);
      spec.ld.moment_replicas = get_or(m, "replicas", spec.ld.moment_replicas);
    }
    if (spec.ld.x0 < 1 || spec.ld.moment_x0 < 1)
      throw ConfigError("ld: start positions must be >= 1");
    if (spec.ld.deltas.empty()) throw ConfigError("ld: deltas must not be empty");
  }
  if (j.contains("chaos")) {
    const json& q = j.at("chaos");
    spec.chaos.n = get_or(q, "N", spec.chaos.n);
    spec.chaos.t = get_or(q, "t", spec.chaos.t);
    spec.chaos.replicas = get_or(q, "replicas", spec.chaos.replicas);
    if (q.contains("pairs")) {
      spec.chaos.pairs.clear();
      for (const auto& p : q.at("pairs"))
        spec.chaos.pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    }
    if (spec.chaos.n < 2) throw ConfigError("chaos: N must be >= 2");
    if (spec.chaos.pairs.empty()) throw ConfigError("chaos: pairs must not be empty");
  }
  if (j.contains("semigroup")) {
    const json& q = j.at("semigroup");
    spec.semigroup.n_list = get_or(q, "N", spec.semigroup.n_list);
    spec.semigroup.t = get_or(q, "t", spec.semigroup.t);
    spec.semigroup.replicas = get_or(q, "replicas", spec.semigroup.replicas);
    spec.semigroup.L = get_or(q, "L", spec.semigroup.L);
    require_n_list(spec.semigroup.n_list, "semigroup");
  }
  return spec;
}

ExperimentSpec ExperimentSpec::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

json ExperimentSpec::to_json() const {
  json j;
  j["law"] = law.to_json();
  j["seed"] = seed;
  j["out"] = out_dir;
  j["threads"] = threads;
  j["qsd"] = {{"L", qsd.L}, {"tol", qsd.tol}, {"z_grid", qsd.z_grid}};
  j["simulate"] = {{"N", simulate.n},
                   {"horizon", simulate.horizon},
                   {"burn_in", simulate.burn_in},
                   {"rho", simulate.rho},
                   {"batches", simulate.batches}};
  j["sweep"] = {{"N", sweep.n_list},     {"horizon", sweep.horizon},
                {"burn_in", sweep.burn_in}, {"replicas", sweep.replicas},
                {"rho", sweep.rho},      {"L", sweep.L},
                {"tol", sweep.tol},      {"tv_threshold", sweep.tv_threshold}};
  j["couple"] = {{"N", couple.n_list},
                 {"horizon", couple.horizon},
                 {"seeds", couple.seeds},
                 {"population_cap", couple.population_cap}};
  j["ld"] = {{"x0", ld.x0},
             {"T", ld.T},
             {"deltas", ld.deltas},
             {"replicas", ld.replicas},
             {"moment",
              {{"rho", ld.moment_rho},
               {"x0", ld.moment_x0},
               {"t", ld.moment_t},
               {"replicas", ld.moment_replicas}}}};
  json pairs = json::array();
  for (const auto& [a, b] : chaos.pairs) pairs.push_back({a, b});
  j["chaos"] = {{"N", chaos.n}, {"t", chaos.t}, {"pairs", pairs}, {"replicas", chaos.replicas}};
  j["semigroup"] = {{"N", semigroup.n_list},
                    {"t", semigroup.t},
                    {"replicas", semigroup.replicas},
                    {"L", semigroup.L}};
  return j;
}

// ---------------------------------------------------------------------------
// artifacts

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

class Artifacts {
 public:
  Artifacts(const ExperimentSpec& spec, std::string subcommand)
      : spec_(spec), subcommand_(std::move(subcommand)),
        wall0_(std::chrono::steady_clock::now()) {
    fs::create_directories(spec.out_dir);
  }

  std::ofstream open_csv(SubcommandResult& res, const std::string& name) {
    fs::path p = fs::path(spec_.out_dir) / name;
    fs::create_directories(p.parent_path());
    res.artifacts.push_back(p.string());
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write " + p.string());
    return out;
  }

  void write_meta(SubcommandResult& res) {
    json j;
    j["schema_version"] = 1;
    j["subcommand"] = subcommand_;
    j["spec"] = spec_.to_json();
    j["master_seed"] = spec_.seed;
    j["wall_seconds"] = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - wall0_)
                            .count();
    j["timestamp_utc"] = timestamp();
    json checks = json::array();
    for (const auto& c : res.checks)
      checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    j["checks"] = checks;
    fs::path p = fs::path(spec_.out_dir) / "meta.json";
    std::ofstream out(p);
    out << j.dump(2) << "\n";
    res.artifacts.push_back(p.string());
  }

 private:
  static std::string timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    return buf;
  }

  const ExperimentSpec& spec_;
  std::string subcommand_;
  std::chrono::steady_clock::time_point wall0_;
};

void check(SubcommandResult& res, const std::string& name, bool pass,
           const std::string& detail) {
  res.checks.push_back(CheckLine{name, pass, detail});
}

}  // namespace

// ---------------------------------------------------------------------------
// qsd

SubcommandResult run_qsd(const ExperimentSpec& spec) {
  Artifacts art(spec, "qsd");
  SubcommandResult res;
  OffspringLaw law = spec.law.to_law();
  TruncatedSubGenerator gen(law, spec.qsd.L);
  YaglomResult yag = yaglom_qsd(gen, spec.qsd.tol);

  // fixed point of the conditioned semigroup
  double worst_fp = 0.0;
  for (double h : {0.5, 1.0, 2.0}) {
    SemigroupResult step = conditioned_semigroup(gen, yag.qsd, h);
    worst_fp = std::max(worst_fp, tv_distance(step.dist.mass, yag.qsd.mass));
  }
  check(res, "qsd.fixed_point", worst_fp < 1e-8,
        "max TV(nu T_h, nu) = " + num(worst_fp));

  // generating-function closed form against the iterated distribution
  double worst_gf = 0.0;
  {
    auto csv = art.open_csv(res, "plotdata/gf_check.csv");
    csv << "z,gf_closed_form,gf_series,abs_diff\n";
    for (double z : spec.qsd.z_grid) {
      double closed = gf_minimal_qsd(law, z);
      double series = 0.0, zx = 1.0;
      for (int x = 1; x <= yag.qsd.L; ++x) {
        zx *= z;
        series += yag.qsd.at(x) * zx;
      }
      worst_gf = std::max(worst_gf, std::abs(closed - series));
      csv << num(z) << "," << num(closed) << "," << num(series) << ","
          << num(std::abs(closed - series)) << "\n";
    }
  }
  check(res, "qsd.gf_crosscheck", worst_gf < 1e-6,
        "max |G_closed - G_series| = " + num(worst_gf));

  // extinction rate of the minimal QSD equals the drift
  check(res, "qsd.theta_equals_drift", std::abs(yag.theta - law.drift()) < 1e-6,
        "theta = " + num(yag.theta) + ", v = " + num(law.drift()));

  {
    auto csv = art.open_csv(res, "results.csv");
    csv << "# law=" << spec.law.to_json().dump() << "\n";
    csv << "# L=" << spec.qsd.L << "\n";
    csv << "# tol=" << num(spec.qsd.tol) << "\n";
    csv << "# iterations=" << yag.iterations << "\n";
    csv << "# theta=" << num(yag.theta) << "\n";
    csv << "x,mass\n";
    for (int x = 1; x <= yag.qsd.L; ++x)
      csv << x << "," << num(yag.qsd.at(x)) << "\n";
  }
  art.write_meta(res);
  return res;
}

// ---------------------------------------------------------------------------
// simulate

SubcommandResult run_simulate(const ExperimentSpec& spec) {
  Artifacts art(spec, "simulate");
  SubcommandResult res;
  OffspringLaw law = spec.law.to_law();
  const SimulateParams& p = spec.simulate;
  StationaryRunResult run = stationary_run(
      law, ParticleConfig(p.n), p.horizon, p.burn_in,
      derive_seed(spec.seed, static_cast<std::uint64_t>(SeedTag::kSimulate), 0),
      p.rho, p.batches);

  check(res, "simulate.psi_le_R", run.psi.mean <= run.rightmost.mean + 1e-9,
        "psi_bar = " + num(run.psi.mean) + ", R_bar = " + num(run.rightmost.mean));
  if (run.rho_warning)
    check(res, "simulate.rho_below_beta", false,
          "rho = " + num(run.rho) + " >= beta = " + num(law.beta()));

  {
    auto csv = art.open_csv(res, "results.csv");
    csv << "quantity,x,mean,ci_half_width\n";
    for (std::size_t i = 0; i < run.mbar.size(); ++i)
      csv << "m," << (i + 1) << "," << num(run.mbar[i]) << ",\n";
    csv << "psi,," << num(run.psi.mean) << "," << num(run.psi.half_width) << "\n";
    csv << "R,," << num(run.rightmost.mean) << "," << num(run.rightmost.half_width) << "\n";
    csv << "exp_rho_R,," << num(run.exp_rho_r.mean) << ","
        << num(run.exp_rho_r.half_width) << "\n";
    csv << "M1_over_N,," << num(run.m1_over_n.mean) << ","
        << num(run.m1_over_n.half_width) << "\n";
    for (int x = 1; x <= 3; ++x)
      csv << "m_ci," << x << "," << num(run.m_site[x - 1].mean) << ","
          << num(run.m_site[x - 1].half_width) << "\n";
  }
  art.write_meta(res);
  return res;
}

// ---------------------------------------------------------------------------
// sweep

SweepResult sweep_stationary(const OffspringLaw& law, const SweepParams& params,
                             std::uint64_t master_seed, int threads,
                             const DistributionVector& reference) {
  SweepResult sweep;
  sweep.rho = params.rho > 0.0 ? params.rho : 0.25 * law.beta();
  const double ref1 = reference.at(1), ref2 = reference.at(2);
  const int R = params.replicas;

  for (int n : params.n_list) {
    std::vector<StationaryRunResult> runs(static_cast<std::size_t>(R));
    parallel_for(static_cast<std::size_t>(R), threads, [&](std::size_t r) {
      // replica r reuses the same seed at every N (common random numbers)
      std::uint64_t s = derive_seed(
          master_seed, static_cast<std::uint64_t>(SeedTag::kSweep), r);
      runs[r] = stationary_run(law, ParticleConfig(n), params.horizon,
                               params.burn_in, s, sweep.rho);
    });

    auto mean_se = [&](auto&& get) {
      double m = 0.0;
      for (const auto& run : runs) m += get(run);
      m /= R;
      double var = 0.0;
      for (const auto& run : runs) {
        double d = get(run) - m;
        var += d * d;
      }
      var = R > 1 ? var / (R - 1) : 0.0;
      return std::pair<double, double>(m, std::sqrt(var / R));
    };

    SweepRow row;
    row.n_particles = n;
    row.replicas = R;
    row.first_seed =
        derive_seed(master_seed, static_cast<std::uint64_t>(SeedTag::kSweep), 0);
    auto [tv_m, tv_se] = mean_se([&](const StationaryRunResult& run) {
      return tv_distance(run.mbar, reference.mass);
    });
    row.tv_to_reference = tv_m;
    row.tv_se = tv_se;
    auto [prod_m, prod_se] = mean_se(
        [](const StationaryRunResult& run) { return run.m1m2_product.mean; });
    row.chaos_gap = std::abs(prod_m - ref1 * ref2);
    row.chaos_se = prod_se;
    auto [psi_m, psi_se] =
        mean_se([](const StationaryRunResult& run) { return run.psi.mean; });
    row.psi = CiValue{psi_m, 1.96 * psi_se};
    auto [r_m, r_se] = mean_se(
        [](const StationaryRunResult& run) { return run.rightmost.mean; });
    row.rightmost = CiValue{r_m, 1.96 * r_se};
    auto [e_m, e_se] = mean_se([&](const StationaryRunResult& run) {
      return run.exp_rho_r.mean / n;
    });
    row.exp_rho_r_over_n = CiValue{e_m, 1.96 * e_se};
    sweep.rows.push_back(row);
  }
  return sweep;
}

SubcommandResult run_sweep(const ExperimentSpec& spec) {
  Artifacts art(spec, "sweep");
  SubcommandResult res;
  OffspringLaw law = spec.law.to_law();
  const SweepParams& p = spec.sweep;
  require_n_list(p.n_list, "sweep");

  TruncatedSubGenerator gen(law, p.L);
  DistributionVector reference = yaglom_qsd(gen, p.tol).qsd;
  SweepResult sweep = sweep_stationary(law, p, spec.seed, spec.threads, reference);

  bool tv_down = true, chaos_down = true;
  for (std::size_t i = 1; i < sweep.rows.size(); ++i) {
    tv_down = tv_down &&
              sweep.rows[i].tv_to_reference < sweep.rows[i - 1].tv_to_reference;
    chaos_down = chaos_down && sweep.rows[i].chaos_gap < sweep.rows[i - 1].chaos_gap;
  }
  std::string tv_list, chaos_list;
  for (const auto& row : sweep.rows) {
    tv_list += " " + num(row.tv_to_reference);
    chaos_list += " " + num(row.chaos_gap);
  }
  check(res, "sweep.tv_decreasing", tv_down, "TV by N:" + tv_list);
  check(res, "sweep.tv_final",
        sweep.rows.back().tv_to_reference < p.tv_threshold,
        "TV(N=" + std::to_string(sweep.rows.back().n_particles) +
            ") = " + num(sweep.rows.back().tv_to_reference) + " vs " +
            num(p.tv_threshold));
  check(res, "sweep.chaos_decreasing", chaos_down, "gaps by N:" + chaos_list);

  if (sweep.rows.size() >= 2) {
    std::vector<double> xs, psis, psie, es, ese;
    for (const auto& row : sweep.rows) {
      xs.push_back(row.n_particles);
      psis.push_back(row.psi.mean);
      psie.push_back(std::max(row.psi.half_width / 1.96, 1e-12));
      es.push_back(row.exp_rho_r_over_n.mean);
      ese.push_back(std::max(row.exp_rho_r_over_n.half_width / 1.96, 1e-12));
    }
    TrendFit psi_fit = wls_log_trend(xs, psis, psie);
    check(res, "sweep.psi_no_increasing_trend",
          psi_fit.slope <= 1.96 * psi_fit.slope_se,
          "slope = " + num(psi_fit.slope) + " +- " + num(psi_fit.slope_se));
    TrendFit exp_fit = wls_log_trend(xs, es, ese);
    double kappa_hat = 0.0;
    for (const auto& row : sweep.rows)
      kappa_hat = std::max(kappa_hat, row.exp_rho_r_over_n.mean);
    check(res, "sweep.exp_moment_bounded",
          exp_fit.slope <= 1.96 * exp_fit.slope_se,
          "slope = " + num(exp_fit.slope) + " +- " + num(exp_fit.slope_se) +
              ", empirical kappa = " + num(kappa_hat) + " at rho = " +
              num(sweep.rho));
  }

  {
    auto csv = art.open_csv(res, "results.csv");
    csv << "N,replicas,first_seed,tv,tv_se,chaos_gap,chaos_se,psi,psi_hw,R,R_hw,"
           "exp_rho_R_over_N,exp_hw,rho\n";
    for (const auto& row : sweep.rows)
      csv << row.n_particles << "," << row.replicas << "," << row.first_seed
          << "," << num(row.tv_to_reference) << "," << num(row.tv_se) << ","
          << num(row.chaos_gap) << "," << num(row.chaos_se) << ","
          << num(row.psi.mean) << "," << num(row.psi.half_width) << ","
          << num(row.rightmost.mean) << "," << num(row.rightmost.half_width)
          << "," << num(row.exp_rho_r_over_n.mean) << ","
          << num(row.exp_rho_r_over_n.half_width) << "," << num(sweep.rho)
          << "\n";
  }
  art.write_meta(res);
  return res;
}

// ---------------------------------------------------------------------------
// couple

SubcommandResult run_couple(const ExperimentSpec& spec) {
  Artifacts art(spec, "couple");
  SubcommandResult res;
  OffspringLaw law = spec.law.to_law();
  const CoupleParams& p = spec.couple;
  require_n_list(p.n_list, "couple");

  struct Row {
    int n;
    int seed_index;
    std::uint64_t events;
    std::size_t population;
    int r_zeta;
    int r_xi;
    bool ok;
    bool complete;
  };
  std::vector<Row> rows;
  int violations = 0, capped = 0;
  for (int n : p.n_list) {
    for (int s = 0; s < p.seeds; ++s) {
      std::uint64_t seed = derive_seed(
          spec.seed, static_cast<std::uint64_t>(SeedTag::kCouple),
          static_cast<std::uint64_t>(s));
      CoupledSimulator sim(law, ParticleConfig(n), seed, p.population_cap);
      Row row{n, s, 0, 0, 0, 0, true, true};
      try {
        row.ok = sim.run_checked(p.horizon);
      } catch (const PopulationCapError&) {
        row.complete = false;
        ++capped;
      }
      row.events = sim.event_count();
      row.population = sim.population();
      row.r_zeta = sim.rightmost();
      row.r_xi = sim.particles().rightmost();
      if (!row.ok) ++violations;
      rows.push_back(row);
    }
  }
  check(res, "couple.invariants", violations == 0,
        std::to_string(violations) + " violating runs out of " +
            std::to_string(rows.size()));
  if (capped > 0)
    check(res, "couple.population_cap", false,
          std::to_string(capped) + " runs hit the population cap (partial rows)");

  {
    auto csv = art.open_csv(res, "results.csv");
    csv << "N,seed_index,events,population,R_zeta,R_xi,domination_ok,complete\n";
    for (const auto& r : rows)
      csv << r.n << "," << r.seed_index << "," << r.events << "," << r.population
          << "," << r.r_zeta << "," << r.r_xi << "," << (r.ok ? 1 : 0) << ","
          << (r.complete ? 1 : 0) << "\n";
  }
  art.write_meta(res);
  return res;
}

// ---------------------------------------------------------------------------
// ld (reflected Galton-Watson)

LdMomentCheck reflected_moment_check(const OffspringLaw& law, double rho, int x0,
                                     double t, int replicas,
                                     std::uint64_t master_seed, int threads) {
  const int chunk = 1024;
  const int n_chunks = (replicas + chunk - 1) / chunk;
  std::vector<double> sum(static_cast<std::size_t>(n_chunks), 0.0);
  std::vector<double> sum2(static_cast<std::size_t>(n_chunks), 0.0);
  parallel_for(static_cast<std::size_t>(n_chunks), threads, [&](std::size_t c) {
    double s = 0.0, s2 = 0.0;
    int lo = static_cast<int>(c) * chunk, hi = std::min(lo + chunk, replicas);
    for (int r = lo; r < hi; ++r) {
      ReflectedGw gw(law, x0,
                     derive_seed(master_seed,
                                 static_cast<std::uint64_t>(SeedTag::kLd),
                                 static_cast<std::uint64_t>(r)));
      gw.run_until(t);
      double v = std::exp(rho * gw.position());
      s += v;
      s2 += v * v;
    }
    sum[c] = s;
    sum2[c] = s2;
  });
  double s = 0.0, s2 = 0.0;
  for (int c = 0; c < n_chunks; ++c) {
    s += sum[static_cast<std::size_t>(c)];
    s2 += sum2[static_cast<std::size_t>(c)];
  }
  LdMomentCheck out;
  out.estimate = s / replicas;
  double var = std::max(s2 / replicas - out.estimate * out.estimate, 0.0);
  out.sigma = std::sqrt(var / replicas);
  out.bound = std::exp(-0.5 * rho * law.drift() * t) * std::exp(rho * x0) +
              t * std::exp(rho);
  return out;
}

std::vector<LdShapeRow> reflected_ld_shape(const OffspringLaw& law, int x0,
                                           double T, std::vector<double> deltas,
                                           int replicas, std::uint64_t master_seed,
                                           int threads) {
  const double v = law.drift();
  const int nd = static_cast<int>(deltas.size());
  const int chunk = 1024;
  const int n_chunks = (replicas + chunk - 1) / chunk;
  std::vector<std::vector<long long>> hits(
      static_cast<std::size_t>(n_chunks),
      std::vector<long long>(static_cast<std::size_t>(nd), 0));
  parallel_for(static_cast<std::size_t>(n_chunks), threads, [&](std::size_t c) {
    int lo = static_cast<int>(c) * chunk, hi = std::min(lo + chunk, replicas);
    for (int r = lo; r < hi; ++r) {
      ReflectedGw gw(law, x0,
                     derive_seed(master_seed,
                                 static_cast<std::uint64_t>(SeedTag::kLd),
                                 0x10000000ULL + static_cast<std::uint64_t>(r)));
      // sup over s < T of Z_s - e^{-v s} x0: within one constant stretch the
      // deterministic part decays, so the sup sits at the stretch's right end
      double sup = -1e300;
      while (true) {
        int x_prev = gw.position();
        bool more = gw.step_until(T);
        sup = std::max(sup, x_prev - std::exp(-v * gw.time()) * x0);
        if (!more) break;
      }
      for (int d = 0; d < nd; ++d)
        if (sup >= deltas[static_cast<std::size_t>(d)])
          ++hits[c][static_cast<std::size_t>(d)];
    }
  });
  std::vector<LdShapeRow> rows(static_cast<std::size_t>(nd));
  for (int d = 0; d < nd; ++d) {
    long long h = 0;
    for (int c = 0; c < n_chunks; ++c) h += hits[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)];
    rows[static_cast<std::size_t>(d)] =
        LdShapeRow{deltas[static_cast<std::size_t>(d)], h,
                   static_cast<double>(h) / replicas};
  }
  return rows;
}

SubcommandResult run_ld(const ExperimentSpec& spec) {
  Artifacts art(spec, "ld");
  SubcommandResult res;
  OffspringLaw law = spec.law.to_law();
  const LdParams& p = spec.ld;

  // regime of the concentration statement
  double delta_min = *std::min_element(p.deltas.begin(), p.deltas.end());
  bool regime = p.T >= 1.0 / (16.0 * law.drift()) &&
                delta_min >= std::max(1.0, 4.0 * p.T * law.qbar());
  check(res, "ld.regime", regime,
        "T = " + num(p.T) + ", min delta = " + num(delta_min));

  LdMomentCheck mom = reflected_moment_check(law, p.moment_rho, p.moment_x0,
                                             p.moment_t, p.moment_replicas,
                                             spec.seed, spec.threads);
  check(res, "ld.moment_bound", mom.estimate + 3.0 * mom.sigma <= mom.bound,
        "estimate = " + num(mom.estimate) + " + 3s = " +
            num(mom.estimate + 3.0 * mom.sigma) + " vs bound " + num(mom.bound));

  std::vector<LdShapeRow> rows = reflected_ld_shape(
      law, p.x0, p.T, p.deltas, p.replicas, spec.seed, spec.threads);
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i)
    monotone = monotone && rows[i].freq <= rows[i - 1].freq;
  std::string freqs;
  for (const auto& r : rows) freqs += " " + num(r.freq);
  check(res, "ld.monotone_in_delta", monotone, "freq by delta:" + freqs);

  // fitted kappa: the most conservative value implied by the observed
  // frequencies; only the decay shape is asserted, not a universal constant
  double kappa_hat = 1e300;
  for (const auto& r : rows)
    if (r.freq > 0.0)
      kappa_hat = std::min(kappa_hat, -std::log(r.freq) * p.T *
                                          std::max<double>(p.x0, r.delta) /
                                          (r.delta * r.delta));
  if (kappa_hat < 1e300)
    check(res, "ld.kappa_recorded", true, "kappa_hat = " + num(kappa_hat));

  {
    auto csv = art.open_csv(res, "results.csv");
    csv << "kind,delta,hits,freq,bound\n";
    for (const auto& r : rows) {
      double bound = kappa_hat < 1e300
                         ? std::exp(-kappa_hat * r.delta * r.delta /
                                    (p.T * std::max<double>(p.x0, r.delta)))
                         : 1.0;
      csv << "ld," << num(r.delta) << "," << r.hits << "," << num(r.freq) << ","
          << num(bound) << "\n";
    }
    csv << "moment,," << "," << num(mom.estimate) << "," << num(mom.bound) << "\n";
  }
  art.write_meta(res);
  return res;
}

// ---------------------------------------------------------------------------
// chaos

SubcommandResult run_chaos(const ExperimentSpec& spec) {
  Artifacts art(spec, "chaos");
  SubcommandResult res;
  OffspringLaw law = spec.law.to_law();
  const ChaosParams& p = spec.chaos;

  auto csv = art.open_csv(res, "results.csv");
  csv << "x,y,estimate,sigma,bound,margin,mean_x,mean_y,replicas\n";
  for (const auto& [x, y] : p.pairs) {
    CovarianceCheck c = correlation_check(law, ParticleConfig(p.n), p.t, x, y,
                                          p.replicas, spec.seed, spec.threads);
    check(res,
          "chaos.margin[" + std::to_string(x) + "," + std::to_string(y) + "]",
          c.margin >= 0.0,
          "estimate + 3s = " + num(c.estimate + 3.0 * c.sigma) + " vs bound " +
              num(c.bound));
    csv << x << "," << y << "," << num(c.estimate) << "," << num(c.sigma) << ","
        << num(c.bound) << "," << num(c.margin) << "," << num(c.mean_x) << ","
        << num(c.mean_y) << "," << p.replicas << "\n";
  }
  art.write_meta(res);
  return res;
}

// ---------------------------------------------------------------------------
// semigroup

SubcommandResult run_semigroup(const ExperimentSpec& spec) {
  Artifacts art(spec, "semigroup");
  SubcommandResult res;
  OffspringLaw law = spec.law.to_law();
  const SemigroupParams& p = spec.semigroup;
  require_n_list(p.n_list, "semigroup");
  TruncatedSubGenerator gen(law, p.L);

  // exactness at t = 0 (no Monte Carlo error can enter)
  {
    SemigroupGap g0 = semigroup_gap(law, ParticleConfig(p.n_list.front()), 0.0,
                                    2, gen, spec.seed, 1);
    check(res, "semigroup.zero_at_t0", g0.max_gap == 0.0,
          "max gap at t=0: " + num(g0.max_gap));
  }

  auto csv = art.open_csv(res, "results.csv");
  csv << "N,t,replicas,max_gap,argmax,se_at_max,gap_times_N\n";
  std::vector<double> gap_n;
  for (int n : p.n_list) {
    SemigroupGap g = semigroup_gap(law, ParticleConfig(n), p.t, p.replicas, gen,
                                   spec.seed, spec.threads);
    gap_n.push_back(g.max_gap * n);
    csv << n << "," << num(p.t) << "," << p.replicas << "," << num(g.max_gap)
        << "," << g.argmax << "," << num(g.se_at_max) << ","
        << num(g.max_gap * n) << "\n";
  }
  double lo = *std::min_element(gap_n.begin(), gap_n.end());
  double hi = *std::max_element(gap_n.begin(), gap_n.end());
  std::string detail = "gap*N:";
  for (double g : gap_n) detail += " " + num(g);
  check(res, "semigroup.gapN_within_factor2", hi <= 2.0 * lo, detail);
  art.write_meta(res);
  return res;
}

}  // namespace qsdfv
