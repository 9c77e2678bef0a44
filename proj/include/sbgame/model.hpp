#pragma once

// Game instance description: battery, chance-constraint budgets, tariff and
// the bounded random inputs (renewable generation, per-agent demand).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace sbgame {

/// Strategy profile: one row per agent, one column per time step.
using Strategy = Eigen::MatrixXd;

struct BoundedRV {
  double lower = 0.0;
  double upper = 0.0;
  double mean = 0.0;

  double width() const { return upper - lower; }

  /// Symmetric support of +/- deviation*|mean| around the mean.
  static BoundedRV around(double mean, double deviation) {
    const double half = std::abs(mean) * deviation;
    return {mean - half, mean + half, mean};
  }

  bool operator==(const BoundedRV&) const = default;
};

struct DependencyGraph {
  int node_count = 0;
  std::vector<std::pair<int, int>> edges;

  static DependencyGraph edgeless(int n) { return {n, {}}; }

  static DependencyGraph complete(int n) {
    DependencyGraph g{n, {}};
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) g.edges.emplace_back(i, j);
    return g;
  }

  bool valid() const {
    for (auto [a, b] : edges) {
      if (a == b || a < 0 || b < 0 || a >= node_count || b >= node_count) return false;
    }
    return node_count >= 0;
  }

  bool operator==(const DependencyGraph&) const = default;
};

struct BatteryParams {
  double x0 = 0.5;
  double x_min = 0.1;
  double x_max = 0.9;
  double capacity = 1.0;
  double eta = 1.0;
  double dt = 1.0;
  std::vector<double> u_max;  // per agent

  double rho() const { return eta * dt; }

  bool operator==(const BatteryParams&) const = default;
};

struct ChanceSpec {
  std::vector<double> delta_x;
  std::vector<double> delta_x_tilde;
  double delta_final = 0.9;
  double delta_final_tilde = 0.05;
  std::vector<double> delta_g;
  std::vector<double> delta_g_tilde;
  double r_target = 0.6;
  double epsilon = 0.05;
  double g_max = 0.0;
  // Empty means "derive from the dependency graph" (chromatic number / 2).
  std::vector<double> nu_r;
  std::vector<double> nu_d;

  bool operator==(const ChanceSpec&) const = default;
};

struct TariffCostParams {
  std::vector<double> k_tou;
  double k_c = 0.0;
  double alpha_dch = 1.0;
  double beta_dch = 1.0;

  bool operator==(const TariffCostParams&) const = default;
};

enum class Algorithm { semi, central };
enum class Variant { consistent, literal };

inline const char* to_string(Algorithm a) { return a == Algorithm::semi ? "semi" : "central"; }
inline const char* to_string(Variant v) { return v == Variant::consistent ? "consistent" : "literal"; }

/// Step-size and stopping settings carried by the config file.
struct SolverSettings {
  std::optional<double> zeta;   // pinned strong-monotonicity constant
  double zeta_fraction = 0.99;  // used when zeta is not pinned
  std::vector<double> alpha;    // per-agent step overrides
  double alpha_fraction = 0.5;
  std::optional<double> gamma;  // pinned coordinator step
  double gamma_fraction = 0.9;
  double eps_u = 1e-6;
  double eps_lambda = 1e-6;
  long max_iters = 100000;
  Variant variant = Variant::consistent;
  Algorithm algorithm = Algorithm::semi;
  long log_stride = 100;

  bool operator==(const SolverSettings&) const = default;
};

struct ExperimentSettings {
  std::uint64_t seed = 1;
  long validation_samples = 100000;
  long cost_samples = 1000;

  bool operator==(const ExperimentSettings&) const = default;
};

struct MicrogridConfig {
  int n_agents = 1;
  int horizon = 1;
  BatteryParams battery;
  ChanceSpec chance;
  TariffCostParams tariff;
  std::vector<BoundedRV> renewable;            // length horizon
  std::vector<std::vector<BoundedRV>> demand;  // [agent][t]
  DependencyGraph renewable_dependency;        // nodes r^0..r^{tau-1}
  DependencyGraph demand_dependency;           // nodes d_1^t..d_N^t (same for every t)
  SolverSettings solver;
  ExperimentSettings experiment;

  Eigen::VectorXd renewable_mean() const {
    Eigen::VectorXd m(horizon);
    for (int t = 0; t < horizon; ++t) m(t) = renewable[t].mean;
    return m;
  }

  /// N x tau matrix of demand means.
  Eigen::MatrixXd demand_mean() const {
    Eigen::MatrixXd m(n_agents, horizon);
    for (int i = 0; i < n_agents; ++i)
      for (int t = 0; t < horizon; ++t) m(i, t) = demand[i][t].mean;
    return m;
  }

  Eigen::VectorXd total_demand_mean() const { return demand_mean().colwise().sum().transpose(); }

  bool operator==(const MicrogridConfig&) const = default;
};

struct Violation {
  std::string key;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }

  std::string to_string() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.key << ": " << v.message << '\n';
    return os.str();
  }
};

namespace detail {

inline std::string indexed(const std::string& key, std::size_t i) {
  return key + "[" + std::to_string(i) + "]";
}

inline bool finite_all(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

/// Checks every structural and parameter invariant. Never throws.
inline ValidationReport validate(const MicrogridConfig& c) {
  ValidationReport r;
  auto fail = [&](std::string key, std::string msg) { r.violations.push_back({std::move(key), std::move(msg)}); };
  const auto N = static_cast<std::size_t>(c.n_agents > 0 ? c.n_agents : 0);
  const auto T = static_cast<std::size_t>(c.horizon > 0 ? c.horizon : 0);

  if (c.n_agents < 1) fail("agents", "agents >= 1 required");
  if (c.horizon < 1) fail("horizon", "horizon >= 1 required");

  const auto& b = c.battery;
  if (!(b.x_min < b.x_max)) fail("battery.x_min", "x_min < x_max violated");
  if (!(b.x_min <= b.x0 && b.x0 <= b.x_max)) fail("battery.x0", "x_min <= x0 <= x_max violated");
  if (!(b.eta > 0.0)) fail("battery.eta", "eta > 0 required");
  if (!(b.dt > 0.0)) fail("battery.dt", "dt > 0 required");
  if (!(b.capacity > 0.0)) fail("battery.capacity", "capacity > 0 required");
  if (b.u_max.size() != N) {
    fail("battery.u_max", "one bound per agent required");
  } else {
    for (std::size_t i = 0; i < N; ++i)
      if (!(b.u_max[i] > 0.0)) fail(detail::indexed("battery.u_max", i), "u_max > 0 required");
  }

  const auto& ch = c.chance;
  auto check_split = [&](const std::string& name, const std::vector<double>& delta,
                         const std::vector<double>& tilde) {
    if (delta.size() != T) {
      fail("chance." + name, "one value per time step required");
      return;
    }
    if (tilde.size() != T) {
      fail("chance." + name + "_tilde", "one value per time step required");
      return;
    }
    for (std::size_t t = 0; t < T; ++t) {
      if (!(delta[t] >= 0.0 && delta[t] <= 1.0))
        fail(detail::indexed("chance." + name, t), name + " in [0, 1] required");
      if (!(tilde[t] > 0.0 && tilde[t] < 1.0))
        fail(detail::indexed("chance." + name + "_tilde", t), "0 < " + name + "_tilde < 1 required");
      const double rest = delta[t] - tilde[t];
      if (!(rest > 0.0 && rest <= 1.0))
        fail(detail::indexed("chance." + name, t), name + " - " + name + "_tilde > 0 required");
    }
  };
  check_split("delta_x", ch.delta_x, ch.delta_x_tilde);
  check_split("delta_g", ch.delta_g, ch.delta_g_tilde);
  if (!(ch.delta_final_tilde > 0.0 && ch.delta_final_tilde < 1.0))
    fail("chance.delta_final_tilde", "0 < delta_final_tilde < 1 required");
  {
    const double rest = ch.delta_final - ch.delta_final_tilde;
    if (!(rest > 0.0 && rest <= 1.0))
      fail("chance.delta_final", "delta_final - delta_final_tilde > 0 required");
  }
  if (!(ch.r_target >= b.x_min && ch.r_target <= b.x_max))
    fail("chance.r_target", "x_min <= r_target <= x_max violated");
  {
    const double bound = std::min(ch.r_target - b.x_min, b.x_max - ch.r_target);
    if (!(ch.epsilon > 0.0 && ch.epsilon < bound))
      fail("chance.epsilon", "epsilon < min(r_target - x_min, x_max - r_target) violated");
  }
  if (!(ch.g_max >= 0.0) || !std::isfinite(ch.g_max)) fail("chance.g_max", "g_max >= 0 required");
  if (!ch.nu_r.empty()) {
    if (ch.nu_r.size() != T) fail("dependencies.nu_r", "one value per time step required");
    for (std::size_t t = 0; t < ch.nu_r.size(); ++t)
      if (!(ch.nu_r[t] > 0.0)) fail(detail::indexed("dependencies.nu_r", t), "nu_r > 0 required");
  }
  if (!ch.nu_d.empty()) {
    if (ch.nu_d.size() != T) fail("dependencies.nu_d", "one value per time step required");
    for (std::size_t t = 0; t < ch.nu_d.size(); ++t)
      if (!(ch.nu_d[t] > 0.0)) fail(detail::indexed("dependencies.nu_d", t), "nu_d > 0 required");
  }

  const auto& tf = c.tariff;
  if (tf.k_tou.size() != T || !detail::finite_all(tf.k_tou))
    fail("tariff.k_tou", "one finite price per time step required");
  if (!(tf.k_c > 0.0)) fail("tariff.k_c", "k_c > 0 required");
  if (!(tf.alpha_dch > 0.0)) fail("tariff.alpha_dch", "alpha_dch > 0 required");
  if (!(tf.beta_dch > 0.0)) fail("tariff.beta_dch", "beta_dch > 0 required");

  auto check_rv = [&](const std::string& key, const BoundedRV& rv) {
    if (!(std::isfinite(rv.lower) && std::isfinite(rv.upper) && std::isfinite(rv.mean)))
      fail(key, "finite support and mean required");
    else if (!(rv.lower <= rv.mean && rv.mean <= rv.upper))
      fail(key, "lower <= mean <= upper violated");
  };
  if (c.renewable.size() != T) {
    fail("renewable", "one entry per time step required");
  } else {
    for (std::size_t t = 0; t < T; ++t) check_rv(detail::indexed("renewable", t), c.renewable[t]);
  }
  if (c.demand.size() != N) {
    fail("demand", "one profile per agent required");
  } else {
    for (std::size_t i = 0; i < N; ++i) {
      if (c.demand[i].size() != T) {
        fail(detail::indexed("demand", i), "one entry per time step required");
        continue;
      }
      for (std::size_t t = 0; t < T; ++t)
        check_rv(detail::indexed(detail::indexed("demand", i), t), c.demand[i][t]);
    }
  }

  if (c.renewable_dependency.node_count != c.horizon || !c.renewable_dependency.valid())
    fail("dependencies.renewable_edges", "graph over horizon nodes without self-loops required");
  if (c.demand_dependency.node_count != c.n_agents || !c.demand_dependency.valid())
    fail("dependencies.demand_edges", "graph over agent nodes without self-loops required");

  const auto& s = c.solver;
  if (!s.alpha.empty() && s.alpha.size() != N) fail("solver.alpha", "one step size per agent required");
  if (!(s.zeta_fraction > 0.0 && s.zeta_fraction <= 1.0)) fail("solver.zeta_fraction", "in (0, 1] required");
  if (!(s.alpha_fraction > 0.0 && s.alpha_fraction < 1.0)) fail("solver.alpha_fraction", "in (0, 1) required");
  if (!(s.gamma_fraction > 0.0 && s.gamma_fraction < 1.0)) fail("solver.gamma_fraction", "in (0, 1) required");
  if (!(s.eps_u > 0.0)) fail("solver.eps_u", "eps_u > 0 required");
  if (!(s.eps_lambda > 0.0)) fail("solver.eps_lambda", "eps_lambda > 0 required");
  if (s.max_iters < 1) fail("solver.max_iters", "max_iters >= 1 required");
  if (s.log_stride < 1) fail("solver.log_stride", "log_stride >= 1 required");
  if (c.experiment.validation_samples < 1) fail("experiment.validation_samples", "samples >= 1 required");
  if (c.experiment.cost_samples < 1) fail("experiment.cost_samples", "samples >= 1 required");
  return r;
}

struct ScenarioDraw {
  Eigen::VectorXd renewable;  // length tau
  Eigen::MatrixXd demand;     // N x tau
};

namespace detail {

inline double draw_uniform(std::mt19937_64& gen, const BoundedRV& rv) {
  if (!(rv.upper > rv.lower)) return rv.mean;
  std::uniform_real_distribution<double> dist(rv.lower, rv.upper);
  return dist(gen);
}

}  // namespace detail

/// Seed of the s-th scenario in a Monte Carlo run (splitmix64 finalizer).
inline std::uint64_t scenario_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// One joint realization of renewable output and demands, uniform on each
/// declared support. Deterministic in the seed.
inline ScenarioDraw sample_scenario(const MicrogridConfig& c, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  ScenarioDraw s{Eigen::VectorXd(c.horizon), Eigen::MatrixXd(c.n_agents, c.horizon)};
  for (int t = 0; t < c.horizon; ++t) s.renewable(t) = detail::draw_uniform(gen, c.renewable[t]);
  for (int i = 0; i < c.n_agents; ++i)
    for (int t = 0; t < c.horizon; ++t) s.demand(i, t) = detail::draw_uniform(gen, c.demand[i][t]);
  return s;
}

}  // namespace sbgame
