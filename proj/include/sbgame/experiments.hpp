#pragma once

// Mode comparison, SoC simulation, Monte Carlo validation of the chance
// constraints, realized-cost sampling and the CSV outputs.

#include "sbgame/chance.hpp"
#include "sbgame/constraints.hpp"
#include "sbgame/csv.hpp"
#include "sbgame/game.hpp"
#include "sbgame/model.hpp"
#include "sbgame/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sbgame {

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// x^{t+1} = x^t + rho (r^t - sum_j u_j^t), returned for t = 0..tau.
inline Eigen::VectorXd simulate_soc(const MicrogridConfig& c, const Strategy& u, const Eigen::VectorXd& renewable) {
  if (u.cols() != c.horizon || renewable.size() != c.horizon)
    throw std::invalid_argument("simulate_soc: horizon mismatch");
  const double rho = c.battery.rho();
  const Eigen::VectorXd s = aggregate(u);
  Eigen::VectorXd x(c.horizon + 1);
  x(0) = c.battery.x0;
  for (int t = 0; t < c.horizon; ++t) x(t + 1) = x(t) + rho * (renewable(t) - s(t));
  return x;
}

inline Eigen::VectorXd simulate_soc(const MicrogridConfig& c, const Strategy& u, const ScenarioDraw& scenario) {
  return simulate_soc(c, u, scenario.renewable);
}

struct ModeResult {
  ConstraintMode mode = ConstraintMode::stochastic;
  GNEResult gne;
  Eigen::VectorXd grid_exchange_mean;  // sum_j (mu_dj - u_j*), length tau
  Eigen::VectorXd soc_mean;            // length tau + 1
  CouplingConstraint coupling;
  MonotonicityConstants constants;
  SolverParams params;
  FeasibilityReport feasibility;
};

struct RunOptions {
  Algorithm algorithm = Algorithm::semi;
  bool allow_nonslater = false;
  SolveOptions solve;
};

inline ModeResult run_mode(const MicrogridConfig& c, ConstraintMode mode, const RunOptions& opt = {}) {
  const ValidationReport v = validate(c);
  if (!v.ok()) throw std::invalid_argument("run_mode: invalid config: " + v.to_string());
  ModeResult r;
  r.mode = mode;
  r.coupling = build_coupling(c, compute_margins(c), mode);
  r.feasibility = feasibility_search(r.coupling, local_boxes(c));
  if (!r.feasibility.strictly_feasible && !opt.allow_nonslater)
    throw InfeasibleError(std::string("no strictly feasible profile for mode ") + to_string(mode) +
                          " (best max violation " + format_double(r.feasibility.min_max_violation) + ")");
  r.constants = monotonicity_constants(c);
  r.params = step_sizes(c, r.constants, r.coupling);
  const GameMatrices gm = build_cost(c);
  r.gne = solve(c, gm, r.coupling, r.params, opt.algorithm, opt.solve);
  r.grid_exchange_mean = c.total_demand_mean() - aggregate(r.gne.u_star);
  r.soc_mean = simulate_soc(c, r.gne.u_star, c.renewable_mean());
  return r;
}

namespace detail {

/// Evaluates fn(index) for index in [0, n) on up to `threads` workers and
/// stores results by index, so the output does not depend on the split.
template <class T, class Fn>
std::vector<T> parallel_map(long n, int threads, Fn fn) {
  std::vector<T> out(static_cast<std::size_t>(std::max(0L, n)));
  const int workers = static_cast<int>(std::clamp<long>(threads, 1, std::max(1L, n)));
  if (workers == 1) {
    for (long i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (long i = w; i < n; i += workers) out[i] = fn(i);
    });
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace detail

struct ViolationReport {
  long samples = 0;
  std::vector<double> soc_rate;  // t = 1..tau
  std::vector<double> soc_se;
  double final_rate = 0.0;
  double final_se = 0.0;
  std::vector<double> grid_rate;  // t = 0..tau-1
  std::vector<double> grid_se;
};

inline double binomial_se(double p, long n) { return n > 0 ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0; }

/// Empirical frequencies of x^t outside [x_min, x_max], |x^tau - r| > epsilon
/// and g^t outside [0, g_max] over seed-derived scenarios.
inline ViolationReport montecarlo_validate(const MicrogridConfig& c, const Strategy& u, long samples,
                                           std::uint64_t seed, int threads = 1) {
  if (samples < 1) throw std::invalid_argument("montecarlo_validate: samples >= 1 required");
  const int tau = c.horizon;
  const Eigen::VectorXd s = aggregate(u);
  struct Hits {
    std::vector<char> soc, grid;
    char final_hit = 0;
  };
  const auto hits = detail::parallel_map<Hits>(samples, threads, [&](long k) {
    const ScenarioDraw d = sample_scenario(c, scenario_seed(seed, static_cast<std::uint64_t>(k)));
    const Eigen::VectorXd x = simulate_soc(c, u, d);
    const Eigen::VectorXd g = d.demand.colwise().sum().transpose() - s;
    Hits h{std::vector<char>(tau), std::vector<char>(tau), 0};
    for (int t = 0; t < tau; ++t) {
      h.soc[t] = x(t + 1) < c.battery.x_min || x(t + 1) > c.battery.x_max;
      h.grid[t] = g(t) < 0.0 || g(t) > c.chance.g_max;
    }
    h.final_hit = std::abs(x(tau) - c.chance.r_target) > c.chance.epsilon;
    return h;
  });
  ViolationReport rep;
  rep.samples = samples;
  std::vector<long> soc(tau, 0), grid(tau, 0);
  long fin = 0;
  for (const auto& h : hits) {
    for (int t = 0; t < tau; ++t) {
      soc[t] += h.soc[t];
      grid[t] += h.grid[t];
    }
    fin += h.final_hit;
  }
  const double n = static_cast<double>(samples);
  for (int t = 0; t < tau; ++t) {
    rep.soc_rate.push_back(soc[t] / n);
    rep.soc_se.push_back(binomial_se(rep.soc_rate.back(), samples));
    rep.grid_rate.push_back(grid[t] / n);
    rep.grid_se.push_back(binomial_se(rep.grid_rate.back(), samples));
  }
  rep.final_rate = fin / n;
  rep.final_se = binomial_se(rep.final_rate, samples);
  return rep;
}

/// Per-agent cost with expectations replaced by one realization: each agent
/// pays (K + k_c g) g_i and the battery degradation of all discharges.
inline Eigen::VectorXd realized_costs(const MicrogridConfig& c, const Strategy& u, const Eigen::MatrixXd& demand) {
  const int N = c.n_agents, tau = c.horizon;
  const Eigen::VectorXd s = aggregate(u);
  const Eigen::VectorXd dsum = demand.colwise().sum().transpose();
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(N);
  for (int t = 0; t < tau; ++t) {
    double degradation = 0.0;
    for (int j = 0; j < N; ++j) degradation += c.tariff.alpha_dch * u(j, t) * u(j, t) + c.tariff.beta_dch * u(j, t);
    const double price = c.tariff.k_tou[t] + c.tariff.k_c * (dsum(t) - s(t));
    for (int i = 0; i < N; ++i) cost(i) += price * (demand(i, t) - u(i, t)) + degradation;
  }
  return cost;
}

inline double realized_total_cost(const MicrogridConfig& c, const Strategy& u, const Eigen::MatrixXd& demand) {
  return realized_costs(c, u, demand).sum();
}

struct CostHistogram {
  std::vector<ConstraintMode> modes;
  std::vector<std::vector<double>> costs;  // [mode][sample]
  std::vector<double> edges;
  std::vector<std::vector<long>> counts;  // [mode][bin]
  std::vector<double> means;
};

/// Freedman-Diaconis edges over the pooled samples.
inline std::vector<double> freedman_diaconis_edges(std::vector<double> pooled, int max_bins = 200) {
  if (pooled.empty()) return {};
  std::sort(pooled.begin(), pooled.end());
  const double lo = pooled.front(), hi = pooled.back();
  if (!(hi > lo)) return {lo - 0.5, hi + 0.5};
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(pooled.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < pooled.size() ? pooled[i] + frac * (pooled[i + 1] - pooled[i]) : pooled[i];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double width = 2.0 * iqr / std::cbrt(static_cast<double>(pooled.size()));
  int bins = width > 0.0 ? static_cast<int>(std::ceil((hi - lo) / width)) : 1;
  bins = std::clamp(bins, 1, max_bins);
  width = (hi - lo) / bins;
  std::vector<double> edges(bins + 1);
  for (int b = 0; b <= bins; ++b) edges[b] = lo + b * width;
  edges.back() = hi;
  return edges;
}

/// Realized total costs of every mode on the same scenario draws.
inline CostHistogram montecarlo_costs(const MicrogridConfig& c, const std::vector<ModeResult>& modes, long samples,
                                      std::uint64_t seed, int threads = 1) {
  if (samples < 1) throw std::invalid_argument("montecarlo_costs: samples >= 1 required");
  const auto per_sample = detail::parallel_map<std::vector<double>>(samples, threads, [&](long k) {
    const ScenarioDraw d = sample_scenario(c, scenario_seed(seed, static_cast<std::uint64_t>(k)));
    std::vector<double> v;
    for (const auto& m : modes) v.push_back(realized_total_cost(c, m.gne.u_star, d.demand));
    return v;
  });
  CostHistogram h;
  std::vector<double> pooled;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    h.modes.push_back(modes[m].mode);
    std::vector<double> col(samples);
    double sum = 0.0;
    for (long k = 0; k < samples; ++k) {
      col[k] = per_sample[k][m];
      sum += col[k];
    }
    h.means.push_back(sum / static_cast<double>(samples));
    pooled.insert(pooled.end(), col.begin(), col.end());
    h.costs.push_back(std::move(col));
  }
  h.edges = freedman_diaconis_edges(pooled);
  for (const auto& col : h.costs) {
    std::vector<long> cnt(h.edges.size() > 1 ? h.edges.size() - 1 : 0, 0);
    for (double v : col) {
      auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
      auto b = static_cast<long>(it - h.edges.begin()) - 1;
      b = std::clamp<long>(b, 0, static_cast<long>(cnt.size()) - 1);
      if (!cnt.empty()) ++cnt[b];
    }
    h.counts.push_back(std::move(cnt));
  }
  return h;
}

// CSV outputs.

inline void write_discharge_profiles(const std::string& path, const std::vector<ModeResult>& modes) {
  CsvWriter w(path);
  if (modes.empty()) return;
  const auto N = modes.front().gne.u_star.rows();
  w.field("t").field("mode");
  for (Eigen::Index i = 0; i < N; ++i) w.field("u_" + std::to_string(i + 1));
  w.field("total").end_row();
  for (const auto& m : modes)
    for (Eigen::Index t = 0; t < m.gne.u_star.cols(); ++t) {
      w.field(static_cast<long>(t)).field(to_string(m.mode));
      for (Eigen::Index i = 0; i < N; ++i) w.field(m.gne.u_star(i, t));
      w.field(m.gne.u_star.col(t).sum()).end_row();
    }
}

inline void write_grid_exchange(const std::string& path, const std::vector<ModeResult>& modes) {
  CsvWriter w(path);
  w.header({"t", "mode", "grid_exchange", "soc"});
  for (const auto& m : modes)
    for (Eigen::Index t = 0; t < m.grid_exchange_mean.size(); ++t)
      w.field(static_cast<long>(t)).field(to_string(m.mode)).field(m.grid_exchange_mean(t)).field(m.soc_mean(t + 1))
          .end_row();
}

inline void write_violations(const std::string& path, const ViolationReport& v) {
  CsvWriter w(path);
  w.header({"t", "constraint", "rate", "se"});
  const long tau = static_cast<long>(v.soc_rate.size());
  for (long t = 0; t < tau; ++t) w.field(t + 1).field("soc").field(v.soc_rate[t]).field(v.soc_se[t]).end_row();
  w.field(tau).field("final_soc").field(v.final_rate).field(v.final_se).end_row();
  for (long t = 0; t < tau; ++t) w.field(t).field("grid").field(v.grid_rate[t]).field(v.grid_se[t]).end_row();
}

inline void write_costs(const std::string& path, const CostHistogram& h) {
  CsvWriter w(path);
  w.header({"mode", "sample", "cost"});
  for (std::size_t m = 0; m < h.modes.size(); ++m)
    for (std::size_t k = 0; k < h.costs[m].size(); ++k)
      w.field(to_string(h.modes[m])).field(static_cast<long>(k)).field(h.costs[m][k]).end_row();
}

inline void write_histogram(const std::string& path, const CostHistogram& h) {
  CsvWriter w(path);
  w.header({"mode", "bin", "lower", "upper", "count"});
  for (std::size_t m = 0; m < h.modes.size(); ++m)
    for (std::size_t b = 0; b < h.counts[m].size(); ++b)
      w.field(to_string(h.modes[m])).field(static_cast<long>(b)).field(h.edges[b]).field(h.edges[b + 1])
          .field(h.counts[m][b]).end_row();
}

/// One row per mode. mean_cost is the Monte Carlo mean when a histogram is
/// given, else the expected total cost.
inline void write_summary(const std::string& path, const MicrogridConfig& c, const std::vector<ModeResult>& modes,
                          const CostHistogram* hist = nullptr) {
  CsvWriter w(path);
  w.field("mode").field("converged").field("iterations").field("mean_cost").field("expected_cost")
      .field("peak_grid_exchange").field("fixed_point_residual").field("feasibility_max");
  for (int t = 0; t < c.horizon; ++t) w.field("u_total_" + std::to_string(t));
  w.end_row();
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const auto& r = modes[m];
    double expected = 0.0;
    for (const auto& cr : expected_cost(c, r.gne.u_star)) expected += cr.total_expected;
    const double mean = hist ? hist->means[m] : expected;
    w.field(to_string(r.mode)).field(r.gne.converged).field(r.gne.iterations).field(mean).field(expected)
        .field(r.grid_exchange_mean.maxCoeff()).field(r.gne.fixed_point_residual).field(r.gne.feasibility_max);
    const Eigen::VectorXd s = aggregate(r.gne.u_star);
    for (Eigen::Index t = 0; t < s.size(); ++t) w.field(s(t));
    w.end_row();
  }
}

inline void write_iteration_log(const std::string& path, const GNEResult& g) {
  CsvWriter w(path);
  w.header({"k", "residual_u", "residual_lam", "feasibility_max", "objective_total"});
  for (const auto& r : g.log)
    w.field(r.k).field(r.residual_u).field(r.residual_lam).field(r.feasibility_max).field(r.objective_total).end_row();
}

inline void write_margins(const std::string& path, const MarginSet& q) {
  CsvWriter w(path);
  w.header({"t", "q_x1", "q_x2", "q_g1", "q_g2"});
  for (int t = 0; t < q.horizon(); ++t)
    w.field(t).field(q.q_x1[t]).field(q.q_x2[t]).field(q.q_g1[t]).field(q.q_g2[t]).end_row();
}

inline void write_constants(const std::string& path, const MonotonicityConstants& mc, const SolverParams& p,
                            const MarginSet& q, double preconditioner_min_eig) {
  CsvWriter w(path);
  w.header({"name", "value"});
  auto row = [&](const char* k, double v) { w.field(k).field(v).end_row(); };
  row("eig_min", mc.eig_min);
  row("eig_max", mc.eig_max);
  row("zeta", mc.zeta);
  row("l_f", mc.l_f);
  row("alpha_bound", p.alpha_bound);
  row("alpha_min", p.alpha.minCoeff());
  row("alpha_max", p.alpha.maxCoeff());
  row("gamma", p.gamma);
  row("gamma_max", p.gamma_max);
  row("preconditioner_min_eig", preconditioner_min_eig);
  row("q_final1", q.q_final1);
  row("q_final2", q.q_final2);
}

inline void write_constraints(std::ostream& os, const CouplingConstraint& cc) {
  CsvWriter w(os);
  w.field("row").field("block").field("b");
  for (int t = 0; t < cc.horizon(); ++t) w.field("a_" + std::to_string(t));
  w.end_row();
  for (int r = 0; r < cc.rows(); ++r) {
    w.field(r).field(to_string(cc.block_index[r])).field(cc.b(r));
    for (int t = 0; t < cc.horizon(); ++t) w.field(cc.A(r, t));
    w.end_row();
  }
}

inline void write_constraints(const std::string& path, const CouplingConstraint& cc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_constraints(out, cc);
}

}  // namespace sbgame
