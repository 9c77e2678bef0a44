#pragma once

// Chernoff-Hoeffding margins that turn the probabilistic SoC, final-SoC and
// retailer constraints into deterministic linear ones.

#include "sbgame/model.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace sbgame {

/// Greedy coloring in node order; an upper bound on the chromatic number,
/// exact for edgeless and complete graphs.
inline int chromatic_upper_bound(const DependencyGraph& g) {
  if (g.node_count <= 0) return 1;
  std::vector<std::vector<int>> adj(g.node_count);
  for (auto [a, b] : g.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> color(g.node_count, -1);
  int used = 1;
  std::vector<char> taken;
  for (int v = 0; v < g.node_count; ++v) {
    taken.assign(g.node_count + 1, 0);
    for (int w : adj[v])
      if (color[w] >= 0) taken[color[w]] = 1;
    int c = 0;
    while (taken[c]) ++c;
    color[v] = c;
    used = std::max(used, c + 1);
  }
  return used;
}

/// Deviation q such that Pr{Z - E Z <= -q} <= delta for a sum of bounded
/// variables with the given support widths: q = sqrt(-nu * sum(w^2) * ln delta).
inline double hoeffding_margin(std::span<const double> widths, double nu, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::domain_error("hoeffding_margin: confidence must lie in (0, 1]");
  if (!(nu > 0.0)) throw std::domain_error("hoeffding_margin: nu must be positive");
  double sum_sq = 0.0;
  for (double w : widths) {
    if (w < 0.0) throw std::domain_error("hoeffding_margin: negative support width");
    sum_sq += w * w;
  }
  const double arg = -nu * sum_sq * std::log(delta);
  return arg > 0.0 ? std::sqrt(arg) : 0.0;
}

struct MarginSet {
  std::vector<double> q_x1;  // SoC lower side, t = 1..tau
  std::vector<double> q_x2;  // SoC upper side
  double q_final1 = 0.0;
  double q_final2 = 0.0;
  std::vector<double> q_g1;  // retailer lower side, t = 0..tau-1
  std::vector<double> q_g2;

  int horizon() const { return static_cast<int>(q_x1.size()); }
};

/// nu_r^t for t = 1..tau: configured values, else chi/2 of the dependency
/// graph restricted to r^0..r^{t-1}.
inline std::vector<double> effective_nu_r(const MicrogridConfig& c) {
  if (!c.chance.nu_r.empty()) return c.chance.nu_r;
  std::vector<double> nu(c.horizon);
  for (int t = 1; t <= c.horizon; ++t) {
    DependencyGraph prefix = DependencyGraph::edgeless(t);
    for (auto [a, b] : c.renewable_dependency.edges)
      if (a < t && b < t) prefix.edges.emplace_back(a, b);
    nu[t - 1] = 0.5 * chromatic_upper_bound(prefix);
  }
  return nu;
}

inline std::vector<double> effective_nu_d(const MicrogridConfig& c) {
  if (!c.chance.nu_d.empty()) return c.chance.nu_d;
  return std::vector<double>(c.horizon, 0.5 * chromatic_upper_bound(c.demand_dependency));
}

namespace detail {

inline std::vector<double> renewable_widths(const MicrogridConfig& c) {
  std::vector<double> w(c.horizon);
  for (int t = 0; t < c.horizon; ++t) w[t] = c.renewable[t].width();
  return w;
}

}  // namespace detail

/// Per-step SoC margins (q_x1, q_x2), each of length tau.
inline std::pair<std::vector<double>, std::vector<double>> soc_margins(const MicrogridConfig& c) {
  const double rho = c.battery.rho();
  const auto widths = detail::renewable_widths(c);
  const auto nu = effective_nu_r(c);
  std::vector<double> q1(c.horizon), q2(c.horizon);
  for (int t = 1; t <= c.horizon; ++t) {
    std::span<const double> prefix(widths.data(), static_cast<std::size_t>(t));
    const double tilde = c.chance.delta_x_tilde[t - 1];
    const double rest = c.chance.delta_x[t - 1] - tilde;
    q1[t - 1] = rho * hoeffding_margin(prefix, nu[t - 1], tilde);
    q2[t - 1] = rho * hoeffding_margin(prefix, nu[t - 1], rest);
  }
  return {q1, q2};
}

inline std::pair<double, double> final_soc_margins(const MicrogridConfig& c) {
  const double rho = c.battery.rho();
  const auto widths = detail::renewable_widths(c);
  const double nu = effective_nu_r(c).back();
  const double tilde = c.chance.delta_final_tilde;
  const double rest = c.chance.delta_final - tilde;
  return {rho * hoeffding_margin(widths, nu, tilde), rho * hoeffding_margin(widths, nu, rest)};
}

/// Retailer margins over the N demand widths at each step.
inline std::pair<std::vector<double>, std::vector<double>> grid_margins(const MicrogridConfig& c) {
  const auto nu = effective_nu_d(c);
  std::vector<double> q1(c.horizon), q2(c.horizon), widths(c.n_agents);
  for (int t = 0; t < c.horizon; ++t) {
    for (int i = 0; i < c.n_agents; ++i) widths[i] = c.demand[i][t].width();
    const double tilde = c.chance.delta_g_tilde[t];
    const double rest = c.chance.delta_g[t] - tilde;
    q1[t] = hoeffding_margin(widths, nu[t], tilde);
    q2[t] = hoeffding_margin(widths, nu[t], rest);
  }
  return {q1, q2};
}

inline MarginSet compute_margins(const MicrogridConfig& c) {
  MarginSet m;
  std::tie(m.q_x1, m.q_x2) = soc_margins(c);
  std::tie(m.q_final1, m.q_final2) = final_soc_margins(c);
  std::tie(m.q_g1, m.q_g2) = grid_margins(c);
  return m;
}

}  // namespace sbgame
