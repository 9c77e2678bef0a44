#pragma once

// Deterministic coupling polyhedron  A * sum_j u_j <= b  and the local boxes.

#include "sbgame/chance.hpp"
#include "sbgame/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbgame {

enum class ConstraintMode { stochastic, det_lower, det_upper };

inline const char* to_string(ConstraintMode m) {
  switch (m) {
    case ConstraintMode::stochastic: return "stochastic";
    case ConstraintMode::det_lower: return "det_lower";
    case ConstraintMode::det_upper: return "det_upper";
  }
  return "?";
}

inline std::optional<ConstraintMode> parse_mode(const std::string& s) {
  if (s == "stochastic") return ConstraintMode::stochastic;
  if (s == "det_lower") return ConstraintMode::det_lower;
  if (s == "det_upper") return ConstraintMode::det_upper;
  return std::nullopt;
}

enum class RowBlock { soc_lower, soc_upper, final_lower, final_upper, grid_lower, grid_upper };

inline const char* to_string(RowBlock b) {
  switch (b) {
    case RowBlock::soc_lower: return "soc-lower";
    case RowBlock::soc_upper: return "soc-upper";
    case RowBlock::final_lower: return "final-lower";
    case RowBlock::final_upper: return "final-upper";
    case RowBlock::grid_lower: return "grid-lower";
    case RowBlock::grid_upper: return "grid-upper";
  }
  return "?";
}

/// Rows are stacked as [soc-lower (tau); soc-upper (tau); final-lower;
/// final-upper; grid-lower (tau); grid-upper (tau)], m = 4 tau + 2.
struct CouplingConstraint {
  Eigen::MatrixXd A;  // m x tau
  Eigen::VectorXd b;  // m
  std::vector<RowBlock> block_index;

  int rows() const { return static_cast<int>(A.rows()); }
  int horizon() const { return static_cast<int>(A.cols()); }

  /// First row of a block.
  static int block_offset(RowBlock blk, int tau) {
    switch (blk) {
      case RowBlock::soc_lower: return 0;
      case RowBlock::soc_upper: return tau;
      case RowBlock::final_lower: return 2 * tau;
      case RowBlock::final_upper: return 2 * tau + 1;
      case RowBlock::grid_lower: return 2 * tau + 2;
      case RowBlock::grid_upper: return 3 * tau + 2;
    }
    return 0;
  }
};

struct LocalBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::VectorXd midpoint() const { return 0.5 * (lower + upper); }
};

/// Lower-triangular all-ones matrix: (M u)_t = u_0 + ... + u_t.
inline Eigen::MatrixXd cumulative_sum_matrix(int tau) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(tau, tau);
  for (int r = 0; r < tau; ++r)
    for (int c = 0; c <= r; ++c) m(r, c) = 1.0;
  return m;
}

inline CouplingConstraint build_coupling(const MicrogridConfig& c, const MarginSet& q, ConstraintMode mode) {
  const int tau = c.horizon;
  if (q.horizon() != tau || static_cast<int>(q.q_x2.size()) != tau || static_cast<int>(q.q_g1.size()) != tau ||
      static_cast<int>(q.q_g2.size()) != tau)
    throw std::invalid_argument("build_coupling: margin set and config disagree on the horizon");
  if (static_cast<int>(c.demand.size()) != c.n_agents)
    throw std::invalid_argument("build_coupling: demand profiles do not match the agent count");

  const int m = 4 * tau + 2;
  const double rho = c.battery.rho();
  const double x0 = c.battery.x0, x_lo = c.battery.x_min, x_hi = c.battery.x_max;
  const double r = c.chance.r_target, eps = c.chance.epsilon;
  const bool stochastic = mode == ConstraintMode::stochastic;

  const Eigen::MatrixXd M = cumulative_sum_matrix(tau);
  const Eigen::VectorXd mu_r = c.renewable_mean();
  const Eigen::VectorXd cum_r = M * mu_r;
  const double total_r = mu_r.sum();

  Eigen::VectorXd demand_sum = Eigen::VectorXd::Zero(tau);
  for (int i = 0; i < c.n_agents; ++i)
    for (int t = 0; t < tau; ++t) {
      const auto& rv = c.demand[i][t];
      demand_sum(t) += mode == ConstraintMode::det_lower   ? rv.lower
                       : mode == ConstraintMode::det_upper ? rv.upper
                                                           : rv.mean;
    }

  auto margin = [&](const std::vector<double>& v, int t) { return stochastic ? v[t] : 0.0; };
  const double qf1 = stochastic ? q.q_final1 : 0.0;
  const double qf2 = stochastic ? q.q_final2 : 0.0;

  CouplingConstraint cc;
  cc.A = Eigen::MatrixXd::Zero(m, tau);
  cc.b = Eigen::VectorXd::Zero(m);
  cc.block_index.resize(m);

  const int sl = CouplingConstraint::block_offset(RowBlock::soc_lower, tau);
  const int su = CouplingConstraint::block_offset(RowBlock::soc_upper, tau);
  const int fl = CouplingConstraint::block_offset(RowBlock::final_lower, tau);
  const int fu = CouplingConstraint::block_offset(RowBlock::final_upper, tau);
  const int gl = CouplingConstraint::block_offset(RowBlock::grid_lower, tau);
  const int gu = CouplingConstraint::block_offset(RowBlock::grid_upper, tau);

  cc.A.block(sl, 0, tau, tau) = rho * M;
  cc.A.block(su, 0, tau, tau) = -rho * M;
  cc.A.row(fl).setConstant(rho);
  cc.A.row(fu).setConstant(-rho);
  cc.A.block(gl, 0, tau, tau).setIdentity();
  cc.A.block(gu, 0, tau, tau) = -Eigen::MatrixXd::Identity(tau, tau);

  for (int t = 0; t < tau; ++t) {
    cc.b(sl + t) = -((x_lo - x0) - rho * cum_r(t) + margin(q.q_x1, t));
    cc.b(su + t) = -((x0 - x_hi) + rho * cum_r(t) + margin(q.q_x2, t));
    cc.b(gl + t) = -(-demand_sum(t) + margin(q.q_g1, t));
    cc.b(gu + t) = -(-c.chance.g_max + demand_sum(t) + margin(q.q_g2, t));
    cc.block_index[sl + t] = RowBlock::soc_lower;
    cc.block_index[su + t] = RowBlock::soc_upper;
    cc.block_index[gl + t] = RowBlock::grid_lower;
    cc.block_index[gu + t] = RowBlock::grid_upper;
  }
  cc.b(fl) = -(r - eps - x0 - rho * total_r + qf1);
  cc.b(fu) = -(x0 - r - eps + rho * total_r + qf2);
  cc.block_index[fl] = RowBlock::final_lower;
  cc.block_index[fu] = RowBlock::final_upper;
  return cc;
}

inline std::vector<LocalBox> local_boxes(const MicrogridConfig& c) {
  std::vector<LocalBox> boxes;
  boxes.reserve(c.n_agents);
  for (int i = 0; i < c.n_agents; ++i)
    boxes.push_back({Eigen::VectorXd::Zero(c.horizon), Eigen::VectorXd::Constant(c.horizon, c.battery.u_max[i])});
  return boxes;
}

inline Eigen::VectorXd project_box(const Eigen::VectorXd& x, const LocalBox& box) {
  return x.cwiseMax(box.lower).cwiseMin(box.upper);
}

inline Eigen::VectorXd project_nonneg(const Eigen::VectorXd& lam) { return lam.cwiseMax(0.0); }

/// Sum over agents, as a length-tau column.
inline Eigen::VectorXd aggregate(const Strategy& u) { return u.colwise().sum().transpose(); }

/// A * sum_j u_j - b; the profile is feasible iff every entry is <= 0.
inline Eigen::VectorXd aggregate_violation(const CouplingConstraint& cc, const Strategy& u) {
  if (u.cols() != cc.A.cols()) throw std::invalid_argument("aggregate_violation: horizon mismatch");
  return cc.A * aggregate(u) - cc.b;
}

struct FeasibilityReport {
  bool strictly_feasible = false;
  std::optional<Strategy> witness;
  double min_max_violation = std::numeric_limits<double>::infinity();
};

struct FeasibilityOptions {
  long max_iters = 100000;
  double strict_threshold = 1e-8;
  bool stop_at_witness = true;  // false keeps descending to report the best max-violation
};

/// Minimizes max_k (A sum u - b)_k over the product of boxes by projected
/// subgradient descent from the box midpoints (Slater check). The witness is
/// the first strictly feasible iterate, so a feasible midpoint is returned as is.
inline FeasibilityReport feasibility_search(const CouplingConstraint& cc, const std::vector<LocalBox>& boxes,
                                            const FeasibilityOptions& opt = {}) {
  const int n = static_cast<int>(boxes.size());
  const int tau = cc.horizon();
  Strategy u(n, tau);
  double diameter = 0.0;
  for (int i = 0; i < n; ++i) {
    u.row(i) = boxes[i].midpoint().transpose();
    diameter = std::max(diameter, (boxes[i].upper - boxes[i].lower).maxCoeff());
  }
  const double step0 = diameter > 0.0 ? 0.5 * diameter : 1.0;

  FeasibilityReport rep;
  for (long k = 0; k < opt.max_iters; ++k) {
    const Eigen::VectorXd viol = aggregate_violation(cc, u);
    Eigen::Index worst = 0;
    const double value = viol.maxCoeff(&worst);
    rep.min_max_violation = std::min(rep.min_max_violation, value);
    if (!rep.witness && value < -opt.strict_threshold) {
      rep.witness = u;
      if (opt.stop_at_witness) break;
    }
    // Every agent shares the same subgradient (row `worst` of A).
    const Eigen::VectorXd g = cc.A.row(worst).transpose();
    const double gnorm = g.norm() * std::sqrt(static_cast<double>(n));
    if (gnorm == 0.0) break;
    const double h = step0 / std::sqrt(static_cast<double>(k) + 1.0);
    for (int i = 0; i < n; ++i)
      u.row(i) = project_box(u.row(i).transpose() - (h / gnorm) * g, boxes[i]).transpose();
  }
  rep.strictly_feasible = rep.min_max_violation < -opt.strict_threshold;
  return rep;
}

}  // namespace sbgame
