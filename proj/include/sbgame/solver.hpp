#pragma once

// Preconditioned forward-backward iterations for the variational GNE:
// a semi-decentralized scheme (agents + coordinator) and the stacked
// centralized map.

#include "sbgame/constraints.hpp"
#include "sbgame/game.hpp"
#include "sbgame/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <vector>

namespace sbgame {

struct IterateState {
  Strategy u;
  Eigen::VectorXd lam;
  long k = 0;
  Strategy prev_u;
  Eigen::VectorXd prev_lam;
};

struct IterationLogRow {
  long k = 0;
  double residual_u = 0.0;
  double residual_lam = 0.0;
  double feasibility_max = 0.0;
  double objective_total = 0.0;
};

struct GNEResult {
  Strategy u_star;
  Eigen::VectorXd lam_star;
  long iterations = 0;
  std::vector<double> residual_u;
  std::vector<double> residual_lam;
  bool converged = false;
  double fixed_point_residual = 0.0;
  double feasibility_max = 0.0;
  std::vector<IterationLogRow> log;
};

struct SolveOptions {
  std::optional<Strategy> u0;            // default: box midpoints
  std::optional<Eigen::VectorXd> lam0;   // default: zero
  long log_stride = 100;
  double feasibility_tol = 1e-6;
};

/// Sum of the u-dependent cost terms over all agents.
inline double controllable_objective(const GameMatrices& gm, const Strategy& u) {
  const Eigen::RowVectorXd total = u.colwise().sum();
  return gm.g_scalar * u.squaredNorm() + (gm.T.array() * u.array()).sum() + gm.k_c * total.squaredNorm();
}

/// One forward-backward round per call to step(). The agent update and the
/// coordinator update share this class so that both algorithms can be
/// compared iterate by iterate.
class ForwardBackward {
 public:
  ForwardBackward(const GameMatrices& gm, const CouplingConstraint& cc, std::vector<LocalBox> boxes,
                  const SolverParams& params, Algorithm algorithm, const SolveOptions& opt = {})
      : gm_(gm), cc_(cc), boxes_(std::move(boxes)), p_(params), algorithm_(algorithm) {
    const int N = gm.n_agents, tau = gm.horizon;
    if (static_cast<int>(boxes_.size()) != N || cc.horizon() != tau || p_.alpha.size() != N)
      throw std::invalid_argument("ForwardBackward: dimension mismatch");
    if (!(p_.gamma > 0.0) || !(p_.alpha.minCoeff() > 0.0))
      throw std::invalid_argument("ForwardBackward: step sizes must be positive");
    if (opt.u0) {
      if (opt.u0->rows() != N || opt.u0->cols() != tau) throw std::invalid_argument("ForwardBackward: u0 shape");
      s_.u = *opt.u0;
      for (int i = 0; i < N; ++i) s_.u.row(i) = project_box(s_.u.row(i).transpose(), boxes_[i]).transpose();
    } else {
      s_.u.resize(N, tau);
      for (int i = 0; i < N; ++i) s_.u.row(i) = boxes_[i].midpoint().transpose();
    }
    if (opt.lam0) {
      if (opt.lam0->size() != cc.rows()) throw std::invalid_argument("ForwardBackward: lambda0 size");
      s_.lam = project_nonneg(*opt.lam0);
    } else {
      s_.lam = Eigen::VectorXd::Zero(cc.rows());
    }
    s_.prev_u = s_.u;
    s_.prev_lam = s_.lam;
  }

  const IterateState& state() const { return s_; }

  void step() {
    const int N = gm_.n_agents;
    const Eigen::VectorXd agg_old = aggregate(s_.u);
    const Eigen::RowVectorXd at_lam = (cc_.A.transpose() * s_.lam).transpose();
    Strategy next(s_.u.rows(), s_.u.cols());
    if (algorithm_ == Algorithm::central) {
      const Strategy f = pseudo_gradient(gm_, s_.u);
      for (int i = 0; i < N; ++i) {
        const Eigen::RowVectorXd pre = s_.u.row(i) - p_.alpha(i) * (f.row(i) + at_lam);
        next.row(i) = project_box(pre.transpose(), boxes_[i]).transpose();
      }
    } else {
      // Each agent sees only lambda^k and the broadcast aggregate.
      const double self = gm_.g_scalar + gm_.h_scalar / N;
      for (int i = 0; i < N; ++i) {
        const double a = p_.alpha(i);
        Eigen::RowVectorXd pre = (1.0 - 2.0 * a * self) * s_.u.row(i) - a * at_lam - a * gm_.T.row(i);
        if (p_.variant == Variant::consistent)
          pre -= a * gm_.k_c * (agg_old.transpose() - s_.u.row(i));
        next.row(i) = project_box(pre.transpose(), boxes_[i]).transpose();
      }
    }
    const Eigen::VectorXd agg_new = aggregate(next);
    const Eigen::VectorXd lam_next =
        project_nonneg(s_.lam + p_.gamma * (cc_.A * (2.0 * agg_new - agg_old) - cc_.b));
    s_.prev_u = std::move(s_.u);
    s_.prev_lam = std::move(s_.lam);
    s_.u = std::move(next);
    s_.lam = lam_next;
    ++s_.k;
  }

  double residual_u() const { return (s_.u - s_.prev_u).cwiseAbs().maxCoeff(); }
  double residual_lam() const {
    return s_.lam.size() ? (s_.lam - s_.prev_lam).cwiseAbs().maxCoeff() : 0.0;
  }
  double feasibility() const { return aggregate_violation(cc_, s_.u).maxCoeff(); }

 private:
  const GameMatrices& gm_;
  const CouplingConstraint& cc_;
  std::vector<LocalBox> boxes_;
  SolverParams p_;
  Algorithm algorithm_;
  IterateState s_;
};

/// max of the primal and dual fixed-point defects of the forward-backward map.
inline double fixed_point_residual(const MicrogridConfig& c, const GameMatrices& gm, const CouplingConstraint& cc,
                                   const SolverParams& params, const Strategy& u, const Eigen::VectorXd& lam) {
  const auto boxes = local_boxes(c);
  const Strategy f = pseudo_gradient(gm, u);
  const Eigen::RowVectorXd at_lam = (cc.A.transpose() * lam).transpose();
  double r = 0.0;
  for (int i = 0; i < c.n_agents; ++i) {
    const Eigen::VectorXd pre = (u.row(i) - params.alpha(i) * (f.row(i) + at_lam)).transpose();
    r = std::max(r, (u.row(i).transpose() - project_box(pre, boxes[i])).cwiseAbs().maxCoeff());
  }
  if (lam.size()) {
    const Eigen::VectorXd dual = project_nonneg(lam + params.gamma * (cc.A * aggregate(u) - cc.b));
    r = std::max(r, (lam - dual).cwiseAbs().maxCoeff());
  }
  return r;
}

namespace detail {

inline GNEResult run_solver(const MicrogridConfig& c, const GameMatrices& gm, const CouplingConstraint& cc,
                            const SolverParams& params, Algorithm algorithm, const SolveOptions& opt) {
  ForwardBackward fb(gm, cc, local_boxes(c), params, algorithm, opt);
  GNEResult res;
  const long stride = std::max(1L, opt.log_stride);
  res.residual_u.reserve(static_cast<std::size_t>(std::min(params.max_iters, 200000L)));
  res.residual_lam.reserve(res.residual_u.capacity());
  for (long k = 0; k < params.max_iters; ++k) {
    fb.step();
    const double ru = fb.residual_u(), rl = fb.residual_lam();
    res.residual_u.push_back(ru);
    res.residual_lam.push_back(rl);
    const bool small = ru <= params.eps_u && rl <= params.eps_lambda;
    double feas = 0.0;
    const bool log_now = (fb.state().k % stride) == 0 || k == 0;
    if (small || log_now) feas = fb.feasibility();
    if (log_now)
      res.log.push_back({fb.state().k, ru, rl, feas, controllable_objective(gm, fb.state().u)});
    if (small && feas <= opt.feasibility_tol) {
      res.converged = true;
      if (!log_now) res.log.push_back({fb.state().k, ru, rl, feas, controllable_objective(gm, fb.state().u)});
      break;
    }
  }
  const auto& s = fb.state();
  res.u_star = s.u;
  res.lam_star = s.lam;
  res.iterations = s.k;
  res.feasibility_max = fb.feasibility();
  res.fixed_point_residual = fixed_point_residual(c, gm, cc, params, s.u, s.lam);
  return res;
}

inline void check_steps(const SolverParams& p, int n_agents) {
  if (p.alpha.size() != n_agents) throw StepSizeError("solver: one alpha per agent required");
  for (Eigen::Index i = 0; i < p.alpha.size(); ++i)
    if (!(p.alpha(i) > 0.0) || (p.alpha_bound > 0.0 && !(p.alpha(i) < p.alpha_bound)))
      throw StepSizeError("solver: alpha outside (0, 2 zeta / l_f^2)");
  if (!(p.gamma > 0.0) || (p.gamma_max > 0.0 && !(p.gamma < p.gamma_max)))
    throw StepSizeError("solver: gamma outside (0, gamma_max)");
}

}  // namespace detail

inline GNEResult solve_semidecentralized(const MicrogridConfig& c, const GameMatrices& gm,
                                         const CouplingConstraint& cc, const SolverParams& params,
                                         const SolveOptions& opt = {}) {
  detail::check_steps(params, c.n_agents);
  return detail::run_solver(c, gm, cc, params, Algorithm::semi, opt);
}

inline GNEResult solve_centralized(const MicrogridConfig& c, const GameMatrices& gm, const CouplingConstraint& cc,
                                   const SolverParams& params, const SolveOptions& opt = {}) {
  detail::check_steps(params, c.n_agents);
  return detail::run_solver(c, gm, cc, params, Algorithm::central, opt);
}

inline GNEResult solve(const MicrogridConfig& c, const GameMatrices& gm, const CouplingConstraint& cc,
                       const SolverParams& params, Algorithm algorithm, const SolveOptions& opt = {}) {
  return algorithm == Algorithm::central ? solve_centralized(c, gm, cc, params, opt)
                                         : solve_semidecentralized(c, gm, cc, params, opt);
}

}  // namespace sbgame
