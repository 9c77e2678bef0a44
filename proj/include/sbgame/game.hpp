#pragma once

// Quadratic reformulation of the agents' expected costs, the affine
// pseudo-gradient F(u) = Gamma u + Lambda and admissible step sizes.

#include "sbgame/constraints.hpp"
#include "sbgame/model.hpp"
#include "sbgame/preconditioner.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sbgame {

/// J_i = u_i' G u_i + T_i u_i + (sum_j u_j / N)' H u_i + c_i with G = g I and
/// H = h I. Gamma = (2 alpha_dch + k_c) I + k_c (1 1' (x) I) is never formed.
struct GameMatrices {
  double g_scalar = 0.0;  // alpha_dch
  double h_scalar = 0.0;  // N k_c
  double k_c = 0.0;
  int n_agents = 0;
  int horizon = 0;
  Eigen::MatrixXd T;       // N x tau, row i = T_i
  Eigen::VectorXd Lambda;  // stacked T_i', agent-major

  /// Diagonal weight of Gamma: 2 alpha_dch + k_c.
  double own_weight() const { return 2.0 * g_scalar + k_c; }
};

struct MonotonicityConstants {
  double zeta = 0.0;
  double l_f = 0.0;
  double eig_min = 0.0;
  double eig_max = 0.0;
};

struct SolverParams {
  Eigen::VectorXd alpha;  // per-agent step
  double gamma = 0.0;
  double gamma_max = 0.0;
  double alpha_bound = 0.0;  // 2 zeta / l_f^2 (exclusive)
  double eps_u = 1e-6;
  double eps_lambda = 1e-6;
  long max_iters = 100000;
  Variant variant = Variant::consistent;
};

struct CostReport {
  double controllable_cost = 0.0;
  double constant_c = 0.0;
  double total_expected = 0.0;
};

class StepSizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline GameMatrices build_cost(const MicrogridConfig& c) {
  GameMatrices gm;
  gm.n_agents = c.n_agents;
  gm.horizon = c.horizon;
  gm.k_c = c.tariff.k_c;
  gm.g_scalar = c.tariff.alpha_dch;
  gm.h_scalar = c.n_agents * c.tariff.k_c;

  const Eigen::MatrixXd mu = c.demand_mean();
  const Eigen::RowVectorXd mu_total = mu.colwise().sum();
  const Eigen::RowVectorXd k_tou = Eigen::Map<const Eigen::RowVectorXd>(c.tariff.k_tou.data(), c.horizon);
  gm.T.resize(c.n_agents, c.horizon);
  for (int i = 0; i < c.n_agents; ++i)
    gm.T.row(i) = -k_tou - gm.k_c * mu.row(i) - gm.k_c * mu_total +
                  Eigen::RowVectorXd::Constant(c.horizon, c.tariff.beta_dch);
  gm.Lambda.resize(static_cast<Eigen::Index>(c.n_agents) * c.horizon);
  for (int i = 0; i < c.n_agents; ++i) gm.Lambda.segment(i * c.horizon, c.horizon) = gm.T.row(i).transpose();
  return gm;
}

/// Row i: (2 alpha_dch + k_c) u_i + k_c sum_j u_j + T_i.
inline Strategy pseudo_gradient(const GameMatrices& gm, const Strategy& u) {
  if (u.rows() != gm.n_agents || u.cols() != gm.horizon)
    throw std::invalid_argument("pseudo_gradient: strategy shape mismatch");
  const Eigen::RowVectorXd total = u.colwise().sum();
  Strategy f = gm.own_weight() * u + gm.T;
  f.rowwise() += gm.k_c * total;
  return f;
}

/// The two distinct eigenvalues of Gamma: (2 alpha + k_c, 2 alpha + (N+1) k_c).
inline std::pair<double, double> gamma_eigenvalues(const MicrogridConfig& c) {
  const double base = 2.0 * c.tariff.alpha_dch + c.tariff.k_c;
  return {base, base + c.n_agents * c.tariff.k_c};
}

/// Relative slack that makes the Lipschitz bound strict.
inline constexpr double kLipschitzSlack = 1e-6;

inline MonotonicityConstants monotonicity_constants_with_zeta(const MicrogridConfig& c, double zeta) {
  MonotonicityConstants mc;
  std::tie(mc.eig_min, mc.eig_max) = gamma_eigenvalues(c);
  if (!(zeta > 0.0 && zeta <= mc.eig_min))
    throw std::invalid_argument("monotonicity constant zeta must lie in (0, 2 alpha_dch + k_c]");
  mc.zeta = zeta;
  mc.l_f = (1.0 + kLipschitzSlack) * mc.eig_max;
  return mc;
}

inline MonotonicityConstants monotonicity_constants(const MicrogridConfig& c, double zeta_fraction) {
  if (!(zeta_fraction > 0.0 && zeta_fraction <= 1.0))
    throw std::invalid_argument("zeta_fraction must lie in (0, 1]");
  return monotonicity_constants_with_zeta(c, zeta_fraction * gamma_eigenvalues(c).first);
}

/// Uses the pinned zeta when the config carries one, else zeta_fraction.
inline MonotonicityConstants monotonicity_constants(const MicrogridConfig& c) {
  if (c.solver.zeta) return monotonicity_constants_with_zeta(c, *c.solver.zeta);
  return monotonicity_constants(c, c.solver.zeta_fraction);
}

/// Largest singular value of A by power iteration on A'A.
inline double spectral_norm(const Eigen::MatrixXd& A, int max_iters = 20000, double rel_tol = 1e-15) {
  if (A.size() == 0) return 0.0;
  const Eigen::MatrixXd AtA = A.transpose() * A;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(A.cols()).normalized();
  // Break symmetry so a start vector orthogonal to the top eigenvector is unlikely.
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += 1e-3 * static_cast<double>(k + 1) / static_cast<double>(v.size());
  v.normalize();
  double lambda = v.dot(AtA * v);
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = AtA * v;
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    const double next = v.dot(AtA * v);
    if (std::abs(next - lambda) <= rel_tol * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

/// ||1_N' (x) A||_2 = sqrt(N) * sigma_max(A).
inline double coupling_operator_norm(const CouplingConstraint& cc, int n_agents) {
  return std::sqrt(static_cast<double>(n_agents)) * spectral_norm(cc.A);
}

inline bool check_preconditioner(const SolverParams& p, const CouplingConstraint& cc, int n_agents) {
  return check_preconditioner(p.alpha, p.gamma, cc, n_agents);
}

/// Step sizes with alpha_i in (0, 2 zeta / l_f^2) and gamma in (0, gamma_max).
/// alpha_i = alpha_fraction * 2 zeta / l_f^2 unless per-agent overrides are
/// given; gamma = gamma_fraction * gamma_max unless pinned.
inline SolverParams step_sizes(const MicrogridConfig& c, const MonotonicityConstants& mc,
                               const CouplingConstraint& cc, double alpha_fraction, double gamma_fraction,
                               const std::vector<double>& alpha_overrides = {},
                               std::optional<double> gamma_override = std::nullopt) {
  SolverParams p;
  p.alpha_bound = 2.0 * mc.zeta / (mc.l_f * mc.l_f);
  if (!alpha_overrides.empty()) {
    if (static_cast<int>(alpha_overrides.size()) != c.n_agents)
      throw StepSizeError("step_sizes: one alpha per agent required");
    p.alpha = Eigen::Map<const Eigen::VectorXd>(alpha_overrides.data(), c.n_agents);
  } else {
    if (!(alpha_fraction > 0.0 && alpha_fraction < 1.0))
      throw StepSizeError("step_sizes: alpha_fraction must lie in (0, 1)");
    p.alpha = Eigen::VectorXd::Constant(c.n_agents, alpha_fraction * p.alpha_bound);
  }
  for (Eigen::Index i = 0; i < p.alpha.size(); ++i)
    if (!(p.alpha(i) > 0.0 && p.alpha(i) < p.alpha_bound))
      throw StepSizeError("step_sizes: alpha[" + std::to_string(i) + "] = " + std::to_string(p.alpha(i)) +
                          " outside (0, 2 zeta / l_f^2)");

  const double op_norm = coupling_operator_norm(cc, c.n_agents);
  const double alpha_max = p.alpha.maxCoeff();
  p.gamma_max = (1.0 / alpha_max - 1.0 / p.alpha_bound) / (op_norm * op_norm);
  if (!(p.gamma_max > 0.0)) throw StepSizeError("step_sizes: gamma_max <= 0");

  if (gamma_override) {
    p.gamma = *gamma_override;
  } else {
    if (!(gamma_fraction > 0.0 && gamma_fraction < 1.0))
      throw StepSizeError("step_sizes: gamma_fraction must lie in (0, 1)");
    p.gamma = gamma_fraction * p.gamma_max;
  }
  if (!(p.gamma > 0.0 && p.gamma < p.gamma_max))
    throw StepSizeError("step_sizes: gamma = " + std::to_string(p.gamma) + " outside (0, gamma_max = " +
                        std::to_string(p.gamma_max) + ")");
  if (!check_preconditioner(p, cc, c.n_agents))
    throw StepSizeError("step_sizes: preconditioning matrix is not positive definite");

  p.eps_u = c.solver.eps_u;
  p.eps_lambda = c.solver.eps_lambda;
  p.max_iters = c.solver.max_iters;
  p.variant = c.solver.variant;
  return p;
}

/// Step sizes from the config's solver section.
inline SolverParams step_sizes(const MicrogridConfig& c, const MonotonicityConstants& mc,
                               const CouplingConstraint& cc) {
  return step_sizes(c, mc, cc, c.solver.alpha_fraction, c.solver.gamma_fraction, c.solver.alpha, c.solver.gamma);
}

/// Per-agent expected cost. Demands are taken independent with uniform
/// marginals, so E{d_i d_j} = mu_i mu_j (i != j) and E{d_i^2} = mu_i^2 + w_i^2 / 12.
inline std::vector<CostReport> expected_cost(const MicrogridConfig& c, const Strategy& u) {
  const int N = c.n_agents, tau = c.horizon;
  if (u.rows() != N || u.cols() != tau) throw std::invalid_argument("expected_cost: strategy shape mismatch");
  const GameMatrices gm = build_cost(c);
  const double kc = c.tariff.k_c, a = c.tariff.alpha_dch, be = c.tariff.beta_dch;
  const Eigen::MatrixXd mu = c.demand_mean();
  const Eigen::VectorXd mu_total = mu.colwise().sum().transpose();
  const Eigen::VectorXd u_total = aggregate(u);

  Eigen::VectorXd degradation = Eigen::VectorXd::Zero(tau);  // sum_j alpha u_j^2 + beta u_j
  for (int j = 0; j < N; ++j)
    for (int t = 0; t < tau; ++t) degradation(t) += a * u(j, t) * u(j, t) + be * u(j, t);

  std::vector<CostReport> out(N);
  for (int i = 0; i < N; ++i) {
    double total = 0.0, constant = 0.0;
    for (int t = 0; t < tau; ++t) {
      const double w = c.demand[i][t].width();
      const double e_dd = mu(i, t) * mu_total(t) + w * w / 12.0;  // E{d_i sum_j d_j}
      const double k = c.tariff.k_tou[t];
      // E{(K + k_c (D - S)) (d_i - u_i)} with D = sum_j d_j, S = sum_j u_j.
      total += k * (mu(i, t) - u(i, t)) +
               kc * (e_dd - mu_total(t) * u(i, t) - u_total(t) * mu(i, t) + u_total(t) * u(i, t)) + degradation(t);
      const double others = u_total(t) - u(i, t);
      const double others_sq = [&] {
        double s = 0.0;
        for (int j = 0; j < N; ++j)
          if (j != i) s += u(j, t) * u(j, t);
        return s;
      }();
      constant += mu(i, t) * k + kc * e_dd + a * others_sq + (-kc * mu(i, t) + be) * others;
    }
    const Eigen::VectorXd ui = u.row(i).transpose();
    const double controllable = gm.g_scalar * ui.squaredNorm() + gm.T.row(i).dot(ui) +
                                (gm.h_scalar / N) * u_total.dot(ui);
    out[i] = {controllable, constant, total};
  }
  return out;
}

}  // namespace sbgame
