#pragma once

#include "sbgame/constraints.hpp"

#include <Eigen/Dense>

namespace sbgame {

/// Smallest eigenvalue of the Schur complement
///   gamma^{-1} I - (1^T (x) A) diag(alpha) (1^T (x) A)^T = gamma^{-1} I - (sum alpha_i) A A^T
/// of the preconditioning matrix [[diag(alpha)^{-1}, -(1^T (x) A)^T], [-(1^T (x) A), gamma^{-1} I]].
inline double preconditioner_schur_min_eigenvalue(const Eigen::VectorXd& alpha, double gamma,
                                                  const CouplingConstraint& cc) {
  const int m = cc.rows();
  const Eigen::MatrixXd schur =
      Eigen::MatrixXd::Identity(m, m) / gamma - alpha.sum() * (cc.A * cc.A.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(schur, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// True iff the preconditioning matrix is positive definite. The alpha vector
/// holds one step per agent, so n_agents must equal alpha.size().
inline bool check_preconditioner(const Eigen::VectorXd& alpha, double gamma, const CouplingConstraint& cc,
                                 int n_agents) {
  if (alpha.size() != n_agents || n_agents < 1) return false;
  if (!(gamma > 0.0) || !(alpha.minCoeff() > 0.0)) return false;
  return preconditioner_schur_min_eigenvalue(alpha, gamma, cc) > 0.0;
}

}  // namespace sbgame
