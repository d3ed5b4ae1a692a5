#pragma once

#include <vector>

#include <Eigen/Dense>

#include "evcoord/linalg.hpp"

namespace evcoord {

/// min ½ xᵀHx + gᵀx  s.t.  E x = e,  A x ≥ b,  with H positive definite.
struct QpProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd linear;
  SparseRows eq;
  Eigen::VectorXd eq_rhs;
  SparseRows ineq;
  Eigen::VectorXd ineq_rhs;
};

struct QpOptions {
  /// Largest accepted violation, measured as distance to the constraint
  /// hyperplane relative to 1 + ‖x‖∞.
  double feasibility_tol = 1e-12;
  /// 0 selects 20·(n + m) + 100.
  int max_iterations = 0;
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;  // ≥ 0, zero for inactive rows
  std::vector<int> active_ineq;
  double objective = 0.0;
  int iterations = 0;
};

/// Goldfarb–Idnani dual active-set method. Exact up to rounding; starts from
/// the unconstrained minimizer, so no feasible initial point is needed.
/// Throws ScenarioInfeasible if the constraints are inconsistent and
/// SolverFailure when the iteration cap is hit.
QpResult solve_qp(const QpProblem& problem, const QpOptions& options = {});

}  // namespace evcoord
