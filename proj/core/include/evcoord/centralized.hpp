#pragma once

#include <vector>

#include <Eigen/Dense>

#include "evcoord/coupling.hpp"
#include "evcoord/fleet.hpp"

namespace evcoord {

enum class CentralMethod {
  operator_splitting,  // ADMM on the stacked QP, then active-set polishing
  active_set,          // Goldfarb–Idnani on the stacked QP; needs every κ > 0
};

struct CentralOptions {
  CentralMethod method = CentralMethod::operator_splitting;
  double tol = 1e-9;
  int max_iterations = 100000;
  bool polish = true;
};

struct CentralSolution {
  Eigen::MatrixXd x;  // N×T, kW
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;  // ‖constraint violation‖∞, unscaled
  double dual_residual = 0.0;    // ‖∇L‖∞, unscaled
  bool polished = false;
};

/// min Σₙ Ωₙ(xₙ)  s.t.  xₙ ∈ Ψₙ,  Σₙ Γₙxₙ ≤ w, solved as one QP.
/// Throws ScenarioInfeasible (listing coupling rows when it can tell) when
/// no schedule satisfies everything, SolverFailure on the iteration cap.
CentralSolution solve_centralized(const std::vector<EvSpec>& fleet, const std::vector<BatteryPolytope>& polytopes,
                                  const CouplingSystem& coupling, const Eigen::VectorXd& price,
                                  double step_hours, const CentralOptions& options = {});

}  // namespace evcoord
