#pragma once

#include <Eigen/Dense>

#include "evcoord/coupling.hpp"
#include "evcoord/fleet.hpp"

namespace evcoord {

/// How the proximal term of the agent subproblem is evaluated.
///
/// `as_printed` keeps the 1/ρ factors inside the norm and ρ/(4|𝒩ₙ|) outside;
/// `expanded` uses the equivalent 1/(4ρ|𝒩ₙ|)‖ξu - w/N - ν + ρΣ(λₙ+λₘ)‖² form.
enum class ProximalScaling { as_printed, expanded };

/// One agent's primal subproblem
///
///   min  κ‖x‖² + linearᵀx + weight·‖Γₙx + s - target‖²
///   s.t. x ∈ Ψₙ, s ≥ 0.
struct LocalQp {
  const BatteryPolytope* polytope = nullptr;
  const CouplingSystem* coupling = nullptr;
  int agent = 0;
  double kappa = 0.0;
  Eigen::VectorXd linear;  // Δ·η
  Eigen::VectorXd target;  // length = coupling rows
  double weight = 0.0;
};

/// Builds the u-update subproblem of agent n from its consensus dual ν, the
/// sum Σₘ(λₙ + λₘ) over its neighbours and the penalty ρ.
LocalQp make_local_qp(const BatteryPolytope& polytope, const CouplingSystem& coupling, int agent,
                      const EvSpec& spec, const Eigen::VectorXd& price, double step_hours,
                      const Eigen::VectorXd& nu, const Eigen::VectorXd& neighbor_sum, double rho,
                      int degree, ProximalScaling scaling = ProximalScaling::as_printed);

struct LocalSolution {
  Eigen::VectorXd x;  // T
  Eigen::VectorXd s;  // coupling rows
  double objective = 0.0;
  double stationarity = 0.0;
  int outer_iterations = 0;
};

struct LocalSolveOptions {
  double tol = 1e-8;
  int max_outer_iterations = 60;
};

/// Objective value of (x, s); +inf outside the feasible region is not checked.
double local_objective(const LocalQp& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& s);

/// Exact minimizer. The slack block is eliminated in closed form,
/// s = max(0, target - Γx), which leaves a piecewise-quadratic problem in x;
/// that is solved by a generalized Newton iteration whose steps are
/// QPs over Ψₙ, with an exact line search between them.
///
/// Throws SolverFailure (carrying the best x) when the iteration cap is hit.
LocalSolution solve(const LocalQp& qp, const Eigen::VectorXd* warm_start = nullptr,
                    const LocalSolveOptions& options = {});

}  // namespace evcoord
