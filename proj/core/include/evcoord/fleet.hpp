#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evcoord/feeder.hpp"
#include "evcoord/linalg.hpp"

namespace evcoord {

/// Battery and availability parameters of one EV.
///
/// Time steps are 1-based; the EV can charge or discharge on steps t with
/// arrival < t ≤ departure.
struct EvSpec {
  std::string id;
  SupplyPoint supply_point;
  int arrival = 0;
  int departure = 0;
  double capacity_kwh = 0.0;
  double soc0 = 0.0;
  double soc_target = 0.0;
  double soc_min = 0.0;
  double soc_max = 1.0;
  double efficiency = 1.0;
  double x_min_kw = 0.0;  // ≤ 0, discharge limit
  double x_max_kw = 0.0;  // ≥ 0, charge limit
  double kappa = 0.0;     // degradation weight, $/kW²

  bool available(int step) const noexcept { return arrival < step && step <= departure; }
  /// eₙ = (σ* - σ̂) c, kWh.
  double energy_demand() const noexcept { return (soc_target - soc0) * capacity_kwh; }
  /// Required Σₜ x(t) so that the SoC ends exactly at the target.
  double required_sum(double step_hours) const noexcept {
    return energy_demand() / (efficiency * step_hours);
  }
};

/// Checks the parameter invariants. Throws InfeasibleSpec naming the broken one.
void validate(const EvSpec& spec, int horizon);

/// Ψₙ = {x | A_ineq x ≥ b_ineq, A_eq x = b_eq} plus a reduced form over the
/// available steps only, which is what the solvers consume.
struct BatteryPolytope {
  Eigen::MatrixXd a_ineq;        // 4T×T: [I; -I; Tmat; -Tmat]
  Eigen::VectorXd b_ineq;
  Eigen::MatrixXd a_eq;          // (T+1)×T: [1ᵀ; I - L]
  Eigen::VectorXd b_eq;
  Eigen::VectorXd availability;  // diagonal of L

  std::vector<int> free_steps;   // 0-based indices with L(t,t) = 1
  SparseRows free_ineq;          // rows over the free steps; redundant rows dropped
  Eigen::VectorXd free_ineq_rhs;
  SparseRows free_eq;
  Eigen::VectorXd free_eq_rhs;

  Eigen::VectorXd feasible_point;  // some x ∈ Ψₙ, full length T

  int horizon() const noexcept { return static_cast<int>(availability.size()); }
  int num_free() const noexcept { return static_cast<int>(free_steps.size()); }

  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
  Eigen::VectorXd restrict(const Eigen::VectorXd& x) const;
  Eigen::VectorXd expand(const Eigen::VectorXd& x_free) const;
};

/// Builds Ψₙ and proves it nonempty. Throws InfeasibleSpec otherwise.
BatteryPolytope build_polytope(const EvSpec& spec, int horizon, double step_hours);

/// σ(t) = σ̂ + (μΔ/c) Σ_{τ≤t} x(τ), t = 1..T.
Eigen::VectorXd soc_profile(const EvSpec& spec, double step_hours, const Eigen::VectorXd& x);

/// Ωₙ(x) = Σₜ Δ η(t) x(t) + κ x(t)².
double operational_cost(const EvSpec& spec, const Eigen::VectorXd& price, double step_hours,
                        const Eigen::VectorXd& x);
Eigen::VectorXd operational_cost_gradient(const EvSpec& spec, const Eigen::VectorXd& price,
                                          double step_hours, const Eigen::VectorXd& x);

}  // namespace evcoord
