#pragma once

#include <Eigen/Dense>

namespace evcoord {

/// Feeder-head transformer modelled as one thermal mass.
struct ThermalParams {
  double heat_capacity = 0.0;      // C, J/K
  double heat_resistance = 0.0;    // R, K/W
  double coil_resistance = 0.0;    // R_c, ohm
  double step_hours = 0.5;         // Δ, hours
  double theta_eq = 0.0;           // θ*, K
  double ambient_eq = 0.0;         // θ_a*, K
  double theta_max = 0.0;          // absolute core temperature bound, K
  double theta0 = 0.0;             // temperature at the start of the horizon, K
  double rms_voltage = 240.0;      // v', V
  double watts_per_kw = 1000.0;    // power unit of the charge profiles

  double step_seconds() const noexcept { return step_hours * 3600.0; }
  /// Amperes drawn per kW of EV charging.
  double amps_per_kw() const noexcept { return watts_per_kw / rms_voltage; }
};

/// Coefficients of the linearized dynamics
///   θ(t) = ϱ θ(t-1) + ϱ̃ i(t) + ϱ̄ θ_a(t) + β
/// and their horizon-stacked form θ = ϱ_vec θ₀ + Ξ i + ϱ̄_mat θ_a + β geo.
///
/// Index t of i and θ_a is the value during step t; θ(t) is the temperature at
/// the end of that step.
struct ThermalResponse {
  double decay = 0.0;          // ϱ = 1 - Δ/(RC)
  double heating = 0.0;        // ϱ̂ = Δ R_c / C
  double ambient_gain = 0.0;   // ϱ̄ = Δ/(RC)
  double eq_current = 0.0;     // i*
  double current_gain = 0.0;   // ϱ̃ = 2 ϱ̂ i*
  double offset = 0.0;         // β

  Eigen::VectorXd decay_powers;   // [ϱ, ϱ², ..., ϱᵀ]
  Eigen::MatrixXd current_map;    // Ξ
  Eigen::MatrixXd ambient_map;    // ϱ̄_mat
  Eigen::VectorXd geometric;      // [1, 1+ϱ, ..., Σ_{i<T} ϱ^i]

  int horizon() const noexcept { return static_cast<int>(decay_powers.size()); }
};

/// Exogenous inputs: ambient temperature (K) and non-EV current (A) per step.
struct DisturbanceSeries {
  Eigen::VectorXd ambient;
  Eigen::VectorXd current;
};

/// Builds the linearized response over `horizon` steps.
/// Throws ThermalParamError when ϱ ∉ (0,1) or θ* ≤ θ_a*.
ThermalResponse linearize(const ThermalParams& params, int horizon);

/// Core temperature trajectory θ(1..T) for a total current profile i (A).
Eigen::VectorXd temperature_profile(const ThermalResponse& resp, const DisturbanceSeries& dist,
                                    double theta0, const Eigen::VectorXd& current);

/// Thermal headroom 𝔍, in kW, such that θ ≤ θ_max ⇔ Ξ Σₙ xₙ ≤ 𝔍.
struct ThermalHeadroom {
  Eigen::VectorXd headroom;
  /// True when some entry is negative: the limit is already broken with no
  /// EV load at all.
  bool infeasible_baseline = false;
};

ThermalHeadroom thermal_headroom(const ThermalResponse& resp, const DisturbanceSeries& dist,
                                 double theta0, double theta_max, double rms_voltage,
                                 double watts_per_kw = 1000.0);

inline ThermalHeadroom thermal_headroom(const ThermalResponse& resp, const DisturbanceSeries& dist,
                                        const ThermalParams& params) {
  return thermal_headroom(resp, dist, params.theta0, params.theta_max, params.rms_voltage,
                          params.watts_per_kw);
}

}  // namespace evcoord
