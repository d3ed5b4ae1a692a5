#include "evcoord/thermal.hpp"

#include <cmath>
#include <string>

#include "evcoord/errors.hpp"

namespace evcoord {

namespace {

// Lower-triangular Toeplitz matrix with first column scale·[1, ϱ, ϱ², ...].
Eigen::MatrixXd decaying_toeplitz(double decay, double scale, int horizon) {
  Eigen::VectorXd column(horizon);
  double power = 1.0;
  for (int i = 0; i < horizon; ++i) {
    column(i) = scale * power;
    power *= decay;
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(horizon, horizon);
  for (int j = 0; j < horizon; ++j) m.col(j).tail(horizon - j) = column.head(horizon - j);
  return m;
}

void check_dims(const ThermalResponse& resp, const DisturbanceSeries& dist) {
  const auto t = resp.horizon();
  if (dist.ambient.size() != t || dist.current.size() != t) {
    throw ContractError("disturbance series length " + std::to_string(dist.ambient.size()) +
                        " does not match horizon " + std::to_string(t));
  }
}

}  // namespace

ThermalResponse linearize(const ThermalParams& params, int horizon) {
  if (horizon <= 0) throw ContractError("thermal horizon must be positive");
  if (!(params.heat_capacity > 0.0) || !(params.heat_resistance > 0.0) ||
      !(params.coil_resistance > 0.0) || !(params.step_hours > 0.0)) {
    throw ThermalParamError("thermal constants must be positive");
  }
  const double dt = params.step_seconds();
  ThermalResponse r;
  r.ambient_gain = dt / (params.heat_resistance * params.heat_capacity);
  r.decay = 1.0 - r.ambient_gain;
  if (!(r.decay > 0.0 && r.decay < 1.0)) {
    throw ThermalParamError("unstable discretization: decay factor " + std::to_string(r.decay) +
                            " outside (0,1)");
  }
  if (!(params.theta_eq > params.ambient_eq)) {
    throw ThermalParamError("equilibrium temperature must exceed equilibrium ambient");
  }
  r.heating = dt * params.coil_resistance / params.heat_capacity;
  r.eq_current = std::sqrt(r.ambient_gain * (params.theta_eq - params.ambient_eq) / r.heating);
  r.current_gain = 2.0 * r.heating * r.eq_current;
  r.offset = (1.0 - r.decay) * params.theta_eq - r.current_gain * r.eq_current -
             r.ambient_gain * params.ambient_eq;

  r.decay_powers.resize(horizon);
  r.geometric.resize(horizon);
  double power = 1.0;
  double partial = 0.0;
  for (int t = 0; t < horizon; ++t) {
    partial += power;
    power *= r.decay;
    r.decay_powers(t) = power;
    r.geometric(t) = partial;
  }
  r.current_map = decaying_toeplitz(r.decay, r.current_gain, horizon);
  r.ambient_map = decaying_toeplitz(r.decay, r.ambient_gain, horizon);
  return r;
}

Eigen::VectorXd temperature_profile(const ThermalResponse& resp, const DisturbanceSeries& dist,
                                    double theta0, const Eigen::VectorXd& current) {
  check_dims(resp, dist);
  if (current.size() != resp.horizon()) throw ContractError("current profile length mismatch");
  return resp.decay_powers * theta0 + resp.current_map * current + resp.ambient_map * dist.ambient +
         resp.offset * resp.geometric;
}

ThermalHeadroom thermal_headroom(const ThermalResponse& resp, const DisturbanceSeries& dist,
                                 double theta0, double theta_max, double rms_voltage,
                                 double watts_per_kw) {
  check_dims(resp, dist);
  if (!(rms_voltage > 0.0) || !(watts_per_kw > 0.0)) throw ThermalParamError("bad unit conversion");
  const Eigen::VectorXd margin =
      Eigen::VectorXd::Constant(resp.horizon(), theta_max) - temperature_profile(resp, dist, theta0, dist.current);
  ThermalHeadroom out;
  out.headroom = margin * (rms_voltage / watts_per_kw);
  out.infeasible_baseline = (out.headroom.array() < 0.0).any();
  return out;
}

}  // namespace evcoord
