#include <doctest.h>

#include <cmath>
#include <random>

#include "evcoord/errors.hpp"
#include "evcoord/thermal.hpp"
#include "support.hpp"

using namespace evcoord;

namespace {

// ϱ̄ = 0.5, ϱ̂ = 0.1, θ* - θa* = 20, so ϱ̃ = 2√(ϱ̂ϱ̄·20) = 2.
ThermalParams half_decay() {
  ThermalParams p;
  p.heat_capacity = 3600.0;
  p.heat_resistance = 2.0;
  p.coil_resistance = 0.1;
  p.step_hours = 1.0;
  p.theta_eq = 320.0;
  p.ambient_eq = 300.0;
  p.theta_max = 330.0;
  p.theta0 = 320.0;
  return p;
}

ThermalParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ThermalParams p;
  p.heat_capacity = 1e5 + 1e6 * u(rng);
  p.step_hours = 0.25 + 0.75 * u(rng);
  const double target_decay = 0.1 + 0.89 * u(rng);
  p.heat_resistance = p.step_seconds() / ((1.0 - target_decay) * p.heat_capacity);
  p.coil_resistance = 0.001 + 0.05 * u(rng);
  p.ambient_eq = 280.0 + 20.0 * u(rng);
  p.theta_eq = p.ambient_eq + 10.0 + 80.0 * u(rng);
  p.theta_max = p.theta_eq + 30.0;
  p.theta0 = p.ambient_eq + 60.0 * u(rng);
  return p;
}

// θ(t) = ϱθ(t-1) + ϱ̃i(t) + ϱ̄θa(t) + β, evaluated step by step from the raw constants.
Eigen::VectorXd recurse(const ThermalParams& p, double theta0, const Eigen::VectorXd& i, const Eigen::VectorXd& ta) {
  const double dt = p.step_seconds();
  const double gain = dt / (p.heat_resistance * p.heat_capacity);
  const double decay = 1.0 - gain;
  const double heat = dt * p.coil_resistance / p.heat_capacity;
  const double istar = std::sqrt(gain * (p.theta_eq - p.ambient_eq) / heat);
  const double cur = 2.0 * heat * istar;
  const double beta = gain * p.theta_eq - cur * istar - gain * p.ambient_eq;
  Eigen::VectorXd out(i.size());
  double theta = theta0;
  for (int t = 0; t < i.size(); ++t) {
    theta = decay * theta + cur * i(t) + gain * ta(t) + beta;
    out(t) = theta;
  }
  return out;
}

}  // namespace

TEST_CASE("Toeplitz current map for decay 0.5 and gain 2") {
  const auto r = linearize(half_decay(), 3);
  CHECK(r.decay == doctest::Approx(0.5));
  CHECK(r.current_gain == doctest::Approx(2.0));
  Eigen::Matrix3d expected;
  expected << 2, 0, 0, 1, 2, 0, 0.5, 1, 2;
  CHECK((r.current_map - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.decay_powers(2) == doctest::Approx(0.125));
  CHECK(r.geometric(2) == doctest::Approx(1.75));
}

TEST_CASE("equilibrium inputs hold the equilibrium temperature") {
  const auto p = half_decay();
  const auto r = linearize(p, 6);
  DisturbanceSeries d{Eigen::VectorXd::Constant(6, p.ambient_eq), Eigen::VectorXd::Constant(6, r.eq_current)};
  const auto theta = temperature_profile(r, d, p.theta_eq, d.current);
  CHECK((theta.array() - p.theta_eq).abs().maxCoeff() < 1e-9);
  // Less current means a cooler trajectory.
  const auto cooler = temperature_profile(r, d, p.theta_eq, Eigen::VectorXd::Zero(6));
  CHECK((cooler.array() < theta.array()).all());
}

TEST_CASE("stacked form equals the recursion") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_params(rng);
    const int T = trial % 2 == 0 ? 8 : 6;
    const auto r = linearize(p, T);
    DisturbanceSeries d{testing::uniform_vector(rng, T, 270.0, 310.0), testing::uniform_vector(rng, T, 0.0, 500.0)};
    const auto stacked = temperature_profile(r, d, p.theta0, d.current);
    const auto direct = recurse(p, p.theta0, d.current, d.ambient);
    CHECK(((stacked - direct).array() / direct.array()).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("thermal headroom") {
  std::mt19937_64 rng(11);
  auto p = random_params(rng);
  const int T = 4;
  const auto r = linearize(p, T);
  DisturbanceSeries d{testing::uniform_vector(rng, T, 280.0, 300.0), testing::uniform_vector(rng, T, 0.0, 200.0)};

  SUBCASE("matches the margin of the baseline recursion") {
    const auto h = thermal_headroom(r, d, p.theta0, p.theta_max, 240.0);
    const auto base = recurse(p, p.theta0, d.current, d.ambient);
    for (int t = 0; t < T; ++t) CHECK(h.headroom(t) == doctest::Approx((p.theta_max - base(t)) * 0.24));
    // θ ≤ θmax ⇔ Ξ i_ev ≤ 𝔍 with i_ev in amps per kW.
    Eigen::VectorXd x = Eigen::VectorXd::Constant(T, 1.0);
    const Eigen::VectorXd lhs = r.current_map * x;
    const auto loaded = recurse(p, p.theta0, d.current + x * (1000.0 / 240.0), d.ambient);
    for (int t = 0; t < T; ++t) CHECK((p.theta_max - loaded(t)) == doctest::Approx((h.headroom(t) - lhs(t)) / 0.24));
  }
  SUBCASE("doubling the rms voltage doubles the headroom") {
    const auto h1 = thermal_headroom(r, d, p.theta0, p.theta_max, 240.0);
    const auto h2 = thermal_headroom(r, d, p.theta0, p.theta_max, 480.0);
    CHECK((h2.headroom - 2.0 * h1.headroom).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("no headroom when already at the limit") {
    p.theta_max = p.theta_eq;
    const auto r2 = linearize(p, T);
    DisturbanceSeries eq{Eigen::VectorXd::Constant(T, p.ambient_eq), Eigen::VectorXd::Constant(T, r2.eq_current)};
    const auto h = thermal_headroom(r2, eq, p.theta_eq, p.theta_max, 240.0);
    CHECK(h.headroom(0) <= 1e-9);
    auto hot = eq;
    hot.current.array() += 10.0;
    CHECK(thermal_headroom(r2, hot, p.theta_eq, p.theta_max, 240.0).infeasible_baseline);
  }
}

TEST_CASE("invalid thermal parameters") {
  auto p = half_decay();
  p.heat_resistance = 0.4;  // ϱ̄ = 2.5
  CHECK_THROWS_AS(linearize(p, 3), ThermalParamError);
  p = half_decay();
  p.theta_eq = p.ambient_eq;
  CHECK_THROWS_AS(linearize(p, 3), ThermalParamError);
  p = half_decay();
  const auto r = linearize(p, 3);
  DisturbanceSeries d{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
  CHECK_THROWS_AS(temperature_profile(r, d, 300.0, Eigen::VectorXd::Zero(3)), ContractError);
}
