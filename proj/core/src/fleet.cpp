#include "evcoord/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "evcoord/errors.hpp"

namespace evcoord {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

struct Interval {
  double lo;
  double hi;
};

}  // namespace

void validate(const EvSpec& s, int horizon) {
  if (!(s.capacity_kwh > 0.0)) throw InfeasibleSpec(s.id, "capacity", "capacity must be positive");
  if (!(s.efficiency > 0.0 && s.efficiency <= 1.0)) {
    throw InfeasibleSpec(s.id, "efficiency", "efficiency must lie in (0,1], got " + fmt(s.efficiency));
  }
  if (!(0.0 <= s.soc_min && s.soc_min <= s.soc0 && s.soc0 <= s.soc_max && s.soc_max <= 1.0)) {
    throw InfeasibleSpec(s.id, "soc_ordering", "need 0 ≤ soc_min ≤ soc0 ≤ soc_max ≤ 1");
  }
  if (!(s.soc_min <= s.soc_target && s.soc_target <= s.soc_max)) {
    throw InfeasibleSpec(s.id, "target_soc_bounds",
                         "target " + fmt(s.soc_target) + " outside [" + fmt(s.soc_min) + ", " +
                             fmt(s.soc_max) + "]");
  }
  if (!(s.x_min_kw <= 0.0 && 0.0 <= s.x_max_kw)) {
    throw InfeasibleSpec(s.id, "rate_bounds", "need x_min ≤ 0 ≤ x_max");
  }
  if (!(s.kappa > 0.0)) throw InfeasibleSpec(s.id, "kappa", "degradation weight must be positive");
  if (!(0 <= s.arrival && s.arrival <= s.departure && s.departure <= horizon)) {
    throw InfeasibleSpec(s.id, "availability_window",
                         "need 0 ≤ arrival ≤ departure ≤ " + std::to_string(horizon));
  }
}

BatteryPolytope build_polytope(const EvSpec& spec, int horizon, double step_hours) {
  validate(spec, horizon);
  if (!(step_hours > 0.0)) throw ContractError("step length must be positive");
  const int T = horizon;
  const double scale = spec.capacity_kwh / (spec.efficiency * step_hours);
  const double cum_lo = scale * (spec.soc_min - spec.soc0);
  const double cum_hi = scale * (spec.soc_max - spec.soc0);
  const double target = spec.required_sum(step_hours);

  BatteryPolytope p;
  p.availability.resize(T);
  for (int t = 0; t < T; ++t) {
    p.availability(t) = spec.available(t + 1) ? 1.0 : 0.0;
    if (p.availability(t) > 0.0) p.free_steps.push_back(t);
  }

  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(T, T);
  const Eigen::MatrixXd lower = Eigen::MatrixXd::Ones(T, T).triangularView<Eigen::Lower>();
  p.a_ineq.resize(4 * T, T);
  p.a_ineq << identity, -identity, lower, -lower;
  p.b_ineq.resize(4 * T);
  p.b_ineq << Eigen::VectorXd::Constant(T, spec.x_min_kw), Eigen::VectorXd::Constant(T, -spec.x_max_kw),
      Eigen::VectorXd::Constant(T, cum_lo), Eigen::VectorXd::Constant(T, -cum_hi);
  p.a_eq.resize(T + 1, T);
  p.a_eq.row(0).setOnes();
  p.a_eq.bottomRows(T) = identity - Eigen::MatrixXd(p.availability.asDiagonal());
  p.b_eq = Eigen::VectorXd::Zero(T + 1);
  p.b_eq(0) = target;

  // Demand against the rate limits of the window.
  const double n_free = static_cast<double>(p.free_steps.size());
  if (target > n_free * spec.x_max_kw + 1e-12 * (1.0 + std::abs(target)) ||
      target < n_free * spec.x_min_kw - 1e-12 * (1.0 + std::abs(target))) {
    throw InfeasibleSpec(spec.id, "charging_demand",
                         "needs Σx = " + fmt(target) + " but the window allows [" +
                             fmt(n_free * spec.x_min_kw) + ", " + fmt(n_free * spec.x_max_kw) + "]");
  }

  // Forward reachable interval of the running sum Σ_{τ≤t} x(τ) under the rate
  // and SoC bounds. Intervals are exact because every constraint is a box on
  // either the increment or the running sum.
  std::vector<Interval> reach(static_cast<std::size_t>(T) + 1);
  reach[0] = {0.0, 0.0};
  for (int t = 1; t <= T; ++t) {
    const bool on = p.availability(t - 1) > 0.0;
    Interval next{reach[t - 1].lo + (on ? spec.x_min_kw : 0.0), reach[t - 1].hi + (on ? spec.x_max_kw : 0.0)};
    next.lo = std::max(next.lo, cum_lo);
    next.hi = std::min(next.hi, cum_hi);
    if (next.lo > next.hi + 1e-12) {
      throw InfeasibleSpec(spec.id, "soc_trajectory", "SoC bounds unreachable at step " + std::to_string(t));
    }
    reach[t] = next;
  }
  const double tol = 1e-9 * (1.0 + std::abs(target));
  if (target < reach[T].lo - tol || target > reach[T].hi + tol) {
    throw InfeasibleSpec(spec.id, "soc_trajectory",
                         "target SoC not reachable within the SoC and rate bounds");
  }

  // Backward pass picks a running sum inside each reachable interval.
  p.feasible_point = Eigen::VectorXd::Zero(T);
  double running = target;
  const double even_step = n_free > 0 ? target / n_free : 0.0;
  for (int t = T; t >= 1; --t) {
    const bool on = p.availability(t - 1) > 0.0;
    const double step_lo = on ? spec.x_min_kw : 0.0;
    const double step_hi = on ? spec.x_max_kw : 0.0;
    const double lo = std::max(reach[t - 1].lo, running - step_hi);
    const double hi = std::min(reach[t - 1].hi, running - step_lo);
    const double prev = std::clamp(running - (on ? even_step : 0.0), lo, std::max(lo, hi));
    p.feasible_point(t - 1) = running - prev;
    running = prev;
  }

  // Reduced system over the free steps.
  const int f = p.num_free();
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> rhs;
  int row = 0;
  for (int j = 0; j < f; ++j) {
    trips.emplace_back(row, j, 1.0);
    rhs.push_back(spec.x_min_kw);
    ++row;
    trips.emplace_back(row, j, -1.0);
    rhs.push_back(-spec.x_max_kw);
    ++row;
  }
  for (int j = 0; j < f; ++j) {
    const double count = static_cast<double>(j + 1);
    // Skip running-sum rows the rate bounds already imply.
    if (count * spec.x_min_kw < cum_lo) {
      for (int i = 0; i <= j; ++i) trips.emplace_back(row, i, 1.0);
      rhs.push_back(cum_lo);
      ++row;
    }
    if (count * spec.x_max_kw > cum_hi) {
      for (int i = 0; i <= j; ++i) trips.emplace_back(row, i, -1.0);
      rhs.push_back(-cum_hi);
      ++row;
    }
  }
  p.free_ineq.resize(row, f);
  p.free_ineq.setFromTriplets(trips.begin(), trips.end());
  p.free_ineq.makeCompressed();
  p.free_ineq_rhs = Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));

  p.free_eq.resize(1, f);
  std::vector<Eigen::Triplet<double>> eq_trips;
  for (int j = 0; j < f; ++j) eq_trips.emplace_back(0, j, 1.0);
  p.free_eq.setFromTriplets(eq_trips.begin(), eq_trips.end());
  p.free_eq.makeCompressed();
  p.free_eq_rhs = Eigen::VectorXd::Constant(1, target);
  return p;
}

bool BatteryPolytope::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != horizon()) return false;
  if (((a_ineq * x - b_ineq).array() < -tol).any()) return false;
  return ((a_eq * x - b_eq).array().abs() <= tol).all();
}

Eigen::VectorXd BatteryPolytope::restrict(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(num_free());
  for (int j = 0; j < num_free(); ++j) out(j) = x(free_steps[static_cast<std::size_t>(j)]);
  return out;
}

Eigen::VectorXd BatteryPolytope::expand(const Eigen::VectorXd& x_free) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(horizon());
  for (int j = 0; j < num_free(); ++j) out(free_steps[static_cast<std::size_t>(j)]) = x_free(j);
  return out;
}

Eigen::VectorXd soc_profile(const EvSpec& spec, double step_hours, const Eigen::VectorXd& x) {
  const double gain = spec.efficiency * step_hours / spec.capacity_kwh;
  Eigen::VectorXd soc(x.size());
  double level = spec.soc0;
  for (Eigen::Index t = 0; t < x.size(); ++t) {
    level += gain * x(t);
    soc(t) = level;
  }
  return soc;
}

double operational_cost(const EvSpec& spec, const Eigen::VectorXd& price, double step_hours,
                        const Eigen::VectorXd& x) {
  if (price.size() != x.size()) throw ContractError("price and profile lengths differ");
  return step_hours * price.dot(x) + spec.kappa * x.squaredNorm();
}

Eigen::VectorXd operational_cost_gradient(const EvSpec& spec, const Eigen::VectorXd& price,
                                          double step_hours, const Eigen::VectorXd& x) {
  if (price.size() != x.size()) throw ContractError("price and profile lengths differ");
  return step_hours * price + 2.0 * spec.kappa * x;
}

}  // namespace evcoord
