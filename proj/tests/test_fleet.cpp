#include <doctest.h>

#include <random>

#include "evcoord/errors.hpp"
#include "evcoord/fleet.hpp"
#include "support.hpp"

using namespace evcoord;

namespace {

// Direct check of every battery constraint, written from the definitions.
bool satisfies(const EvSpec& s, double dt, const Eigen::VectorXd& x, double tol) {
  double soc = s.soc0;
  double total = 0.0;
  for (int t = 0; t < x.size(); ++t) {
    const bool on = s.arrival < t + 1 && t + 1 <= s.departure;
    if (!on && std::abs(x(t)) > tol) return false;
    if (x(t) < s.x_min_kw - tol || x(t) > s.x_max_kw + tol) return false;
    soc += s.efficiency * dt / s.capacity_kwh * x(t);
    if (soc < s.soc_min - tol || soc > s.soc_max + tol) return false;
    total += x(t);
  }
  return std::abs(soc - s.soc_target) <= tol;
}

}  // namespace

TEST_CASE("state of charge recursion") {
  auto s = testing::ev(0, 4, 0.5, 0.5, 7.0, 10.0);
  Eigen::VectorXd x(4);
  x << 2, 2, 0, 0;
  const auto soc = soc_profile(s, 0.5, x);
  CHECK(soc(0) == doctest::Approx(0.6));
  CHECK(soc(1) == doctest::Approx(0.7));
  CHECK(soc(2) == doctest::Approx(0.7));
  CHECK(soc(3) == doctest::Approx(0.7));
  CHECK((soc_profile(s, 0.5, Eigen::VectorXd::Zero(4)).array() == 0.5).all());
}

TEST_CASE("state of charge equals the cumulative-sum form") {
  std::mt19937_64 rng(3);
  auto s = testing::ev(0, 12, 0.3, 0.3, 7.0, 55.0);
  s.efficiency = 0.93;
  const Eigen::MatrixXd lower = Eigen::MatrixXd::Ones(12, 12).triangularView<Eigen::Lower>();
  for (int k = 0; k < 10; ++k) {
    const auto x = testing::uniform_vector(rng, 12, -7.0, 7.0);
    const Eigen::VectorXd cum = (lower * x).array() * (0.93 * 0.25 / 55.0) + 0.3;
    CHECK((soc_profile(s, 0.25, x) - cum).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("empty window with no demand gives the single point 0") {
  auto s = testing::ev(2, 2, 0.4, 0.4);
  const auto p = build_polytope(s, 4, 1.0);
  CHECK(p.num_free() == 0);
  CHECK(p.feasible_point.isZero());
  CHECK(p.contains(Eigen::VectorXd::Zero(4)));
  Eigen::VectorXd nudge = Eigen::VectorXd::Zero(4);
  nudge(1) = 0.1;
  CHECK_FALSE(p.contains(nudge));
  s.soc_target = 0.5;
  CHECK_THROWS_AS(build_polytope(s, 4, 1.0), InfeasibleSpec);
}

TEST_CASE("no demand with full availability contains zero") {
  const auto p = build_polytope(testing::ev(0, 6, 0.5, 0.5), 6, 0.5);
  CHECK(p.contains(Eigen::VectorXd::Zero(6)));
}

TEST_CASE("window length decides feasibility of the demand") {
  // e/Δ = (0.8 - 0.2)·10/0.5 = 12 against 3 kW per step.
  const auto ok = testing::ev(0, 5, 0.2, 0.8, 3.0, 10.0);
  const auto p = build_polytope(ok, 6, 0.5);
  CHECK(p.num_free() == 5);
  CHECK(p.contains(p.feasible_point));
  CHECK(satisfies(ok, 0.5, p.feasible_point, 1e-9));
  try {
    build_polytope(testing::ev(0, 3, 0.2, 0.8, 3.0, 10.0), 6, 0.5);
    FAIL("expected InfeasibleSpec");
  } catch (const InfeasibleSpec& e) {
    CHECK(e.constraint() == "charging_demand");
  }
}

TEST_CASE("polytope membership agrees with the direct constraint check") {
  std::mt19937_64 rng(5);
  auto s = testing::ev(1, 5, 0.3, 0.6, 4.0, 12.0);
  s.soc_min = 0.2;
  s.soc_max = 0.8;
  const auto p = build_polytope(s, 6, 1.0);
  int inside = 0;
  for (int k = 0; k < 4000; ++k) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
    // Random point on the demand hyperplane inside the window.
    const auto r = testing::uniform_vector(rng, 4, -4.0, 4.0);
    x.segment(1, 4) = r.array() - r.mean() + s.required_sum(1.0) / 4.0;
    const bool direct = satisfies(s, 1.0, x, 1e-9);
    CHECK(p.contains(x) == direct);
    inside += direct;
  }
  CHECK(inside > 0);
  // Stacked forms: A_ineq x ≥ b_ineq and A_eq x = b_eq at the feasible point.
  CHECK(((p.a_ineq * p.feasible_point - p.b_ineq).array() >= -1e-9).all());
  CHECK((p.a_eq * p.feasible_point - p.b_eq).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((p.expand(p.restrict(p.feasible_point)) - p.feasible_point).isZero());
}

TEST_CASE("operational cost") {
  auto s = testing::ev(0, 2, 0.5, 0.5);
  Eigen::VectorXd price(2), x(2);
  price << 0.1, 0.2;
  x << 4, -2;
  CHECK(operational_cost(s, price, 0.5, x) == doctest::Approx(0.2));
  CHECK(operational_cost(s, price, 0.5, Eigen::VectorXd::Zero(2)) == 0.0);
}

TEST_CASE("cost gradient against central differences") {
  std::mt19937_64 rng(17);
  auto s = testing::ev(0, 8, 0.5, 0.5, 7.0, 40.0, 0.037);
  const auto price = testing::uniform_vector(rng, 8, 0.05, 0.3);
  for (int k = 0; k < 5; ++k) {
    const auto x = testing::uniform_vector(rng, 8, -7.0, 7.0);
    const auto g = operational_cost_gradient(s, price, 0.5, x);
    Eigen::VectorXd fd(8);
    const double h = 1e-5;
    for (int t = 0; t < 8; ++t) {
      Eigen::VectorXd up = x, dn = x;
      up(t) += h;
      dn(t) -= h;
      fd(t) = (operational_cost(s, price, 0.5, up) - operational_cost(s, price, 0.5, dn)) / (2 * h);
    }
    CHECK((g - fd).norm() / g.norm() < 1e-6);
  }
}

TEST_CASE("parameter validation names the broken constraint") {
  auto bad = [](auto mutate) {
    auto s = testing::ev(0, 4, 0.3, 0.5);
    mutate(s);
    try {
      validate(s, 4);
    } catch (const InfeasibleSpec& e) {
      return e.constraint();
    }
    return std::string("none");
  };
  CHECK(bad([](EvSpec& s) { s.kappa = 0.0; }) == "kappa");
  CHECK(bad([](EvSpec& s) { s.soc0 = 1.2; }) == "soc_ordering");
  CHECK(bad([](EvSpec& s) { s.soc_target = 1.5; }) == "target_soc_bounds");
  CHECK(bad([](EvSpec& s) { s.x_max_kw = -1.0; }) == "rate_bounds");
  CHECK(bad([](EvSpec& s) { s.departure = 9; }) == "availability_window");
  CHECK(bad([](EvSpec& s) { s.capacity_kwh = 0.0; }) == "capacity");
  CHECK(bad([](EvSpec&) {}) == "none");
}
