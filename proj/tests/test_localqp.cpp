#include <doctest.h>

#include <random>

#include "evcoord/localqp.hpp"
#include "evcoord/scenario.hpp"
#include "reference.hpp"
#include "support.hpp"

using namespace evcoord;

namespace {

const Scenario& tiny() {
  static const Scenario s = Scenario::load(testing::scenario_file("tiny"));
  return s;
}

const Scenario& mini() {
  static const Scenario s = Scenario::load(testing::scenario_file("mini"));
  return s;
}

LocalQp random_qp(const Scenario& sc, const CouplingSystem& c, int n, std::mt19937_64& rng, double spread,
                  ProximalScaling scaling = ProximalScaling::as_printed) {
  const int m = c.rows();
  const Eigen::VectorXd w = c.headroom() / sc.num_agents();
  Eigen::VectorXd nu = testing::uniform_vector(rng, m, -spread, spread).cwiseProduct(w.cwiseAbs());
  Eigen::VectorXd sum = testing::uniform_vector(rng, m, -spread, spread).cwiseProduct(w.cwiseAbs());
  const double rho = 0.5 + std::uniform_real_distribution<double>(0, 2)(rng);
  return make_local_qp(sc.polytopes[n], c, n, sc.fleet[n], sc.price, sc.config.step_hours, nu, sum, rho,
                       1 + n % 3, scaling);
}

}  // namespace

TEST_CASE("interior optimum: slack absorbs the proximal term") {
  const auto& sc = mini();
  const auto& c = sc.network;
  Eigen::VectorXd flat = Eigen::VectorXd::Constant(sc.horizon(), 0.1);
  LocalQp qp;
  qp.polytope = &sc.polytopes[0];
  qp.coupling = &c;
  qp.kappa = sc.fleet[0].kappa;
  qp.linear = flat * sc.config.step_hours;
  qp.target = Eigen::VectorXd::Constant(c.rows(), 1e6);
  qp.weight = 0.3;
  const auto sol = solve(qp);
  // Flat price: the demand spreads evenly over the window.
  const auto& p = sc.polytopes[0];
  const double each = sc.fleet[0].required_sum(sc.config.step_hours) / p.num_free();
  for (int t : p.free_steps) CHECK(sol.x(t) == doctest::Approx(each).epsilon(1e-9));
  CHECK((sol.s - (qp.target - c.apply(0, sol.x))).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("the single point polytope fixes x; only s moves") {
  const auto& sc = tiny();
  auto spec = testing::ev(1, 1, 0.5, 0.5);
  const auto poly = build_polytope(spec, 2, 1.0);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 3; ++k) {
    LocalQp qp;
    qp.polytope = &poly;
    qp.coupling = &sc.network;
    qp.kappa = 0.01;
    qp.linear = testing::uniform_vector(rng, 2, -5, 5);
    qp.target = testing::uniform_vector(rng, sc.network.rows(), -1, 1);
    qp.weight = 1.0;
    const auto sol = solve(qp);
    CHECK(sol.x.isZero());
    CHECK((sol.s - qp.target.cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("T=2 grid search oracle") {
  const auto& sc = tiny();
  std::mt19937_64 rng(8);
  int binding = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = trial % 2;
    const auto qp = random_qp(sc, sc.network, n, rng, 4.0);
    const auto sol = solve(qp);
    const auto& spec = sc.fleet[n];
    const double total = spec.required_sum(1.0);
    // Σx is fixed, so the feasible set is a segment in x(1).
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x(2);
    for (double x1 = spec.x_min_kw; x1 <= spec.x_max_kw + 1e-12; x1 += 1e-3) {
      Eigen::VectorXd x(2);
      x << x1, total - x1;
      if (!sc.polytopes[n].contains(x, 1e-9)) continue;
      const Eigen::VectorXd s = (qp.target - sc.network.apply(n, x)).cwiseMax(0.0);
      const double f = local_objective(qp, x, s);
      if (f < best) {
        best = f;
        best_x = x;
      }
    }
    REQUIRE(std::isfinite(best));
    CHECK((sol.x - best_x).cwiseAbs().maxCoeff() < 2e-3);
    CHECK(sol.objective <= best + 1e-9);
    binding += (qp.target - sc.network.apply(n, sol.x)).minCoeff() < 0.0;
  }
  CHECK(binding > 0);
}

TEST_CASE("generalized Newton agrees with the joint (x, s) QP") {
  const auto& sc = mini();
  std::mt19937_64 rng(12);
  const CouplingSystem scaled = sc.network.equilibrated();
  for (const auto* c : {&sc.network, &scaled}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int n = trial % sc.num_agents();
      const auto qp = random_qp(sc, *c, n, rng, trial < 5 ? 0.5 : 5.0);
      const auto sol = solve(qp);
      Eigen::VectorXd s_ref;
      const auto x_ref = testing::joint_local_solve(qp, &s_ref);
      CHECK((sol.x - x_ref).cwiseAbs().maxCoeff() < 1e-6);
      CHECK(sol.objective <= local_objective(qp, x_ref, s_ref) + 1e-9 * (1.0 + std::abs(sol.objective)));
      CHECK(sc.polytopes[n].contains(sol.x, 1e-8));
      CHECK((sol.s.array() >= 0.0).all());
      // Warm start from elsewhere reaches the same point.
      const Eigen::VectorXd warm = sc.polytopes[n].feasible_point;
      CHECK((solve(qp, &warm).x - sol.x).cwiseAbs().maxCoeff() < 1e-7);
    }
  }
}

TEST_CASE("printed and expanded proximal scalings give the same minimizer") {
  const auto& sc = mini();
  std::mt19937_64 a(31), b(31);
  for (int trial = 0; trial < 6; ++trial) {
    const auto q1 = random_qp(sc, sc.network, trial % 2, a, 3.0, ProximalScaling::as_printed);
    const auto q2 = random_qp(sc, sc.network, trial % 2, b, 3.0, ProximalScaling::expanded);
    CHECK(q1.weight == doctest::Approx(q2.weight));
    CHECK((q1.target - q2.target).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((solve(q1).x - solve(q2).x).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("price-only subproblem") {
  const auto& sc = mini();
  const auto& c = sc.uncoupled;
  const Eigen::VectorXd zero(0);
  const auto qp = make_local_qp(sc.polytopes[1], c, 1, sc.fleet[1], sc.price, sc.config.step_hours, zero, zero,
                                1.0, 1);
  const auto sol = solve(qp);
  CHECK(sol.s.size() == 0);
  CHECK((sol.x - testing::joint_local_solve(qp)).cwiseAbs().maxCoeff() < 1e-8);
}
