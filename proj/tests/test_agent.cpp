#include <doctest.h>

#include <random>

#include "evcoord/agent.hpp"
#include "evcoord/errors.hpp"
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

// Three copies of mini's agents on a line graph 0-1-2.
struct LineOfThree {
  Scenario sc;
  LineOfThree() : sc(mini()) {
    sc.fleet.push_back(sc.fleet[0]);
    sc.polytopes.push_back(sc.polytopes[0]);
    sc.fleet[2].id = "ev03";
    sc.fleet[2].supply_point = sc.fleet[1].supply_point;
    sc.fleet[2].soc0 = 0.5;
    sc.polytopes[2] = build_polytope(sc.fleet[2], sc.horizon(), sc.config.step_hours);
    std::vector<SupplyPoint> customers;
    for (const auto& e : sc.fleet) customers.push_back(e.supply_point);
    sc.feeder = FeederModel(sc.feeder.nodes(), sc.feeder.lines(), customers, sc.feeder.v0(), sc.feeder.s_base_kva());
    sc.sensitivity = build_sensitivity(sc.feeder);
    sc.network = assemble(sc.sensitivity, sc.baseline, sc.thermal_headroom, sc.thermal, sc.limits);
    sc.graph = CommGraph(3, {{0, 1}, {1, 2}});
  }
};

struct Driver {
  const Scenario& sc;
  const CouplingSystem& c;
  std::vector<Agent> agents;
  MessageBus bus;
  std::vector<DualMessage> published;

  Driver(const Scenario& s, const CouplingSystem& coupling, AgentConfig cfg) : sc(s), c(coupling), bus(s.graph) {
    for (int i = 0; i < s.num_agents(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      agents.emplace_back(i, s.fleet[k], s.polytopes[k], coupling, s.price, s.config.step_hours, s.graph.neighbors(i), cfg);
      published.push_back(agents.back().broadcast());
    }
  }

  void round(const std::vector<char>& active, const std::vector<char>& links) {
    bus.deliver(RoundSample{active, links}, published);
    for (std::size_t i = 0; i < agents.size(); ++i) {
      if (active[i]) {
        agents[i].step(bus.inbox(static_cast<int>(i)));
      } else {
        agents[i].freeze();
      }
    }
    for (std::size_t i = 0; i < agents.size(); ++i) published[i] = agents[i].broadcast();
  }
};

void check_same(const Driver& d, const testing::ReferenceAdmm& r, double tol) {
  for (std::size_t i = 0; i < d.agents.size(); ++i) {
    CHECK((d.agents[i].lambda() - r.lambda[i]).cwiseAbs().maxCoeff() < tol);
    CHECK((d.agents[i].nu() - r.nu[i]).cwiseAbs().maxCoeff() < tol);
    CHECK((d.agents[i].x() - r.x[i]).cwiseAbs().maxCoeff() < tol);
  }
}

}  // namespace

TEST_CASE("configuration contract") {
  const auto& sc = tiny();
  CHECK_THROWS_AS(Agent(0, sc.fleet[0], sc.polytopes[0], sc.network, sc.price, 1.0, {}), ConfigError);
  AgentConfig bad;
  bad.rho = 0.0;
  CHECK_THROWS_AS(Agent(0, sc.fleet[0], sc.polytopes[0], sc.network, sc.price, 1.0, {1}, bad), ConfigError);
}

TEST_CASE("dual step") {
  const auto& sc = tiny();
  const int m = sc.network.rows();
  AgentConfig cfg;
  cfg.rho = 2.5;

  SUBCASE("identical duals leave nu alone") {
    Agent a(0, sc.fleet[0], sc.polytopes[0], sc.network, sc.price, 1.0, {1}, cfg);
    a.receive({1, 1, Eigen::VectorXd::Zero(m)});
    a.dual_step();
    CHECK(a.nu().isZero());
  }
  SUBCASE("single neighbour: nu += rho d") {
    Agent a(0, sc.fleet[0], sc.polytopes[0], sc.network, sc.price, 1.0, {1}, cfg);
    std::mt19937_64 rng(1);
    const Eigen::VectorXd d = testing::uniform_vector(rng, m, -1, 1);
    a.receive({1, 1, -d});  // λₙ = 0, so λₙ - λₘ = d
    a.dual_step();
    CHECK((a.nu() - cfg.rho * d).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("older messages do not overwrite newer ones") {
    Agent a(0, sc.fleet[0], sc.polytopes[0], sc.network, sc.price, 1.0, {1}, cfg);
    a.receive({1, 5, Eigen::VectorXd::Ones(m)});
    a.receive({1, 3, Eigen::VectorXd::Zero(m)});
    CHECK(a.cache().at(1).lambda.isOnes());
    a.receive({7, 9, Eigen::VectorXd::Zero(m)});  // not a neighbour
    CHECK(a.cache().size() == 1);
  }
}

TEST_CASE("lambda step follows the update formula") {
  const auto& sc = tiny();
  const int m = sc.network.rows();
  AgentConfig cfg;
  cfg.rho = 1.7;
  Agent a(0, sc.fleet[0], sc.polytopes[0], sc.network, sc.price, 1.0, {1}, cfg);
  std::mt19937_64 rng(3);
  const Eigen::VectorXd lm = testing::uniform_vector(rng, m, -0.01, 0.01);
  a.receive({1, 1, lm});
  a.step(std::span<const DualMessage>{});
  // |𝒩ₙ| = 1, λₙ was 0: λ = (λₘ - ν/ρ + (Γx + s)/ρ - w/(Nρ)) / 2 with ν = -ρλₘ.
  const Eigen::VectorXd nu = -cfg.rho * lm;
  CHECK((a.nu() - nu).cwiseAbs().maxCoeff() < 1e-15);
  const Eigen::VectorXd xi_u = sc.network.apply(0, a.x()) + a.s();
  const Eigen::VectorXd expect = (lm - nu / cfg.rho + xi_u / cfg.rho - sc.network.headroom() / (2.0 * cfg.rho)) / 2.0;
  CHECK((a.lambda() - expect).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(a.stamp() == 1);
}

TEST_CASE("freeze changes nothing but the stamp") {
  const auto& sc = tiny();
  Agent a(0, sc.fleet[0], sc.polytopes[0], sc.network, sc.price, 1.0, {1});
  a.receive({1, 1, Eigen::VectorXd::Constant(sc.network.rows(), 0.01)});
  a.step(std::span<const DualMessage>{});
  const auto lambda = a.lambda();
  const auto nu = a.nu();
  const auto x = a.x();
  const auto s = a.s();
  const auto before = a.broadcast();
  a.freeze();
  CHECK(a.lambda() == lambda);
  CHECK(a.nu() == nu);
  CHECK(a.x() == x);
  CHECK(a.s() == s);
  CHECK(a.stamp() == before.stamp + 1);
  CHECK(a.broadcast().lambda == before.lambda);
}

TEST_CASE("symmetric agents make identical moves") {
  Scenario sc = tiny();
  sc.fleet[1] = sc.fleet[0];
  sc.polytopes[1] = sc.polytopes[0];
  REQUIRE(sc.fleet[0].supply_point == sc.fleet[1].supply_point);
  Driver d(sc, sc.network, {});
  const std::vector<char> on(2, 1), link(1, 1);
  for (int k = 0; k < 15; ++k) {
    d.round(on, link);
    CHECK((d.agents[0].x() - d.agents[1].x()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((d.agents[0].lambda() - d.agents[1].lambda()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(sc.polytopes[0].contains(d.agents[0].x(), 1e-8));
  }
}

TEST_CASE("N=2, T=2 agents reproduce the monolithic reference") {
  const auto& sc = tiny();
  for (const auto scaling : {ProximalScaling::as_printed, ProximalScaling::expanded}) {
    AgentConfig cfg;
    cfg.rho = 1.3;
    cfg.scaling = scaling;
    Driver d(sc, sc.network, cfg);
    testing::ReferenceAdmm ref(sc, sc.network, sc.graph, cfg.rho);
    const std::vector<char> on(2, 1), link(1, 1);
    for (int k = 0; k < 40; ++k) {
      d.round(on, link);
      ref.round(on, link);
      check_same(d, ref, 1e-7);
    }
  }
}

TEST_CASE("three agents on a line, two rounds by hand") {
  LineOfThree l;
  const auto& sc = l.sc;
  AgentConfig cfg;
  cfg.rho = 0.8;
  Driver d(sc, sc.network, cfg);
  testing::ReferenceAdmm ref(sc, sc.network, sc.graph, cfg.rho);
  const std::vector<char> on(3, 1), links(2, 1);
  for (int k = 0; k < 2; ++k) {
    d.round(on, links);
    ref.round(on, links);
    check_same(d, ref, 1e-7);
  }
  // Round one starts from zero duals: ν stays 0 and λ only reflects the local move.
  CHECK(d.agents[1].degree() == 2);
}

TEST_CASE("agent frozen for five rounds matches the reference") {
  LineOfThree l;
  const auto& sc = l.sc;
  const auto scaled = sc.network.equilibrated();
  AgentConfig cfg;
  cfg.rho = 1.0;
  Driver d(sc, scaled, cfg);
  testing::ReferenceAdmm ref(sc, scaled, sc.graph, cfg.rho);
  for (int k = 0; k < 20; ++k) {
    std::vector<char> on(3, 1), links(2, 1);
    // Agent 2 sleeps for five rounds while its link stays up.
    if (k >= 3 && k < 8) on[2] = 0;
    const auto before = d.agents[2].broadcast().lambda;
    d.round(on, links);
    ref.round(on, links);
    check_same(d, ref, 1e-7);
    if (!on[2]) {
      CHECK(d.agents[2].lambda() == before);
      CHECK(d.agents[1].cache().at(2).lambda == before);
    }
  }
}

TEST_CASE("edge-state policy keeps the consensus duals summing to zero under failures") {
  LineOfThree l;
  const auto& sc = l.sc;
  const auto scaled = sc.network.equilibrated();
  for (const auto policy : {StalePolicy::edge_state, StalePolicy::last_value}) {
    AgentConfig cfg;
    cfg.stale = policy;
    Driver d(sc, scaled, cfg);
    testing::ReferenceAdmm ref(sc, scaled, sc.graph, cfg.rho);
    FailureProcess proc(sc.graph, FailureModel::uniform(sc.graph, 0.8, 0.4, 6));
    double drift = 0.0;
    for (int k = 0; k < 60; ++k) {
      const auto s = proc.sample_round();
      d.round(s.active_agents, s.active_links);
      if (policy == StalePolicy::edge_state) ref.round(s.active_agents, s.active_links);
      Eigen::VectorXd total = Eigen::VectorXd::Zero(scaled.rows());
      for (const auto& a : d.agents) total += a.nu();
      drift = std::max(drift, total.cwiseAbs().maxCoeff());
    }
    if (policy == StalePolicy::edge_state) {
      CHECK(drift < 1e-12);
      check_same(d, ref, 1e-6);
    } else {
      CHECK(drift > 1e-6);
    }
  }
}
