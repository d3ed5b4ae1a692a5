#include "evcoord/runner.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "evcoord/agent.hpp"
#include "evcoord/errors.hpp"

namespace evcoord {

bool stopping_criterion(std::span<const StopCheck> history, double eps_dual, double eps_primal,
                        int window) noexcept {
  const auto need = static_cast<std::size_t>(std::max(window, 2));
  if (history.size() < need) return false;
  return std::all_of(history.end() - static_cast<std::ptrdiff_t>(need), history.end(), [&](const StopCheck& c) {
    return c.max_dual_change < eps_dual && c.primal_residual < eps_primal;
  });
}

RunOptions run_options(const ScenarioConfig& config) {
  RunOptions o;
  o.case_kind = config.case_kind;
  o.admm = config.admm;
  o.failure = config.failure;
  return o;
}

namespace {

FailureModel failure_model(const CommGraph& graph, const FailureSettings& f) {
  auto model = FailureModel::uniform(graph, f.alpha_hat, f.alpha_bar, f.seed);
  if (!f.activity.empty()) model.activity = f.activity;
  if (!f.link_failure.empty()) model.link_failure = f.link_failure;
  model.validate(graph);
  return model;
}

template <class Fn>
void for_each_agent(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = std::min(threads, n);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

RunTrace run_distributed(const Scenario& scenario, const RunOptions& options) {
  const int n = scenario.num_agents();
  if (n < 2) throw ConfigError("distributed runs need at least two agents");
  const auto& coupling = scenario.coupling(options.case_kind);
  const CouplingSystem agent_coupling = options.admm.equilibrate ? coupling.equilibrated() : coupling;
  const auto& graph = scenario.graph;

  AgentConfig acfg;
  acfg.rho = options.admm.rho;
  acfg.scaling = options.admm.scaling;
  acfg.stale = options.admm.stale;
  acfg.local = options.admm.local;
  std::vector<Agent> agents;
  agents.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    agents.emplace_back(i, scenario.fleet[k], scenario.polytopes[k], agent_coupling, scenario.price,
                        scenario.config.step_hours, graph.neighbors(i), acfg);
  }

  FailureProcess process(graph, failure_model(graph, options.failure));
  MessageBus bus(graph);
  if (options.observer) bus.set_observer(options.observer);

  std::vector<DualMessage> published;
  for (const auto& a : agents) published.push_back(a.broadcast());

  RunTrace trace;
  std::vector<StopCheck> history;
  Eigen::MatrixXd x(n, scenario.horizon());
  const double ref = options.reference_objective.value_or(std::numeric_limits<double>::quiet_NaN());
  for (int tau = 1; tau <= options.admm.max_iter; ++tau) {
    const RoundSample sample = process.sample_round();
    bus.deliver(sample, published);
    for_each_agent(n, options.admm.threads, [&](int i) {
      auto& a = agents[static_cast<std::size_t>(i)];
      if (sample.active_agents[static_cast<std::size_t>(i)]) {
        a.step(bus.inbox(i));
      } else {
        a.freeze();
      }
    });
    for (int i = 0; i < n; ++i) {
      published[static_cast<std::size_t>(i)] = agents[static_cast<std::size_t>(i)].broadcast();
      x.row(i) = agents[static_cast<std::size_t>(i)].x().transpose();
    }

    IterationRecord rec;
    rec.iteration = tau;
    rec.objective = scenario.objective(x);
    rec.error = (rec.objective - ref) / ref;
    rec.n_active = sample.num_active_agents();
    double max_change = 0.0;
    if (coupling.rows() > 0) {
      Eigen::VectorXd lo = agents[0].lambda(), hi = agents[0].lambda();
      for (const auto& a : agents) {
        lo = lo.cwiseMin(a.lambda());
        hi = hi.cwiseMax(a.lambda());
      }
      rec.dual_gap = (hi - lo).cwiseProduct(agent_coupling.row_scale()).maxCoeff();
      rec.primal_residual = std::max(0.0, (coupling.fleet_load(x) - coupling.headroom()).maxCoeff());
    }
    for (const auto& a : agents) max_change = std::max(max_change, a.last_change());
    trace.records.push_back(rec);
    if (options.trace) options.trace->write(rec);

    history.push_back({tau, max_change, rec.primal_residual});
    if (stopping_criterion(history, options.admm.eps_dual, options.admm.eps_primal, options.admm.stop_window)) {
      trace.converged = true;
      break;
    }
  }
  trace.max_iter_warning = !trace.converged;
  trace.x = x;
  trace.voltage = scenario.voltage_magnitude(x);
  trace.temperature = scenario.temperature(x);
  trace.per_ev_cost = scenario.per_ev_cost(x);
  for (const auto& a : agents)
    trace.lambda.push_back(coupling.rows() > 0 ? Eigen::VectorXd(a.lambda().cwiseProduct(agent_coupling.row_scale()))
                                               : a.lambda());
  trace.messages = bus.messages_delivered();
  return trace;
}

int iterations_to_accuracy(const RunTrace& trace, double tol) {
  int first = -1;
  for (const auto& r : trace.records) {
    if (std::abs(r.error) < tol) {
      if (first < 0) first = r.iteration;
    } else {
      first = -1;
    }
  }
  return first;
}

CentralSolution solve_centralized(const Scenario& scenario, CaseKind kind, const CentralOptions& options) {
  return solve_centralized(scenario.fleet, scenario.polytopes, scenario.coupling(kind), scenario.price,
                           scenario.config.step_hours, options);
}

namespace {

CaseResult run_case(const Scenario& scenario, RunOptions options, CaseKind kind) {
  options.case_kind = kind;
  CaseResult r;
  r.kind = kind;
  r.trace = run_distributed(scenario, options);
  r.objective = scenario.objective(r.trace.x);
  r.violations = violation_report(scenario.network, r.trace.x, options.admm.eps_primal);
  for (int i = 0; i < scenario.num_agents(); ++i) {
    const auto& ev = scenario.fleet[static_cast<std::size_t>(i)];
    const auto soc = soc_profile(ev, scenario.config.step_hours, r.trace.x.row(i).transpose());
    r.max_soc_error = std::max(r.max_soc_error, std::abs(soc[ev.departure - 1] - ev.soc_target));
  }
  return r;
}

}  // namespace

CaseStudy run_case_study(const Scenario& scenario, RunOptions options) {
  options.trace = nullptr;
  options.reference_objective.reset();
  CaseStudy s;
  s.price_based = run_case(scenario, options, CaseKind::price_based);
  s.network_aware = run_case(scenario, options, CaseKind::network_aware);
  return s;
}

}  // namespace evcoord
