#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "evcoord/errors.hpp"
#include "evcoord/io.hpp"
#include "evcoord/runner.hpp"
#include "evcoord/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace evcoord;

namespace {

constexpr int kExitConverged = 0;
constexpr int kExitError = 1;
constexpr int kExitMaxIter = 2;

struct Overrides {
  std::string scenario;
  std::string case_kind;
  std::optional<double> alpha_hat;
  std::optional<double> alpha_bar;
  std::optional<double> rho;
  std::optional<int> max_iter;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--scenario", o.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--case", o.case_kind, "price or network (default: from scenario)")
      ->check(CLI::IsMember({"price", "network"}));
  cmd->add_option("--rho", o.rho, "ADMM penalty");
  cmd->add_option("--max-iter", o.max_iter, "Iteration cap");
  cmd->add_option("--seed", o.seed, "Failure-process seed");
  cmd->add_option("--threads", o.threads, "Worker threads for agent updates");
  cmd->add_option("--out", o.out, "Output directory");
}

ScenarioConfig configure(const Overrides& o) {
  auto cfg = load_config(o.scenario);
  if (!o.case_kind.empty()) cfg.case_kind = parse_case(o.case_kind);
  if (o.alpha_hat) cfg.failure.alpha_hat = *o.alpha_hat;
  if (o.alpha_bar) cfg.failure.alpha_bar = *o.alpha_bar;
  if (o.rho) cfg.admm.rho = *o.rho;
  if (o.max_iter) cfg.admm.max_iter = *o.max_iter;
  if (o.seed) cfg.failure.seed = *o.seed;
  if (o.threads) cfg.admm.threads = *o.threads;
  return cfg;
}

std::string tag(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

json metadata(const Scenario& sc, const RunOptions& opt) {
  json m;
  m["scenario"] = sc.config.name;
  m["config"] = json::parse(sc.config.source_json);
  m["case"] = case_name(opt.case_kind);
  m["admm"] = {{"rho", opt.admm.rho},
               {"max_iter", opt.admm.max_iter},
               {"eps_dual", opt.admm.eps_dual},
               {"eps_primal", opt.admm.eps_primal},
               {"proximal_scaling", opt.admm.scaling == ProximalScaling::as_printed ? "as_printed" : "expanded"},
               {"stop_window", opt.admm.stop_window},
               {"equilibrate", opt.admm.equilibrate},
               {"stale_policy", opt.admm.stale == StalePolicy::edge_state ? "edge_state" : "last_value"},
               {"threads", opt.admm.threads}};
  m["failure"] = {{"alpha_hat", opt.failure.alpha_hat}, {"alpha_bar", opt.failure.alpha_bar},
                  {"seed", opt.failure.seed}, {"rng", "mt19937_64"}};
  json edges = json::array();
  for (const auto& [a, b] : sc.graph.edges()) edges.push_back({a, b});
  m["graph"] = {{"generator", sc.config.graph.edge_file.empty() ? "erdos_renyi_connected" : "edge_file"},
                {"edge_prob", sc.config.graph.edge_prob},
                {"seed", sc.config.graph.seed},
                {"attempts", sc.graph_attempts},
                {"edges", edges}};
  m["versions"] = {{"evcoord", "0.1.0"},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__}};
  return m;
}

void write_profiles(const fs::path& file, const Scenario& sc, const Eigen::MatrixXd& x,
                    const Eigen::MatrixXd& voltage, const Eigen::VectorXd& theta, const std::string& prefix) {
  ProfileWriter w(file);
  for (int i = 0; i < sc.num_agents(); ++i) {
    const auto& ev = sc.fleet[static_cast<std::size_t>(i)];
    w.write(prefix + "x:" + ev.id, x.row(i).transpose());
    w.write(prefix + "soc:" + ev.id, soc_profile(ev, sc.config.step_hours, x.row(i).transpose()));
  }
  for (int k = 0; k < sc.feeder.num_supply_points(); ++k)
    w.write(prefix + "v:" + sc.feeder.supply_points()[static_cast<std::size_t>(k)].label(),
            voltage.row(k).transpose());
  w.write(prefix + "theta", theta);
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file);
  out << j.dump(2) << '\n';
}

std::optional<double> reference(const Scenario& sc, CaseKind kind) {
  try {
    return solve_centralized(sc, kind).objective;
  } catch (const SolverFailure& e) {
    std::cerr << "warning: no reference objective (" << e.what() << ")\n";
    return std::nullopt;
  }
}

int cmd_run(const Overrides& o) {
  const auto sc = Scenario::build(configure(o));
  auto opt = run_options(sc.config);
  opt.reference_objective = reference(sc, opt.case_kind);
  fs::create_directories(o.out);
  TraceWriter trace_out(fs::path(o.out) / "trace.csv");
  opt.trace = &trace_out;
  const auto tr = run_distributed(sc, opt);
  write_profiles(fs::path(o.out) / "profiles.csv", sc, tr.x, tr.voltage, tr.temperature, "");
  auto meta = metadata(sc, opt);
  const auto& last = tr.records.back();
  meta["result"] = {{"iterations", tr.iterations()},
                    {"converged", tr.converged},
                    {"objective", last.objective},
                    {"reference_objective", opt.reference_objective ? json(*opt.reference_objective) : json()},
                    {"messages", tr.messages}};
  write_json(fs::path(o.out) / "metadata.json", meta);
  std::printf("%s: %d iterations, objective %.10g", tr.converged ? "converged" : "max-iter reached",
              tr.iterations(), last.objective);
  if (opt.reference_objective) std::printf(", obj* %.10g, error %.3e", *opt.reference_objective, last.error);
  std::printf("\n");
  return tr.converged ? kExitConverged : kExitMaxIter;
}

int cmd_oracle(const Overrides& o, const std::string& method) {
  const auto sc = Scenario::build(configure(o));
  CentralOptions co;
  co.method = method == "active-set" ? CentralMethod::active_set : CentralMethod::operator_splitting;
  const auto sol = solve_centralized(sc, sc.config.case_kind, co);
  std::printf("obj* = %.12g (%d iterations, primal residual %.2e, dual residual %.2e%s)\n", sol.objective,
              sol.iterations, sol.primal_residual, sol.dual_residual, sol.polished ? ", polished" : "");
  int counts[3] = {0, 0, 0};
  for (const auto& v : violation_report(sc.network, sol.x, sc.config.admm.eps_primal))
    ++counts[static_cast<int>(v.kind)];
  std::printf("network limit violations: thermal %d, over-voltage %d, under-voltage %d\n", counts[0], counts[1],
              counts[2]);
  std::printf("max theta %.3f K, min |V| %.5f p.u., max |V| %.5f p.u.\n", sc.temperature(sol.x).maxCoeff(),
              sc.voltage_magnitude(sol.x).minCoeff(), sc.voltage_magnitude(sol.x).maxCoeff());
  fs::create_directories(o.out);
  write_profiles(fs::path(o.out) / "oracle_profiles.csv", sc, sol.x, sc.voltage_magnitude(sol.x),
                 sc.temperature(sol.x), "");
  return kExitConverged;
}

int cmd_sweep(const Overrides& o, const std::vector<double>& hats, const std::vector<double>& bars) {
  auto cfg = configure(o);
  const auto sc = Scenario::build(cfg);
  const auto ref = reference(sc, cfg.case_kind);
  fs::create_directories(o.out);
  int code = kExitConverged;
  for (double ah : hats) {
    for (double ab : bars) {
      auto opt = run_options(sc.config);
      opt.failure.alpha_hat = ah;
      opt.failure.alpha_bar = ab;
      opt.reference_objective = ref;
      const auto name = "trace_ah" + tag(ah) + "_ab" + tag(ab) + ".csv";
      TraceWriter w(fs::path(o.out) / name);
      opt.trace = &w;
      const auto tr = run_distributed(sc, opt);
      std::printf("alpha_hat=%g alpha_bar=%g: %d iterations%s, iterations to 1e-5: %d\n", ah, ab,
                  tr.iterations(), tr.converged ? "" : " (max-iter)", iterations_to_accuracy(tr, 1e-5));
      if (!tr.converged) code = kExitMaxIter;
    }
  }
  return code;
}

int cmd_case_study(const Overrides& o) {
  const auto sc = Scenario::build(configure(o));
  const auto study = run_case_study(sc, run_options(sc.config));
  fs::create_directories(o.out);
  {
    ProfileWriter w(fs::path(o.out) / "case_profiles.csv");
    for (const auto* c : {&study.price_based, &study.network_aware}) {
      const std::string prefix = std::string(case_name(c->kind)) + ":";
      for (int k = 0; k < sc.feeder.num_supply_points(); ++k)
        w.write(prefix + "v:" + sc.feeder.supply_points()[static_cast<std::size_t>(k)].label(),
                c->trace.voltage.row(k).transpose());
      w.write(prefix + "theta", c->trace.temperature);
    }
  }
  json report;
  bool ok = true;
  for (const auto* c : {&study.price_based, &study.network_aware}) {
    json rows = json::array();
    for (const auto& v : c->violations)
      rows.push_back({{"kind", row_kind_name(v.kind)},
                      {"supply_point",
                       v.supply_point < 0 ? std::string("-")
                                          : sc.feeder.supply_points()[static_cast<std::size_t>(v.supply_point)].label()},
                      {"step", v.step},
                      {"slack", v.slack}});
    report[case_name(c->kind)] = {{"objective", c->objective},
                                  {"iterations", c->trace.iterations()},
                                  {"converged", c->trace.converged},
                                  {"max_soc_error", c->max_soc_error},
                                  {"max_theta_K", c->trace.temperature.maxCoeff()},
                                  {"min_voltage_pu", c->trace.voltage.minCoeff()},
                                  {"violations", rows}};
    std::printf("%-14s objective %.6g, %zu violations, max theta %.2f K, min |V| %.4f p.u.\n", case_name(c->kind),
                c->objective, c->violations.size(), c->trace.temperature.maxCoeff(), c->trace.voltage.minCoeff());
    ok = ok && c->trace.converged;
  }
  write_json(fs::path(o.out) / "violations.json", report);
  return ok ? kExitConverged : kExitMaxIter;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed EV charging coordination"};
  app.require_subcommand(1);

  Overrides run_o, oracle_o, sweep_o, case_o;
  auto* run = app.add_subcommand("run", "Run the distributed algorithm");
  add_common(run, run_o);
  run->add_option("--alpha-hat", run_o.alpha_hat, "Agent activity probability");
  run->add_option("--alpha-bar", run_o.alpha_bar, "Link failure probability");

  std::string method = "operator-splitting";
  auto* oracle = app.add_subcommand("oracle", "Solve the centralized problem");
  add_common(oracle, oracle_o);
  oracle->add_option("--method", method, "operator-splitting or active-set")
      ->check(CLI::IsMember({"operator-splitting", "active-set"}));

  std::vector<double> hats{1.0}, bars{0.0};
  auto* sweep = app.add_subcommand("sweep", "One trace per (alpha_hat, alpha_bar) pair");
  add_common(sweep, sweep_o);
  sweep->add_option("--alpha-hat-list", hats, "Activity probabilities")->delimiter(',');
  sweep->add_option("--alpha-bar-list", bars, "Link failure probabilities")->delimiter(',');

  auto* cases = app.add_subcommand("case-study", "Price-only versus network-aware coordination");
  add_common(cases, case_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (*run) return cmd_run(run_o);
    if (*oracle) return cmd_oracle(oracle_o, method);
    if (*sweep) return cmd_sweep(sweep_o, hats, bars);
    if (*cases) return cmd_case_study(case_o);
  } catch (const ScenarioInfeasible& e) {
    std::cerr << "error: " << e.what() << '\n';
    for (const auto& r : e.violated_rows()) std::cerr << "  " << r << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
