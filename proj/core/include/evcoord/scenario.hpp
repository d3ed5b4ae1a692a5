#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "evcoord/agent.hpp"
#include "evcoord/commnet.hpp"
#include "evcoord/coupling.hpp"
#include "evcoord/feeder.hpp"
#include "evcoord/fleet.hpp"
#include "evcoord/localqp.hpp"
#include "evcoord/thermal.hpp"

namespace evcoord {

/// Case 1 ignores the network (price-only), Case 2 enforces Σ Γₙxₙ ≤ w.
enum class CaseKind { price_based, network_aware };

CaseKind parse_case(std::string_view text);
const char* case_name(CaseKind kind) noexcept;

struct GraphSettings {
  int n_agents = 0;  // 0: take the fleet size
  double edge_prob = 0.5;
  std::uint64_t seed = 1;
  std::filesystem::path edge_file;  // optional edge list, overrides the generator
};

struct AdmmSettings {
  double rho = 1.0;
  int max_iter = 10000;
  double eps_dual = 1e-6;
  double eps_primal = 1e-6;
  int stop_window = 10;
  ProximalScaling scaling = ProximalScaling::as_printed;
  StalePolicy stale = StalePolicy::edge_state;
  /// Run the agents on the row-equilibrated coupling system.
  bool equilibrate = true;
  LocalSolveOptions local;
  int threads = 1;
};

struct FailureSettings {
  double alpha_hat = 1.0;
  double alpha_bar = 0.0;
  std::uint64_t seed = 1;
  std::vector<double> activity;      // per agent; overrides alpha_hat when set
  std::vector<double> link_failure;  // per edge; overrides alpha_bar when set
};

struct ScenarioConfig {
  std::string name;
  std::filesystem::path base_dir;

  int horizon = 0;
  double step_hours = 0.5;

  std::filesystem::path feeder_file;
  std::filesystem::path fleet_file;
  std::filesystem::path price_file;
  std::filesystem::path baseline_file;
  std::filesystem::path disturbance_file;

  ThermalParams thermal;
  double voltage_band_percent = 4.6;

  GraphSettings graph;
  AdmmSettings admm;
  FailureSettings failure;
  CaseKind case_kind = CaseKind::network_aware;

  std::string source_json;  // the scenario file as read
};

/// Parses a scenario JSON file; relative paths resolve against its directory.
/// Throws ConfigError on missing keys, missing files or bad values.
ScenarioConfig load_config(const std::filesystem::path& scenario_file);
ScenarioConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir);

/// Feeder JSON: bases, head voltage, nodes and lines with impedances in ohms.
FeederModel load_feeder(const std::filesystem::path& file, const std::vector<SupplyPoint>& customers);
std::vector<EvSpec> load_fleet(const std::filesystem::path& file);
Eigen::VectorXd load_price(const std::filesystem::path& file, int horizon);
/// ϰ×T real and reactive baseline loads in supply-point order; absent entries are zero.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> load_baseline(const std::filesystem::path& file,
                                                          const FeederModel& feeder, int horizon);
DisturbanceSeries load_disturbance(const std::filesystem::path& file, int horizon);
std::vector<std::pair<int, int>> load_edges(const std::filesystem::path& file);

/// Everything a run needs, validated and assembled.
struct Scenario {
  ScenarioConfig config;
  FeederModel feeder;
  std::vector<EvSpec> fleet;
  std::vector<BatteryPolytope> polytopes;
  Eigen::VectorXd price;
  SensitivityMatrices sensitivity;
  BaselineSeries baseline;
  DisturbanceSeries disturbance;
  ThermalResponse thermal;
  Eigen::VectorXd thermal_headroom;
  VoltageLimits limits;
  CouplingSystem network;    // Σ Γₙxₙ ≤ w
  CouplingSystem uncoupled;  // no network rows
  CommGraph graph;
  int graph_attempts = 0;    // 0 when read from a file

  int horizon() const noexcept { return config.horizon; }
  int num_agents() const noexcept { return static_cast<int>(fleet.size()); }
  const CouplingSystem& coupling(CaseKind kind) const {
    return kind == CaseKind::network_aware ? network : uncoupled;
  }

  /// Total transformer current i_d + Σₙ xₙ·1000/v′ for a fleet schedule.
  Eigen::VectorXd total_current(const Eigen::MatrixXd& x_fleet) const;
  Eigen::VectorXd temperature(const Eigen::MatrixXd& x_fleet) const;
  /// ϰ×T voltage magnitudes √v (p.u.).
  Eigen::MatrixXd voltage_magnitude(const Eigen::MatrixXd& x_fleet) const;
  double objective(const Eigen::MatrixXd& x_fleet) const;
  Eigen::VectorXd per_ev_cost(const Eigen::MatrixXd& x_fleet) const;

  static Scenario load(const std::filesystem::path& scenario_file);
  static Scenario build(ScenarioConfig config);
};

}  // namespace evcoord
