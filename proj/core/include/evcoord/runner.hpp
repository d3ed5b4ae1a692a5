#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "evcoord/centralized.hpp"
#include "evcoord/commnet.hpp"
#include "evcoord/coupling.hpp"
#include "evcoord/io.hpp"
#include "evcoord/scenario.hpp"

namespace evcoord {

/// What the stopping rule looks at after round τ.
struct StopCheck {
  int iteration = 0;
  double max_dual_change = 0.0;  // maxₙ ‖λₙ^[τ] - λₙ^[τ-1]‖∞ over each agent's last update
  double primal_residual = 0.0;  // ‖(Σ Γₙxₙ - w)₊‖∞
};

/// True once the last `window` rounds (at least two) all have both
/// quantities under tolerance. A round in which an agent heard nothing
/// leaves its λ unchanged, so one quiet round alone proves little.
bool stopping_criterion(std::span<const StopCheck> history, double eps_dual, double eps_primal,
                        int window = 2) noexcept;

struct RunOptions {
  CaseKind case_kind = CaseKind::network_aware;
  AdmmSettings admm;
  FailureSettings failure;
  /// obj* for the Error column; NaN errors without it.
  std::optional<double> reference_objective;
  TraceWriter* trace = nullptr;
  MessageBus::Observer observer;
};

RunOptions run_options(const ScenarioConfig& config);

struct RunTrace {
  std::vector<IterationRecord> records;
  Eigen::MatrixXd x;            // N×T final schedules
  Eigen::MatrixXd voltage;      // ϰ×T magnitudes √v
  Eigen::VectorXd temperature;  // θ(1..T)
  Eigen::VectorXd per_ev_cost;
  std::vector<Eigen::VectorXd> lambda;
  bool converged = false;
  bool max_iter_warning = false;
  std::int64_t messages = 0;

  int iterations() const noexcept { return static_cast<int>(records.size()); }
};

/// Algorithm 1 with synchronous rounds: sample activity and links, deliver
/// last round's broadcasts, update the active agents, freeze the rest.
RunTrace run_distributed(const Scenario& scenario, const RunOptions& options);

/// First iteration after which |Error| stays below tol for the rest of the
/// trace; -1 when the final record is not below tol.
int iterations_to_accuracy(const RunTrace& trace, double tol);

/// Centralized optimum of the chosen case.
CentralSolution solve_centralized(const Scenario& scenario, CaseKind kind, const CentralOptions& options = {});

struct CaseResult {
  CaseKind kind = CaseKind::network_aware;
  RunTrace trace;
  std::vector<Violation> violations;  // against the network limits
  double objective = 0.0;
  double max_soc_error = 0.0;         // maxₙ |σₙ(dₙ) - σₙ*|
};

struct CaseStudy {
  CaseResult price_based;
  CaseResult network_aware;
};

/// Case 1 (price only) against Case 2 (network aware); violations of either
/// schedule are reported against the network limits with tolerance ε_primal.
CaseStudy run_case_study(const Scenario& scenario, RunOptions options);

}  // namespace evcoord
