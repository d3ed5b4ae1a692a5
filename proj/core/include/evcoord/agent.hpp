#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "evcoord/commnet.hpp"
#include "evcoord/coupling.hpp"
#include "evcoord/fleet.hpp"
#include "evcoord/localqp.hpp"

namespace evcoord {

/// What a failed link contributes to an agent's update.
enum class StalePolicy {
  /// Per-edge state: the edge's share of ν and the pair (λₙ, λₘ) in the
  /// proximal sum change only in rounds where the link is up.
  edge_state,
  /// Reuse the last λₘ heard while using the current λₙ, in ν and in the
  /// proximal sum alike.
  last_value,
};

struct AgentConfig {
  double rho = 1.0;
  ProximalScaling scaling = ProximalScaling::as_printed;
  StalePolicy stale = StalePolicy::edge_state;
  LocalSolveOptions local;
};

/// What an agent remembers about one neighbour.
struct NeighborValue {
  Eigen::VectorXd lambda;      // last λₘ heard
  std::int64_t stamp = 0;      // round that λₘ was produced in
  Eigen::VectorXd own_lambda;  // λₙ at that exchange
  bool fresh = false;          // heard this round
};

/// One EV's side of the dual-consensus ADMM round:
///
///   νₙ ← νₙ + ρ Σₘ (λₙ - λₘ)
///   uₙ ← argmin fₙ(u) + proximal term          (local QP)
///   λₙ ← (Σₘ(λₙ + λₘ) - νₙ/ρ + ξₙuₙ/ρ - w/(Nρ)) / (2|𝒩ₙ|)
///
/// λₘ comes from the neighbour cache. With every link up this is exactly
/// the update above; how a silent link enters is set by StalePolicy. The
/// agent reads only its own state, the cache, Γₙ, w, N and ρ.
class Agent {
 public:
  Agent(int id, EvSpec spec, BatteryPolytope polytope, const CouplingSystem& coupling, Eigen::VectorXd price,
        double step_hours, std::vector<int> neighbors, AgentConfig config = {});

  int id() const noexcept { return id_; }
  const EvSpec& spec() const noexcept { return spec_; }
  const BatteryPolytope& polytope() const noexcept { return polytope_; }
  const std::vector<int>& neighbors() const noexcept { return neighbors_; }
  int degree() const noexcept { return static_cast<int>(neighbors_.size()); }

  const Eigen::VectorXd& lambda() const noexcept { return lambda_; }
  const Eigen::VectorXd& nu() const noexcept { return nu_; }
  const Eigen::VectorXd& x() const noexcept { return x_; }
  const Eigen::VectorXd& s() const noexcept { return s_; }
  std::int64_t stamp() const noexcept { return stamp_; }
  const std::map<int, NeighborValue>& cache() const noexcept { return cache_; }
  /// ‖Δλ‖∞ of the most recent update this agent actually performed.
  double last_change() const noexcept { return last_change_; }

  /// Stores a neighbour's λ unless an equally new or newer value is cached.
  void receive(const DualMessage& message);

  void dual_step();
  void primal_step();
  void lambda_step();
  /// Inactive round: nothing changes except the round stamp.
  void freeze();

  /// receive* → dual_step → primal_step → lambda_step for an active round.
  void step(std::span<const DualMessage> inbox);

  DualMessage broadcast() const { return {id_, stamp_, lambda_}; }

 private:
  int id_;
  EvSpec spec_;
  BatteryPolytope polytope_;
  const CouplingSystem* coupling_;
  Eigen::VectorXd price_;
  double step_hours_;
  std::vector<int> neighbors_;
  AgentConfig config_;

  Eigen::VectorXd lambda_;
  Eigen::VectorXd nu_;
  Eigen::VectorXd x_;
  Eigen::VectorXd s_;
  Eigen::VectorXd neighbor_sum_;  // Σₘ(λₙ + λₘ) for the current round
  std::map<int, NeighborValue> cache_;
  std::int64_t stamp_ = 0;
  double last_change_;
};

}  // namespace evcoord
