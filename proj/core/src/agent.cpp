#include "evcoord/agent.hpp"

#include <limits>

#include "evcoord/errors.hpp"

namespace evcoord {

Agent::Agent(int id, EvSpec spec, BatteryPolytope polytope, const CouplingSystem& coupling, Eigen::VectorXd price,
             double step_hours, std::vector<int> neighbors, AgentConfig config)
    : id_(id),
      spec_(std::move(spec)),
      polytope_(std::move(polytope)),
      coupling_(&coupling),
      price_(std::move(price)),
      step_hours_(step_hours),
      neighbors_(std::move(neighbors)),
      config_(config),
      last_change_(std::numeric_limits<double>::infinity()) {
  if (neighbors_.empty()) throw ConfigError("agent " + std::to_string(id_) + " has no neighbours");
  if (!(config_.rho > 0.0)) throw ConfigError("penalty rho must be positive");
  const int m = coupling.rows();
  lambda_ = Eigen::VectorXd::Zero(m);
  nu_ = Eigen::VectorXd::Zero(m);
  neighbor_sum_ = Eigen::VectorXd::Zero(m);
  x_ = polytope_.feasible_point;
  s_ = Eigen::VectorXd::Zero(m);
  for (int nb : neighbors_) cache_[nb] = {Eigen::VectorXd::Zero(m), 0, Eigen::VectorXd::Zero(m), false};
}

void Agent::receive(const DualMessage& message) {
  auto it = cache_.find(message.sender);
  if (it == cache_.end()) return;  // not a neighbour
  if (message.lambda.size() != lambda_.size()) throw ContractError("dual message of wrong length");
  if (message.stamp >= it->second.stamp) {
    it->second.lambda = message.lambda;
    it->second.stamp = message.stamp;
    it->second.fresh = true;
  }
}

void Agent::dual_step() {
  neighbor_sum_.setZero();
  if (config_.stale == StalePolicy::last_value) {
    for (auto& [nb, value] : cache_) {
      nu_ += config_.rho * (lambda_ - value.lambda);
      neighbor_sum_ += lambda_ + value.lambda;
      value.fresh = false;
    }
    return;
  }
  for (auto& [nb, value] : cache_) {
    if (value.fresh) {
      nu_ += config_.rho * (lambda_ - value.lambda);
      value.own_lambda = lambda_;
      value.fresh = false;
    }
    neighbor_sum_ += value.own_lambda + value.lambda;
  }
}

void Agent::primal_step() {
  const auto qp = make_local_qp(polytope_, *coupling_, id_, spec_, price_, step_hours_, nu_, neighbor_sum_,
                                config_.rho, degree(), config_.scaling);
  const auto sol = solve(qp, &x_, config_.local);
  x_ = sol.x;
  s_ = sol.s;
}

void Agent::lambda_step() {
  const double rho = config_.rho;
  const double n_agents = static_cast<double>(coupling_->customers());
  Eigen::VectorXd xi_u = s_;
  if (coupling_->rows() > 0) xi_u += coupling_->apply(id_, x_);
  Eigen::VectorXd next =
      (neighbor_sum_ - nu_ / rho + xi_u / rho - coupling_->headroom() / (n_agents * rho)) / (2.0 * degree());
  last_change_ = next.size() > 0 ? (next - lambda_).lpNorm<Eigen::Infinity>() : 0.0;
  lambda_ = std::move(next);
  ++stamp_;
}

void Agent::freeze() { ++stamp_; }

void Agent::step(std::span<const DualMessage> inbox) {
  for (const auto& msg : inbox) receive(msg);
  dual_step();
  primal_step();
  lambda_step();
}

}  // namespace evcoord
