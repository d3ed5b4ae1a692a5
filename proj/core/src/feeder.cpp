#include "evcoord/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <set>

#include "evcoord/errors.hpp"

namespace evcoord {

char phase_char(Phase p) noexcept { return static_cast<char>('a' + phase_index(p)); }

Phase parse_phase(char c) {
  switch (c) {
    case 'a': case 'A': return Phase::a;
    case 'b': case 'B': return Phase::b;
    case 'c': case 'C': return Phase::c;
    default: throw ModelError(std::string("unknown phase '") + c + "'");
  }
}

std::vector<Phase> parse_phases(std::string_view s) {
  std::set<Phase> seen;
  for (char c : s) {
    if (!seen.insert(parse_phase(c)).second) {
      throw ModelError("duplicate phase in '" + std::string(s) + "'");
    }
  }
  if (seen.empty()) throw ModelError("empty phase set");
  return {seen.begin(), seen.end()};
}

std::string SupplyPoint::label() const { return std::to_string(node) + ":" + phase_char(phase); }

SupplyPoint SupplyPoint::parse(std::string_view label) {
  const auto colon = label.find(':');
  if (colon == std::string_view::npos || colon + 2 != label.size()) {
    throw ModelError("supply point must look like 'node:phase', got '" + std::string(label) + "'");
  }
  SupplyPoint sp;
  try {
    sp.node = std::stoi(std::string(label.substr(0, colon)));
  } catch (const std::exception&) {
    throw ModelError("bad node id in supply point '" + std::string(label) + "'");
  }
  sp.phase = parse_phase(label[colon + 1]);
  return sp;
}

bool LineSegment::has_phase(Phase p) const {
  return std::find(phases.begin(), phases.end(), p) != phases.end();
}

std::complex<double> LineSegment::z(Phase p, Phase q) const {
  if (auto it = impedance.find({p, q}); it != impedance.end()) return it->second;
  if (auto it = impedance.find({q, p}); it != impedance.end()) return it->second;
  return {0.0, 0.0};
}

FeederModel::FeederModel(std::vector<int> nodes, std::vector<LineSegment> lines,
                         std::vector<SupplyPoint> customers, double v0, double s_base_kva)
    : nodes_(std::move(nodes)),
      lines_(std::move(lines)),
      customers_(std::move(customers)),
      v0_(v0),
      s_base_kva_(s_base_kva) {
  if (!(v0_ > 0.0)) throw ModelError("v0 must be positive");
  if (!(s_base_kva_ > 0.0)) throw ModelError("s_base_kva must be positive");

  std::sort(nodes_.begin(), nodes_.end());
  if (std::adjacent_find(nodes_.begin(), nodes_.end()) != nodes_.end()) {
    throw ModelError("duplicate node id");
  }
  if (nodes_.empty() || nodes_.front() != 0) throw ModelError("node 0 (feeder head) is required");
  for (std::size_t i = 0; i < nodes_.size(); ++i) node_slot_[nodes_[i]] = i;

  if (lines_.size() + 1 != nodes_.size()) {
    throw ModelError("radial feeder needs exactly |nodes|-1 lines");
  }

  std::vector<int> parent_line(nodes_.size(), -1);
  std::vector<std::vector<int>> children(nodes_.size());
  for (std::size_t li = 0; li < lines_.size(); ++li) {
    const auto& line = lines_[li];
    if (!has_node(line.from_node) || !has_node(line.to_node)) {
      throw ModelError("line references unknown node");
    }
    if (line.to_node == 0 || line.to_node == line.from_node) {
      throw ModelError("line into the feeder head or self-loop");
    }
    auto& slot = parent_line[node_slot_.at(line.to_node)];
    if (slot != -1) throw ModelError("node " + std::to_string(line.to_node) + " has two parent lines");
    slot = static_cast<int>(li);
    children[node_slot_.at(line.from_node)].push_back(static_cast<int>(li));
    if (line.phases.empty()) throw ModelError("line without phases");
    for (const auto& [key, z] : line.impedance) {
      if (!line.has_phase(key.first) || !line.has_phase(key.second)) {
        throw ModelError("impedance key on undeclared phase");
      }
      if (auto it = line.impedance.find({key.second, key.first});
          it != line.impedance.end() && std::abs(it->second - z) > 1e-12 * (1.0 + std::abs(z))) {
        throw ModelError("asymmetric impedance map");
      }
    }
  }

  // Breadth-first from the root; every node must be reached exactly once.
  node_phases_.assign(nodes_.size(), {});
  root_paths_.assign(nodes_.size(), {});
  node_phases_[0] = {Phase::a, Phase::b, Phase::c};
  std::vector<bool> seen(nodes_.size(), false);
  seen[0] = true;
  std::queue<std::size_t> frontier;
  frontier.push(0);
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (int li : children[u]) {
      const auto& line = lines_[static_cast<std::size_t>(li)];
      const auto v = node_slot_.at(line.to_node);
      if (seen[v]) throw ModelError("cycle in feeder topology");
      seen[v] = true;
      for (Phase p : line.phases) {
        if (std::find(node_phases_[u].begin(), node_phases_[u].end(), p) == node_phases_[u].end()) {
          throw ModelError("line phase not present at upstream node");
        }
      }
      node_phases_[v] = line.phases;
      root_paths_[v] = root_paths_[u];
      root_paths_[v].push_back(li);
      frontier.push(v);
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw ModelError("feeder is not connected to the head");
  }

  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    for (Phase p : node_phases_[i]) supply_points_.push_back({nodes_[i], p});
  }

  customer_rows_.reserve(customers_.size());
  for (const auto& sp : customers_) {
    try {
      customer_rows_.push_back(supply_index(sp));
    } catch (const InvalidQuery&) {
      throw ModelError("customer attached to unknown supply point " + sp.label());
    }
  }
}

bool FeederModel::has_node(int node) const { return node_slot_.contains(node); }

const std::vector<Phase>& FeederModel::phases_at(int node) const {
  auto it = node_slot_.find(node);
  if (it == node_slot_.end()) throw InvalidQuery("unknown node " + std::to_string(node));
  return node_phases_[it->second];
}

int FeederModel::supply_index(const SupplyPoint& sp) const {
  auto it = std::lower_bound(supply_points_.begin(), supply_points_.end(), sp);
  if (it == supply_points_.end() || *it != sp) {
    throw InvalidQuery("no supply point " + sp.label());
  }
  return static_cast<int>(it - supply_points_.begin());
}

Eigen::MatrixXd FeederModel::incidence() const {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(num_supply_points(), num_customers());
  for (int n = 0; n < num_customers(); ++n) u(customer_row(n), n) = 1.0;
  return u;
}

const std::vector<int>& FeederModel::root_path(int node) const {
  auto it = node_slot_.find(node);
  if (it == node_slot_.end()) throw InvalidQuery("unknown node " + std::to_string(node));
  return root_paths_[it->second];
}

std::complex<double> FeederModel::path_impedance(int k, int k_hat, Phase phi, Phase phi_hat) const {
  if (k == 0 || k_hat == 0) throw InvalidQuery("the feeder head has no supply points");
  const auto& phases_k = phases_at(k);
  const auto& phases_k_hat = phases_at(k_hat);
  if (std::find(phases_k.begin(), phases_k.end(), phi) == phases_k.end() ||
      std::find(phases_k_hat.begin(), phases_k_hat.end(), phi_hat) == phases_k_hat.end()) {
    throw InvalidQuery("phase not present at node");
  }
  // Root paths are prefixes of each other up to the branching point.
  const auto& path_a = root_path(k);
  const auto& path_b = root_path(k_hat);
  std::complex<double> total{0.0, 0.0};
  for (std::size_t i = 0; i < std::min(path_a.size(), path_b.size()) && path_a[i] == path_b[i]; ++i) {
    total += lines_[static_cast<std::size_t>(path_a[i])].z(phi, phi_hat);
  }
  return total;
}

SensitivityMatrices build_sensitivity(const FeederModel& feeder) {
  const int n_sp = feeder.num_supply_points();
  const auto& sps = feeder.supply_points();
  const std::complex<double> omega = std::polar(1.0, -2.0 * std::numbers::pi / 3.0);

  SensitivityMatrices sens;
  sens.R.resize(n_sp, n_sp);
  sens.X.resize(n_sp, n_sp);
  for (int i = 0; i < n_sp; ++i) {
    for (int j = 0; j < n_sp; ++j) {
      const auto z = feeder.path_impedance(sps[i].node, sps[j].node, sps[i].phase, sps[j].phase);
      const int shift = phase_index(sps[i].phase) - phase_index(sps[j].phase);
      const auto rotated = std::conj(z) * std::pow(omega, shift);
      sens.R(i, j) = 2.0 * rotated.real();
      sens.X(i, j) = -2.0 * rotated.imag();
    }
  }
  sens.kw_to_pu = 1.0 / feeder.s_base_kva();
  sens.D = -(sens.R * feeder.incidence()) * sens.kw_to_pu;
  return sens;
}

BaselineSeries BaselineSeries::from_loads(const FeederModel& feeder, const SensitivityMatrices& sens,
                                          Eigen::MatrixXd p_kw, Eigen::MatrixXd q_kvar) {
  const auto n_sp = feeder.num_supply_points();
  if (p_kw.rows() != n_sp || q_kvar.rows() != n_sp || p_kw.cols() != q_kvar.cols()) {
    throw ContractError("baseline load dimensions do not match the supply points");
  }
  BaselineSeries b;
  b.v_squared = (-(sens.R * p_kw + sens.X * q_kvar) * sens.kw_to_pu).array() + feeder.v0();
  b.p_kw = std::move(p_kw);
  b.q_kvar = std::move(q_kvar);
  return b;
}

Eigen::MatrixXd voltage_profile(const SensitivityMatrices& sens, const BaselineSeries& baseline,
                                const Eigen::MatrixXd& x_fleet) {
  if (x_fleet.rows() != sens.D.cols() || x_fleet.cols() != baseline.v_squared.cols() ||
      baseline.v_squared.rows() != sens.D.rows()) {
    throw ContractError("voltage_profile: fleet matrix does not match the feeder/horizon");
  }
  return baseline.v_squared + sens.D * x_fleet;
}

}  // namespace evcoord
