#include "evcoord/commnet.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "evcoord/errors.hpp"

namespace evcoord {

bool is_connected(int num_agents, const std::vector<std::pair<int, int>>& edges) {
  if (num_agents <= 0) return false;
  std::vector<int> parent(static_cast<std::size_t>(num_agents));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
      v = parent[static_cast<std::size_t>(v)];
    }
    return v;
  };
  int components = num_agents;
  for (auto [a, b] : edges) {
    const int ra = find(a);
    const int rb = find(b);
    if (ra != rb) {
      parent[static_cast<std::size_t>(ra)] = rb;
      --components;
    }
  }
  return components == 1;
}

CommGraph::CommGraph(int num_agents, std::vector<std::pair<int, int>> edges)
    : num_agents_(num_agents), adjacency_(static_cast<std::size_t>(std::max(num_agents, 0))) {
  if (num_agents < 2) throw ConfigError("communication graph needs at least two agents");
  for (auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_agents || b >= num_agents) throw ConfigError("edge endpoint out of range");
    if (a == b) throw ConfigError("self-loop on agent " + std::to_string(a));
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) throw ConfigError("duplicate edge");
  if (!is_connected(num_agents, edges)) throw ConfigError("communication graph is not connected");
  edges_ = std::move(edges);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto [a, b] = edges_[e];
    adjacency_[static_cast<std::size_t>(a)].push_back(b);
    adjacency_[static_cast<std::size_t>(b)].push_back(a);
    index_[{a, b}] = static_cast<int>(e);
  }
  for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
}

int CommGraph::edge_index(int n, int m) const {
  auto it = index_.find({std::min(n, m), std::max(n, m)});
  return it == index_.end() ? -1 : it->second;
}

GeneratedGraph generate_connected_graph(int num_agents, double edge_prob, std::uint64_t seed, int max_attempts) {
  if (num_agents < 2) throw ConfigError("need at least two agents");
  if (!(edge_prob > 0.0 && edge_prob <= 1.0)) throw ConfigError("edge probability must lie in (0,1]");
  std::mt19937_64 rng(seed);
  GeneratedGraph g;
  g.edge_prob = edge_prob;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    g.edges.clear();
    for (int a = 0; a < num_agents; ++a) {
      for (int b = a + 1; b < num_agents; ++b) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        if (u < edge_prob) g.edges.emplace_back(a, b);
      }
    }
    if (is_connected(num_agents, g.edges)) {
      g.attempts = attempt;
      return g;
    }
  }
  throw ConfigError("no connected graph after " + std::to_string(max_attempts) + " attempts");
}

FailureModel FailureModel::uniform(const CommGraph& graph, double alpha_hat, double alpha_bar, std::uint64_t seed) {
  FailureModel m;
  m.activity.assign(static_cast<std::size_t>(graph.num_agents()), alpha_hat);
  m.link_failure.assign(graph.edges().size(), alpha_bar);
  m.seed = seed;
  m.validate(graph);
  return m;
}

void FailureModel::validate(const CommGraph& graph) const {
  if (activity.size() != static_cast<std::size_t>(graph.num_agents()) || link_failure.size() != graph.edges().size()) {
    throw ConfigError("failure model does not match the graph");
  }
  for (double a : activity) {
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("activity probability must lie in (0,1]");
  }
  for (double f : link_failure) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("link failure probability must lie in [0,1]");
  }
}

int RoundSample::num_active_agents() const {
  return static_cast<int>(std::count(active_agents.begin(), active_agents.end(), 1));
}

int RoundSample::num_active_links() const {
  return static_cast<int>(std::count(active_links.begin(), active_links.end(), 1));
}

FailureProcess::FailureProcess(const CommGraph& graph, FailureModel model)
    : graph_(&graph), model_(std::move(model)), rng_(model_.seed) {
  model_.validate(graph);
}

double FailureProcess::uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

RoundSample FailureProcess::sample_round() {
  RoundSample s;
  const auto n = static_cast<std::size_t>(graph_->num_agents());
  s.active_agents.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.active_agents[i] = uniform01() < model_.activity[i] ? 1 : 0;
  const auto& edges = graph_->edges();
  s.active_links.resize(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const bool delivered = uniform01() >= model_.link_failure[e];
    const auto [a, b] = edges[e];
    s.active_links[e] =
        (delivered && s.active_agents[static_cast<std::size_t>(a)] && s.active_agents[static_cast<std::size_t>(b)]) ? 1 : 0;
  }
  ++rounds_;
  return s;
}

MessageBus::MessageBus(const CommGraph& graph)
    : graph_(&graph), inbox_(static_cast<std::size_t>(graph.num_agents())) {}

void MessageBus::deliver(const RoundSample& sample, const std::vector<DualMessage>& published) {
  for (auto& box : inbox_) box.clear();
  const auto& edges = graph_->edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!sample.active_links[e]) continue;
    const auto [a, b] = edges[e];
    const auto& from_a = published.at(static_cast<std::size_t>(a));
    const auto& from_b = published.at(static_cast<std::size_t>(b));
    inbox_[static_cast<std::size_t>(b)].push_back(from_a);
    inbox_[static_cast<std::size_t>(a)].push_back(from_b);
    if (observer_) {
      observer_(a, b, from_a);
      observer_(b, a, from_b);
    }
    delivered_ += 2;
  }
}

}  // namespace evcoord
