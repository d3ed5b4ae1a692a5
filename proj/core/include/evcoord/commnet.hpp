#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace evcoord {

/// Undirected, connected communication graph over the agents 0..N-1.
class CommGraph {
 public:
  /// Throws ConfigError on self-loops, duplicate or out-of-range edges, or
  /// when the graph is disconnected.
  CommGraph(int num_agents, std::vector<std::pair<int, int>> edges);

  int num_agents() const noexcept { return num_agents_; }
  const std::vector<std::pair<int, int>>& edges() const noexcept { return edges_; }
  const std::vector<int>& neighbors(int n) const { return adjacency_.at(static_cast<std::size_t>(n)); }
  int degree(int n) const { return static_cast<int>(neighbors(n).size()); }
  /// Index of edge {n, m} in edges(), or -1.
  int edge_index(int n, int m) const;

 private:
  int num_agents_;
  std::vector<std::pair<int, int>> edges_;  // (min, max), sorted
  std::vector<std::vector<int>> adjacency_;
  std::map<std::pair<int, int>, int> index_;
};

bool is_connected(int num_agents, const std::vector<std::pair<int, int>>& edges);

struct GeneratedGraph {
  std::vector<std::pair<int, int>> edges;
  int attempts = 0;
  double edge_prob = 0.0;
};

/// Erdős–Rényi G(n, p), redrawn until connected. Throws ConfigError after
/// `max_attempts` failures or for n < 2.
GeneratedGraph generate_connected_graph(int num_agents, double edge_prob, std::uint64_t seed,
                                        int max_attempts = 1000);

/// Per-agent activity probabilities α̂ₙ and per-edge message-failure
/// probabilities ᾱ⁽ⁿᵐ⁾ (indexed like CommGraph::edges()).
struct FailureModel {
  std::vector<double> activity;
  std::vector<double> link_failure;
  std::uint64_t seed = 0;

  static FailureModel uniform(const CommGraph& graph, double alpha_hat, double alpha_bar, std::uint64_t seed);
  void validate(const CommGraph& graph) const;
};

/// Agents and links that are up in one round.
struct RoundSample {
  std::vector<char> active_agents;
  std::vector<char> active_links;  // per edge of the graph

  int num_active_agents() const;
  int num_active_links() const;
};

/// Seeded sampler of the per-round activity and link state. Every round
/// consumes one draw per agent followed by one draw per edge, so the stream
/// stays aligned regardless of the probabilities.
class FailureProcess {
 public:
  FailureProcess(const CommGraph& graph, FailureModel model);

  RoundSample sample_round();
  std::int64_t rounds_sampled() const noexcept { return rounds_; }

 private:
  double uniform01();

  const CommGraph* graph_;
  FailureModel model_;
  std::mt19937_64 rng_;
  std::int64_t rounds_ = 0;
};

/// The only thing agents ever send each other.
struct DualMessage {
  int sender = -1;
  std::int64_t stamp = 0;
  Eigen::VectorXd lambda;
};

/// Delivers each published λ over the links that are up this round. One
/// draw per undirected edge: either both endpoints hear each other or
/// neither does.
class MessageBus {
 public:
  using Observer = std::function<void(int from, int to, const DualMessage&)>;

  explicit MessageBus(const CommGraph& graph);

  void set_observer(Observer observer) { observer_ = std::move(observer); }

  /// inbox[n] holds the messages agent n received this round.
  void deliver(const RoundSample& sample, const std::vector<DualMessage>& published);
  const std::vector<DualMessage>& inbox(int n) const { return inbox_.at(static_cast<std::size_t>(n)); }

  std::int64_t messages_delivered() const noexcept { return delivered_; }

 private:
  const CommGraph* graph_;
  std::vector<std::vector<DualMessage>> inbox_;
  Observer observer_;
  std::int64_t delivered_ = 0;
};

}  // namespace evcoord
