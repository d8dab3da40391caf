#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lgtl/errors.hpp"

namespace lgtl {

using NodeId = std::uint32_t;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

/// Undirected simple graph with node features and optional labels.
///
/// Adjacency is stored as CSR. Construction symmetrizes the edge list, drops
/// self-loops and collapses duplicates, so neighbor lists are always sorted,
/// unique and loop-free. Instances are immutable.
class Graph {
 public:
  using Edge = std::pair<NodeId, NodeId>;

  Graph() = default;

  Graph(std::size_t num_nodes, std::span<const Edge> edges, FeatureMatrix features,
        std::optional<std::vector<int>> labels = std::nullopt, int class_count = 0)
      : features_(std::move(features)), labels_(std::move(labels)) {
    if (static_cast<std::size_t>(features_.rows()) != num_nodes)
      throw ShapeError("feature rows (" + std::to_string(features_.rows()) + ") != num_nodes (" +
                       std::to_string(num_nodes) + ")");
    if (labels_ && labels_->size() != num_nodes)
      throw ShapeError("label count (" + std::to_string(labels_->size()) + ") != num_nodes (" +
                       std::to_string(num_nodes) + ")");

    std::vector<std::vector<NodeId>> lists(num_nodes);
    for (const auto& [a, b] : edges) {
      if (a >= num_nodes || b >= num_nodes)
        throw RangeError("edge (" + std::to_string(a) + ", " + std::to_string(b) + ") out of range for " +
                         std::to_string(num_nodes) + " nodes");
      if (a == b) continue;
      lists[a].push_back(b);
      lists[b].push_back(a);
    }
    offsets_.assign(num_nodes + 1, 0);
    for (std::size_t u = 0; u < num_nodes; ++u) {
      auto& l = lists[u];
      std::sort(l.begin(), l.end());
      l.erase(std::unique(l.begin(), l.end()), l.end());
      offsets_[u + 1] = offsets_[u] + l.size();
    }
    adjacency_.reserve(offsets_.back());
    for (auto& l : lists) adjacency_.insert(adjacency_.end(), l.begin(), l.end());

    if (labels_) {
      int max_label = -1;
      for (int y : *labels_) {
        if (y < 0) throw RangeError("negative class label " + std::to_string(y));
        max_label = std::max(max_label, y);
      }
      class_count_ = std::max(class_count, max_label + 1);
    }
  }

  std::size_t num_nodes() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_edges() const noexcept { return adjacency_.size() / 2; }
  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }

  std::span<const NodeId> neighbors(NodeId u) const {
    check_node(u);
    return {adjacency_.data() + offsets_[u], adjacency_.data() + offsets_[u + 1]};
  }
  std::size_t degree(NodeId u) const {
    check_node(u);
    return offsets_[u + 1] - offsets_[u];
  }
  bool has_edge(NodeId u, NodeId v) const {
    auto n = neighbors(u);
    return std::binary_search(n.begin(), n.end(), v);
  }

  const FeatureMatrix& features() const noexcept { return features_; }
  auto feature(NodeId u) const {
    check_node(u);
    return features_.row(u);
  }

  bool has_labels() const noexcept { return labels_.has_value(); }
  int label(NodeId u) const {
    check_node(u);
    return labels().at(u);
  }
  const std::vector<int>& labels() const {
    if (!labels_) throw PreconditionError("graph has no labels");
    return *labels_;
  }
  int class_count() const noexcept { return class_count_; }

  /// Undirected edge list with a < b, in CSR order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges());
    for (NodeId u = 0; u < num_nodes(); ++u)
      for (NodeId v : neighbors(u))
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  Graph with_labels(std::vector<int> labels, int class_count = 0) const {
    auto e = edges();
    return Graph(num_nodes(), e, features_, std::move(labels), class_count);
  }
  Graph with_features(FeatureMatrix features) const {
    auto e = edges();
    return Graph(num_nodes(), e, std::move(features), labels_, class_count_);
  }

  void check_node(NodeId u) const {
    if (u >= num_nodes())
      throw RangeError("node " + std::to_string(u) + " out of range for " + std::to_string(num_nodes()) +
                       " nodes");
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> adjacency_;
  FeatureMatrix features_;
  std::optional<std::vector<int>> labels_;
  int class_count_ = 0;
};

/// Nodes at shortest-path distance exactly `hop` from `center`.
struct HopSet {
  NodeId center = 0;
  std::size_t hop = 0;
  std::vector<NodeId> members;  // sorted
};

/// BFS layers 0..max_hop around u; layer k holds the sorted nodes at distance k.
/// Layers past the end of u's component are empty.
inline std::vector<std::vector<NodeId>> hop_layers(const Graph& g, NodeId u, std::size_t max_hop) {
  g.check_node(u);
  std::vector<std::vector<NodeId>> layers(max_hop + 1);
  std::vector<bool> seen(g.num_nodes(), false);
  layers[0].push_back(u);
  seen[u] = true;
  for (std::size_t k = 1; k <= max_hop; ++k) {
    for (NodeId w : layers[k - 1])
      for (NodeId v : g.neighbors(w))
        if (!seen[v]) {
          seen[v] = true;
          layers[k].push_back(v);
        }
    std::sort(layers[k].begin(), layers[k].end());
    if (layers[k].empty()) break;
  }
  return layers;
}

inline HopSet k_hop(const Graph& g, NodeId u, std::size_t k) {
  auto layers = hop_layers(g, u, k);
  return HopSet{u, k, std::move(layers[k])};
}

/// Hop distance of every node from u, or -1 when further than max_hop / unreachable.
inline std::vector<int> hop_distances(const Graph& g, NodeId u, std::size_t max_hop) {
  std::vector<int> dist(g.num_nodes(), -1);
  auto layers = hop_layers(g, u, max_hop);
  for (std::size_t k = 0; k < layers.size(); ++k)
    for (NodeId v : layers[k]) dist[v] = static_cast<int>(k);
  return dist;
}

/// Fraction of undirected edges whose endpoints share a label.
inline double edge_homophily(const Graph& g) {
  const auto& y = g.labels();
  if (g.num_edges() == 0) throw DomainError("edge homophily undefined on a graph without edges");
  std::size_t same = 0;
  for (NodeId u = 0; u < g.num_nodes(); ++u)
    for (NodeId v : g.neighbors(u))
      if (u < v && y[u] == y[v]) ++same;
  return static_cast<double>(same) / static_cast<double>(g.num_edges());
}

/// Fraction of u's 1-hop neighbors sharing u's label. Isolated nodes are a domain error.
inline double node_homophily(const Graph& g, NodeId u) {
  const auto& y = g.labels();
  auto nbrs = g.neighbors(u);
  if (nbrs.empty()) throw DomainError("node homophily undefined for isolated node " + std::to_string(u));
  std::size_t same = 0;
  for (NodeId v : nbrs) same += (y[v] == y[u]);
  return static_cast<double>(same) / static_cast<double>(nbrs.size());
}

/// C_u^i: fraction of the exactly-i-hop neighbors of u sharing u's label.
inline double hop_consistency(const Graph& g, NodeId u, std::size_t hop) {
  const auto& y = g.labels();
  auto members = k_hop(g, u, hop).members;
  if (members.empty())
    throw DomainError("hop " + std::to_string(hop) + " of node " + std::to_string(u) + " is empty");
  std::size_t same = 0;
  for (NodeId v : members) same += (y[v] == y[u]);
  return static_cast<double>(same) / static_cast<double>(members.size());
}

}  // namespace lgtl
