#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lgtl/graph.hpp"
#include "lgtl/rng.hpp"

namespace lgtl {

struct SbmConfig {
  std::size_t nodes_per_class = 100;
  std::size_t class_count = 2;
  double p_intra = 0.1;
  double p_inter = 0.01;
  std::size_t feature_dim = 8;
  double class_mean_separation = 2.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (nodes_per_class == 0 || class_count == 0) throw ConfigError("SBM needs at least one node");
    if (!(p_intra >= 0.0 && p_intra <= 1.0) || !(p_inter >= 0.0 && p_inter <= 1.0))
      throw ConfigError("SBM edge probabilities must lie in [0, 1]");
    if (!(class_mean_separation >= 0.0)) throw ConfigError("class_mean_separation must be >= 0");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
    if (feature_dim < class_count) throw ConfigError("feature_dim must be >= class_count");
  }
};

/// Stochastic block model with Gaussian class-conditional features.
///
/// Node i belongs to class i / nodes_per_class. Every unordered pair is an edge
/// independently with p_intra (same class) or p_inter. Class c has mean
/// (sep / sqrt 2) * e_c, so any two class means are exactly `sep` apart, and every
/// coordinate gets iid N(0, noise_std^2) noise.
inline Graph generate_sbm(const SbmConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.nodes_per_class * cfg.class_count;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i / cfg.nodes_per_class);

  CounterRng edge_rng(derive_seed(cfg.seed, {0x5b3}));
  std::vector<Graph::Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = labels[i] == labels[j] ? cfg.p_intra : cfg.p_inter;
      if (edge_rng.bernoulli(p)) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    }

  CounterRng feat_rng(derive_seed(cfg.seed, {0xfea7}));
  const double scale = cfg.class_mean_separation / std::sqrt(2.0);
  FeatureMatrix x(n, cfg.feature_dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cfg.feature_dim; ++j)
      x(i, j) = (static_cast<int>(j) == labels[i] ? scale : 0.0) + cfg.noise_std * feat_rng.normal();

  return Graph(n, edges, std::move(x), std::move(labels), static_cast<int>(cfg.class_count));
}

/// Tree in which every non-leaf has degree `branching`: the root has n children and
/// every other internal node n - 1. Nodes are numbered in BFS order, root = 0.
/// Features are iid N(0, 1) of width feature_dim (seeded), no labels.
inline Graph generate_regular_tree(std::size_t branching, std::size_t depth, std::size_t feature_dim = 1,
                                   std::uint64_t seed = 0) {
  if (branching < 2) throw PreconditionError("regular tree needs branching >= 2");
  if (depth < 1) throw PreconditionError("regular tree needs depth >= 1");
  std::vector<Graph::Edge> edges;
  std::vector<NodeId> frontier{0};
  NodeId next = 1;
  for (std::size_t level = 1; level <= depth; ++level) {
    std::vector<NodeId> children;
    const std::size_t fan = level == 1 ? branching : branching - 1;
    for (NodeId parent : frontier)
      for (std::size_t c = 0; c < fan; ++c) {
        edges.emplace_back(parent, next);
        children.push_back(next++);
      }
    frontier = std::move(children);
  }
  CounterRng rng(derive_seed(seed, {0x7ee}));
  FeatureMatrix x(next, feature_dim);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
  return Graph(next, edges, std::move(x));
}

/// Node count of generate_regular_tree(n, depth).
constexpr std::size_t regular_tree_size(std::size_t n, std::size_t depth) {
  std::size_t total = 1, layer = 1;
  for (std::size_t d = 1; d <= depth; ++d) {
    layer *= (d == 1 ? n : n - 1);
    total += layer;
  }
  return total;
}

/// |N_u^k| for the root of an n-regular tree: 1, n, n(n-1), ...
constexpr std::size_t regular_hop_size(std::size_t n, std::size_t k) {
  if (k == 0) return 1;
  std::size_t s = n;
  for (std::size_t i = 1; i < k; ++i) s *= (n - 1);
  return s;
}

}  // namespace lgtl
