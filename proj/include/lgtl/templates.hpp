#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "lgtl/graph.hpp"
#include "lgtl/rational.hpp"
#include "lgtl/rng.hpp"

namespace lgtl {

struct TokenSource {
  NodeId node = 0;
  Rational weight;
};

/// Ordered tokens T_0..T_{m-1} for one center, each with the nodes (and exact
/// weights) it was built from. `layer[i]` is the depth that produced token i: the
/// hop index for HO/LGTL tokens, the tree layer for ND tokens.
struct TokenList {
  NodeId center = 0;
  FeatureMatrix tokens;
  std::vector<std::vector<TokenSource>> provenance;
  std::vector<std::size_t> layer;

  std::size_t size() const noexcept { return static_cast<std::size_t>(tokens.rows()); }

  Rational mass(std::size_t i) const {
    Rational m = 0;
    for (const auto& s : provenance.at(i)) m += s.weight;
    return m;
  }

  /// Weighted sum of raw features named by the provenance of token i.
  RowVector reconstruct(const Graph& g, std::size_t i) const {
    RowVector r = RowVector::Zero(static_cast<Eigen::Index>(g.feature_dim()));
    for (const auto& s : provenance.at(i)) r += to_double(s.weight) * g.feature(s.node);
    return r;
  }
};

/// Fixed-shape sampled computational tree. layers[0] = {root}; entry j of layer k
/// has parent layers[k-1][j / sample_sizes[k-1]].
struct NdTree {
  NodeId root = 0;
  std::vector<std::vector<NodeId>> layers;
  std::vector<std::size_t> sample_sizes;

  std::size_t parent_index(std::size_t k, std::size_t j) const { return j / sample_sizes.at(k - 1); }
};

inline TokenList none_tokens(const Graph& g, NodeId u) {
  g.check_node(u);
  TokenList t;
  t.center = u;
  t.tokens = g.feature(u);
  t.provenance = {{TokenSource{u, Rational(1)}}};
  t.layer = {0};
  return t;
}

/// Exact per-node weights of the k-step mean aggregation at u for k = 0..L:
/// c_0 = e_u, c_k(v) = sum over w with v in N(w) of c_{k-1}(w) / deg(w).
inline std::vector<std::map<NodeId, Rational>> ho_coefficients(const Graph& g, NodeId u, std::size_t L) {
  g.check_node(u);
  std::vector<std::map<NodeId, Rational>> c(L + 1);
  c[0][u] = 1;
  for (std::size_t k = 1; k <= L; ++k) {
    for (const auto& [w, cw] : c[k - 1]) {
      const auto nbrs = g.neighbors(w);
      if (nbrs.empty())
        throw DegenerateStructureError("HO aggregation reached isolated node " + std::to_string(w) + " at step " +
                                       std::to_string(k));
      const Rational share = cw / static_cast<long long>(nbrs.size());
      for (NodeId v : nbrs) c[k][v] += share;
    }
  }
  return c;
}

inline TokenList ho_tokens(const Graph& g, NodeId u, std::size_t L) {
  auto coeffs = ho_coefficients(g, u, L);
  TokenList t;
  t.center = u;
  t.tokens.resize(static_cast<Eigen::Index>(L + 1), static_cast<Eigen::Index>(g.feature_dim()));
  t.provenance.resize(L + 1);
  t.layer.resize(L + 1);
  for (std::size_t k = 0; k <= L; ++k) {
    t.layer[k] = k;
    for (auto& [v, w] : coeffs[k]) t.provenance[k].push_back({v, w});
    t.tokens.row(static_cast<Eigen::Index>(k)) = t.reconstruct(g, k);
  }
  return t;
}

/// HO tokens for every node at once in floating point: H_k = (D^-1 A) H_{k-1}.
/// Returns L+1 matrices; row u of result[k] is T_k for center u. Rows of nodes
/// whose recursion would hit an isolated node are left as the partial average
/// over non-isolated neighbors' values (an isolated node keeps its own feature).
inline std::vector<FeatureMatrix> ho_token_stack(const Graph& g, std::size_t L) {
  std::vector<FeatureMatrix> h(L + 1);
  h[0] = g.features();
  for (std::size_t k = 1; k <= L; ++k) {
    h[k].resize(h[0].rows(), h[0].cols());
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      auto nbrs = g.neighbors(u);
      if (nbrs.empty()) {
        h[k].row(u) = h[k - 1].row(u);
        continue;
      }
      RowVector acc = RowVector::Zero(h[0].cols());
      for (NodeId v : nbrs) acc += h[k - 1].row(v);
      h[k].row(u) = acc / static_cast<double>(nbrs.size());
    }
  }
  return h;
}

/// Samples min(k, |pool|) distinct entries of pool uniformly (partial Fisher-Yates);
/// result is in draw order.
inline std::vector<NodeId> sample_without_replacement(std::span<const NodeId> pool, std::size_t k, CounterRng& rng) {
  std::vector<NodeId> v(pool.begin(), pool.end());
  const std::size_t take = std::min(k, v.size());
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(v.size() - i));
    std::swap(v[i], v[j]);
  }
  v.resize(take);
  return v;
}

inline NdTree nd_tree(const Graph& g, NodeId u, std::span<const std::size_t> sizes, std::uint64_t seed) {
  g.check_node(u);
  for (auto s : sizes)
    if (s == 0) throw PreconditionError("ND sample sizes must be >= 1");
  NdTree tree;
  tree.root = u;
  tree.sample_sizes.assign(sizes.begin(), sizes.end());
  tree.layers.push_back({u});
  for (std::size_t k = 1; k <= sizes.size(); ++k) {
    const std::size_t nk = sizes[k - 1];
    const auto& prev = tree.layers.back();
    std::vector<NodeId> layer;
    layer.reserve(prev.size() * nk);
    for (std::size_t j = 0; j < prev.size(); ++j) {
      const NodeId parent = prev[j];
      CounterRng rng(derive_seed(seed, {u, k, j}));
      auto picked = sample_without_replacement(g.neighbors(parent), nk, rng);
      picked.resize(nk, parent);  // pad under-full neighborhoods with the parent
      layer.insert(layer.end(), picked.begin(), picked.end());
    }
    tree.layers.push_back(std::move(layer));
  }
  return tree;
}

/// Flattens the tree breadth-first; one token per tree slot (the root included).
inline TokenList flatten(const Graph& g, const NdTree& tree) {
  std::size_t total = 0;
  for (const auto& l : tree.layers) total += l.size();
  TokenList t;
  t.center = tree.root;
  t.tokens.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(g.feature_dim()));
  std::size_t i = 0;
  for (std::size_t k = 0; k < tree.layers.size(); ++k)
    for (NodeId v : tree.layers[k]) {
      t.tokens.row(static_cast<Eigen::Index>(i++)) = g.feature(v);
      t.provenance.push_back({TokenSource{v, Rational(1)}});
      t.layer.push_back(k);
    }
  return t;
}

inline std::pair<TokenList, NdTree> nd_tokens(const Graph& g, NodeId u, std::span<const std::size_t> sizes,
                                              std::uint64_t seed) {
  auto tree = nd_tree(g, u, sizes, seed);
  auto tokens = flatten(g, tree);
  return {std::move(tokens), std::move(tree)};
}

}  // namespace lgtl
