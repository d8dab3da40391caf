#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "lgtl/attention.hpp"
#include "lgtl/generators.hpp"
#include "lgtl/lgtl.hpp"
#include "lgtl/templates.hpp"

namespace lgtl {

/// Smoothness of one node's attention-aggregated representation next to the
/// matching upper bound.
struct BoundRow {
  NodeId node = 0;
  double smoothness = 0.0;
  double bound = 0.0;
  bool skipped = false;  // HO recursion hit an isolated node
};

/// HO: per-node effective attention from the exact provenance. The per-hop weight fed
/// to the bound is the largest weight any single node of that hop receives, which
/// upper-bounds every node of the hop and is exact on a regular tree.
inline BoundRow ho_bound_row(const Graph& g, NodeId u, std::size_t hops, const ProjectionWeights& w, double lipschitz) {
  BoundRow r{u};
  TokenList tl;
  try {
    tl = ho_tokens(g, u, hops);
  } catch (const DegenerateStructureError&) {
    r.skipped = true;
    return r;
  }
  const auto eff = unfold(tl, center_attention(Matrix(tl.tokens), w));
  const auto layers = hop_layers(g, u, hops);
  const auto dist = hop_distances(g, u, hops);
  std::vector<double> per_hop(hops + 1, 0.0), sizes(hops + 1), consistency(hops + 1, 1.0);
  for (const auto& [v, a] : eff) per_hop[static_cast<std::size_t>(dist[v])] = std::max(per_hop[static_cast<std::size_t>(dist[v])], a);
  for (std::size_t i = 0; i <= hops; ++i) {
    sizes[i] = static_cast<double>(layers[i].size());
    if (!layers[i].empty()) consistency[i] = hop_consistency(g, u, i);
  }
  r.smoothness = smoothness(g.feature(u), eff, g.features());
  r.bound = bound_ho(per_hop, BoundInputs{sizes, consistency, lipschitz});
  return r;
}

/// ND: token occurrences are the members of each hop (so phi = 1 and sizes are
/// occurrence counts), and eta/gamma are taken over the token list itself. On a
/// regular tree with full sampling this is the phi-weighted form exactly.
inline BoundRow nd_bound_row(const Graph& g, NodeId u, std::span<const std::size_t> sizes, std::uint64_t seed,
                             const ProjectionWeights& w, double lipschitz) {
  BoundRow r{u};
  auto [tl, tree] = nd_tokens(g, u, sizes, seed);
  const auto eff = unfold(tl, center_attention(Matrix(tl.tokens), w));
  const auto dist = hop_distances(g, u, sizes.size());
  const std::size_t H = sizes.size() + 1;
  const auto& y = g.labels();
  std::vector<double> count(H, 0.0), same(H, 0.0), consistency(H, 1.0);
  std::vector<bool> same_flag;
  for (std::size_t t = 0; t < tl.size(); ++t) {
    const NodeId v = tl.provenance[t].front().node;
    const auto k = static_cast<std::size_t>(dist[v]);
    count[k] += 1;
    same_flag.push_back(y[v] == y[u]);
    same[k] += same_flag.back() ? 1.0 : 0.0;
  }
  for (std::size_t k = 0; k < H; ++k)
    if (count[k] > 0) consistency[k] = same[k] / count[k];
  BoundInputs b{count, consistency, lipschitz};
  if (std::find(same_flag.begin(), same_flag.end(), false) == same_flag.end()) {
    b.eta = 0.0;  // no differently labelled token: nothing to bound
  } else {
    auto eg = eta_gamma_from_keys(g.feature(u), Matrix(tl.tokens), same_flag, w);
    b.eta = eg.eta;
    b.gamma = eg.gamma;
  }
  PhiVector ones{2, H - 1, std::vector<Rational>(H, Rational(1))};
  r.smoothness = smoothness(g.feature(u), eff, g.features());
  r.bound = bound_nd(ones, b);
  return r;
}

/// LGTL: |G^i| is the hop-i star (the self-loop included, hop 0 = {u}), C^i the
/// same-label fraction inside it, eta/gamma from estimate_eta_gamma over hops 1..L.
inline BoundRow lgtl_bound_row(const Graph& g, NodeId u, const LgtlParams& p, std::uint64_t seed, double lipschitz) {
  BoundRow r{u};
  const auto o = lgtl_forward(g, u, p, seed);
  const auto eff = effective_attention(o);
  const auto& y = g.labels();
  const std::size_t H = p.hop_count + 1;
  std::vector<double> sizes(H), consistency(H);
  for (std::size_t i = 0; i < H; ++i) {
    double n = 0, same = 0;
    for (const auto& [v, b] : o.within_hop[i]) {
      n += 1;
      same += y[v] == y[u] ? 1.0 : 0.0;
    }
    sizes[i] = n;
    consistency[i] = same / n;
  }
  BoundInputs b{sizes, consistency, lipschitz};
  try {
    auto eg = estimate_eta_gamma(g, u, p.proj, p.hop_count);
    b.eta = eg.eta;
    b.gamma = eg.gamma;
  } catch (const DomainError&) {
    // one label class missing around u: the ratio term is irrelevant, keep eta = gamma
  }
  std::vector<double> s_hat(o.gate_weights.data(), o.gate_weights.data() + o.gate_weights.size());
  r.smoothness = smoothness(g.feature(u), eff, g.features());
  r.bound = bound_lgtl(s_hat, b);
  return r;
}

/// Random projections plus an untrained LGTL whose gate and selection scores are
/// sharpened enough to be far from uniform.
inline std::pair<ProjectionWeights, LgtlParams> bound_model(std::size_t feature_dim, std::size_t hops,
                                                            std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, {0xb0d}));
  const auto h = static_cast<Eigen::Index>(feature_dim);
  ProjectionWeights w = ProjectionWeights::zeros(h);
  for (auto* m : {&w.W_Q, &w.W_K, &w.W_V})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.normal();
  InitScales sc;
  sc.gate = 1.0;
  sc.selection = 0.5;
  auto lp = init_params(feature_dim, 2, hops, std::vector<std::size_t>(hops, 8), seed, sc);
  lp.selection.W *= 4.0;
  lp.proj = w;
  return {w, lp};
}

struct BoundSuiteRow {
  std::size_t graph = 0;
  std::string template_name;
  BoundRow row;
};

struct BoundSuiteConfig {
  std::size_t graphs = 50;
  std::size_t nodes_per_graph = 20;
  std::uint64_t seed = 1000;
  std::size_t hops = 2;
  std::vector<std::size_t> nd_sizes{4, 2};
};

/// Random noise-free SBM graphs alternating heterophilic / homophilic, random
/// projections, and an untrained LGTL with sharpened gate and selection scores.
/// Noise-free features make the label-Lipschitz assumption hold with a finite constant.
inline std::vector<BoundSuiteRow> run_bound_suite(const BoundSuiteConfig& c) {
  std::vector<BoundSuiteRow> out;
  for (std::size_t gi = 0; gi < c.graphs; ++gi) {
    const std::uint64_t seed = c.seed + gi;
    SbmConfig s;
    s.nodes_per_class = 50;
    s.feature_dim = 4;
    s.class_mean_separation = 2.0;
    s.noise_std = 0.0;
    s.seed = seed;
    const bool het = gi % 2 == 0;
    s.p_intra = het ? 0.02 : 0.16;
    s.p_inter = het ? 0.18 : 0.04;
    const Graph g = generate_sbm(s);
    const double lip = estimate_lipschitz(g);
    const auto [w, lp] = bound_model(4, c.hops, seed);
    const auto n = std::min<std::size_t>(c.nodes_per_graph, g.num_nodes());
    for (NodeId u = 0; u < n; ++u) {
      out.push_back({gi, "ho", ho_bound_row(g, u, c.hops, w, lip)});
      out.push_back({gi, "nd", nd_bound_row(g, u, c.nd_sizes, seed, w, lip)});
      out.push_back({gi, "lgtl", lgtl_bound_row(g, u, lp, seed, lip)});
    }
  }
  return out;
}

}  // namespace lgtl
