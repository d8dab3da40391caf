#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lgtl/attention.hpp"
#include "lgtl/gat.hpp"
#include "lgtl/graph.hpp"
#include "lgtl/hop_matrix.hpp"
#include "lgtl/rng.hpp"
#include "lgtl/templates.hpp"

namespace lgtl {

enum class Ablation { Full, NoGate, NoSelection };

inline const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::NoGate: return "no_gate";
    case Ablation::NoSelection: return "no_selection";
  }
  return "?";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::Full;
  if (s == "no_gate") return Ablation::NoGate;
  if (s == "no_selection") return Ablation::NoSelection;
  throw ConfigError("unknown ablation '" + s + "'");
}

/// All trainable weights. The flat layout (see for_each_block) is gate.W, gate.a,
/// selection.W, selection.a, W_Q, W_K, W_V, classifier; matrices row-major.
struct LgtlParams {
  GatLayer gate;
  GatLayer selection;
  ProjectionWeights proj;
  Matrix classifier;  // classes x h
  std::size_t hop_count = 0;
  std::vector<std::size_t> sample_sizes;

  template <typename Self, typename F>
  static void for_each_block(Self& self, F&& f) {
    f(self.gate.W);
    f(self.gate.a);
    f(self.selection.W);
    f(self.selection.a);
    f(self.proj.W_Q);
    f(self.proj.W_K);
    f(self.proj.W_V);
    f(self.classifier);
  }

  std::size_t size() const {
    std::size_t n = 0;
    for_each_block(*this, [&](const auto& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for_each_block(*this, [&](const auto& m) {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
    });
    return out;
  }

  void assign(std::span<const double> flat) {
    if (flat.size() != size())
      throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) + " entries, expected " +
                       std::to_string(size()));
    std::size_t k = 0;
    for_each_block(*this, [&](auto& m) {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = flat[k++];
    });
  }

  /// Same shapes, all zero; used as a gradient accumulator.
  LgtlParams zeros_like() const {
    LgtlParams z = *this;
    for_each_block(z, [](auto& m) { m.setZero(); });
    return z;
  }

  void validate() const {
    if (gate.out_dim() != static_cast<Eigen::Index>(hop_count + 1))
      throw ShapeError("gate output width must be hop_count + 1");
    if (sample_sizes.size() != hop_count) throw ShapeError("one sample size per hop required");
    proj.validate();
    if (classifier.cols() != proj.h()) throw ShapeError("classifier width != hidden width");
    if (gate.in_dim() != proj.h() || selection.in_dim() != proj.h())
      throw ShapeError("GAT input width != hidden width");
    bool finite = true;
    for_each_block(*this, [&](const auto& m) { finite = finite && m.allFinite(); });
    if (!finite) throw NumericError("parameters contain non-finite values");
  }
};

struct InitScales {
  double gate = 0.1;
  double selection = 0.1;
  double projection = -1.0;  // < 0: 1/sqrt(h)
  double classifier = 0.1;
  Eigen::Index selection_width = -1;  // < 0: h
};

inline LgtlParams init_params(std::size_t feature_dim, std::size_t classes, std::size_t hops,
                              std::vector<std::size_t> sizes, std::uint64_t seed, InitScales s = {}) {
  if (sizes.size() != hops) throw ConfigError("one sample size per hop required");
  const auto h = static_cast<Eigen::Index>(feature_dim);
  const auto sw = s.selection_width > 0 ? s.selection_width : h;
  LgtlParams p;
  p.hop_count = hops;
  p.sample_sizes = std::move(sizes);
  p.gate = GatLayer::zeros(h, static_cast<Eigen::Index>(hops + 1));
  p.selection = GatLayer::zeros(h, sw);
  p.proj = ProjectionWeights::zeros(h);
  p.classifier = Matrix::Zero(static_cast<Eigen::Index>(classes), h);
  const double proj_scale = s.projection >= 0 ? s.projection : 1.0 / std::sqrt(static_cast<double>(h));
  CounterRng rng(derive_seed(seed, {0x1417}));
  auto fill = [&](auto& m, double scale) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * rng.normal();
  };
  fill(p.gate.W, s.gate);
  fill(p.gate.a, s.gate);
  fill(p.selection.W, s.selection);
  fill(p.selection.a, s.selection);
  fill(p.proj.W_Q, proj_scale);
  fill(p.proj.W_K, proj_scale);
  fill(p.proj.W_V, proj_scale);
  fill(p.classifier, s.classifier);
  return p;
}

/// Gate neighborhood: u first (self-loop), then its neighbors.
inline std::vector<NodeId> gate_nodes(const Graph& g, NodeId u) {
  std::vector<NodeId> nodes{u};
  auto nb = g.neighbors(u);
  nodes.insert(nodes.end(), nb.begin(), nb.end());
  return nodes;
}

inline Vector gate_scores(const Graph& g, NodeId u, const GatLayer& gate, std::size_t hops) {
  if (gate.out_dim() != static_cast<Eigen::Index>(hops + 1)) throw ShapeError("gate output width must be hops + 1");
  return softmax(gat_forward(gate, g.features(), u, gate_nodes(g, u)).out);
}

/// Uniform sample without replacement of min(n, |N_u^i|) exact-hop-i nodes.
/// hop_samples[i] for i = 1..hops; entry 0 is empty.
inline std::vector<std::vector<NodeId>> sample_hops(const Graph& g, NodeId u, std::span<const std::size_t> sizes,
                                                    std::uint64_t seed) {
  auto layers = hop_layers(g, u, sizes.size());
  std::vector<std::vector<NodeId>> out(sizes.size() + 1);
  for (std::size_t i = 1; i <= sizes.size(); ++i) {
    CounterRng rng(derive_seed(seed, {u, i, 0x5e1}));
    out[i] = sample_without_replacement(layers[i], sizes[i - 1], rng);
  }
  return out;
}

struct HopSelection {
  std::vector<NodeId> star;  // u first, then sampled hop nodes
  Vector beta;               // weight per star entry
  RowVector token;
  bool degenerate = false;   // hop was empty: zero token, all weight on the self-loop
  std::optional<GatCache> cache;
};

/// T_i = sum_v beta_v x_v over the star {u} + sampled; beta from the selection GAT,
/// or uniform when `learned` is false.
inline HopSelection select_from_sample(const Graph& g, NodeId u, const std::vector<NodeId>& sampled, const GatLayer& sel,
                                       bool learned = true) {
  HopSelection h;
  h.star.push_back(u);
  h.star.insert(h.star.end(), sampled.begin(), sampled.end());
  if (sampled.empty()) {
    h.degenerate = true;
    h.beta = Vector::Ones(1);
    h.token = RowVector::Zero(static_cast<Eigen::Index>(g.feature_dim()));
    return h;
  }
  const auto m = static_cast<Eigen::Index>(h.star.size());
  if (learned) {
    h.cache = gat_forward(sel, g.features(), u, h.star);
    h.beta = h.cache->att;
  } else {
    h.beta = Vector::Constant(m, 1.0 / static_cast<double>(m));
  }
  h.token = RowVector::Zero(static_cast<Eigen::Index>(g.feature_dim()));
  for (Eigen::Index j = 0; j < m; ++j) h.token += h.beta(j) * g.feature(h.star[static_cast<std::size_t>(j)]);
  return h;
}

inline HopSelection select_hop_token(const Graph& g, NodeId u, std::size_t hop, std::size_t n_i, const GatLayer& sel,
                                     std::uint64_t seed) {
  if (hop == 0) throw PreconditionError("hop tokens start at hop 1");
  auto layers = hop_layers(g, u, hop);
  CounterRng rng(derive_seed(seed, {u, hop, 0x5e1}));
  auto sampled = sample_without_replacement(layers[hop], n_i, rng);
  return select_from_sample(g, u, sampled, sel);
}

/// alpha_hat_i = alpha_i s_i / sum_j alpha_j s_j.
inline Vector adjust_attention(const Vector& alpha, const Vector& s_hat) {
  if (alpha.size() != s_hat.size()) throw ShapeError("alpha and gate weights differ in length");
  const double dot = alpha.dot(s_hat);
  if (!(dot > 0.0)) throw DomainError("<alpha, s_hat> is zero");
  return (alpha.array() * s_hat.array()).matrix() / dot;
}

/// One node's full forward pass, kept for the backward pass and for analysis.
/// Works for every template: template runs just leave the gate and selections empty.
struct NodeTrace {
  NodeId center = 0;
  Matrix T;                        // tokens, one per row
  std::optional<GatCache> gate;    // absent: uniform gate (or no gate at all)
  Vector s_hat;                    // empty for templates
  std::vector<HopSelection> hops;  // index i = 1..L for LGTL; empty for templates
  Vector alpha, alpha_hat;
  RowVector tbar;                  // alpha_hat^T T
  RowVector z;                     // tbar W_V
  Vector logits;
};

namespace detail {
inline void finish_head(NodeTrace& t, const LgtlParams& p) {
  t.alpha = center_attention(t.T, p.proj);
  t.alpha_hat = t.s_hat.size() > 0 ? adjust_attention(t.alpha, t.s_hat) : t.alpha;
  t.tbar = t.alpha_hat.transpose() * t.T;
  t.z = t.tbar * p.proj.W_V;
  t.logits = p.classifier * t.z.transpose();
}
}  // namespace detail

/// LGTL trace for u given its hop samples (hop_samples[i], i = 1..L).
inline NodeTrace trace_lgtl(const Graph& g, NodeId u, const std::vector<std::vector<NodeId>>& hop_samples,
                            const LgtlParams& p, Ablation ab = Ablation::Full) {
  const std::size_t L = p.hop_count;
  if (hop_samples.size() != L + 1) throw ShapeError("hop sample list must have hop_count + 1 entries");
  NodeTrace t;
  t.center = u;
  if (ab == Ablation::NoGate) {
    t.s_hat = Vector::Constant(static_cast<Eigen::Index>(L + 1), 1.0 / static_cast<double>(L + 1));
  } else {
    t.gate = gat_forward(p.gate, g.features(), u, gate_nodes(g, u));
    t.s_hat = softmax(t.gate->out);
  }
  t.T.resize(static_cast<Eigen::Index>(L + 1), static_cast<Eigen::Index>(g.feature_dim()));
  t.T.row(0) = g.feature(u);
  t.hops.resize(L + 1);
  for (std::size_t i = 1; i <= L; ++i) {
    t.hops[i] = select_from_sample(g, u, hop_samples[i], p.selection, ab != Ablation::NoSelection);
    t.T.row(static_cast<Eigen::Index>(i)) = t.hops[i].token;
  }
  detail::finish_head(t, p);
  return t;
}

/// Template trace: plain attention over a fixed token matrix.
inline NodeTrace trace_tokens(NodeId u, Matrix T, const LgtlParams& p) {
  NodeTrace t;
  t.center = u;
  t.T = std::move(T);
  detail::finish_head(t, p);
  return t;
}

/// Accumulates d(loss)/d(params) into grad given dL/dlogits. With
/// train_backbone false the W_Q/W_K/W_V blocks are left untouched.
inline void backward(const Graph& g, const NodeTrace& t, const LgtlParams& p, const Vector& dlogits, LgtlParams& grad,
                     bool train_backbone = true) {
  const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(p.proj.h()));
  const Eigen::Index m = t.T.rows();

  grad.classifier += dlogits * t.z;
  const RowVector dz = dlogits.transpose() * p.classifier;

  // z = tbar W_V, tbar = alpha_hat^T T
  if (train_backbone) grad.proj.W_V += t.tbar.transpose() * dz;
  const RowVector dtbar = dz * p.proj.W_V.transpose();
  Matrix dT = t.alpha_hat * dtbar;
  const Vector dalpha_hat = t.T * dtbar.transpose();

  Vector dalpha;
  Vector ds_hat;
  if (t.s_hat.size() > 0) {
    const double P = t.alpha.dot(t.s_hat);
    const double c = dalpha_hat.dot(t.alpha_hat);
    const Vector dw = (dalpha_hat.array() - c) / P;
    dalpha = (dw.array() * t.s_hat.array()).matrix();
    ds_hat = (dw.array() * t.alpha.array()).matrix();
  } else {
    dalpha = dalpha_hat;
  }

  // alpha = softmax(K q / sqrt h)
  const Vector dlogit = t.alpha.array() * (dalpha.array() - t.alpha.dot(dalpha));
  const Vector q = (t.T.row(0) * p.proj.W_Q).transpose();
  const Matrix K = t.T * p.proj.W_K;
  const Vector dq = K.transpose() * dlogit * inv_sqrt_h;
  const Matrix dK = dlogit * q.transpose() * inv_sqrt_h;
  if (train_backbone) {
    grad.proj.W_Q += t.T.row(0).transpose() * dq.transpose();
    grad.proj.W_K += t.T.transpose() * dK;
  }
  dT.row(0) += dq.transpose() * p.proj.W_Q.transpose();
  dT += dK * p.proj.W_K.transpose();

  if (t.gate) {
    const Vector ds_raw = t.s_hat.array() * (ds_hat.array() - t.s_hat.dot(ds_hat));
    GatGrad gg(p.gate);
    gat_backward(p.gate, g.features(), *t.gate, ds_raw, Vector(), gg);
    grad.gate.W += gg.dW;
    grad.gate.a += gg.da;
  }
  GatGrad sg(p.selection);
  bool any_sel = false;
  for (std::size_t i = 1; i < t.hops.size() && static_cast<Eigen::Index>(i) < m; ++i) {
    const auto& h = t.hops[i];
    if (!h.cache) continue;
    Vector dbeta(static_cast<Eigen::Index>(h.star.size()));
    for (std::size_t j = 0; j < h.star.size(); ++j)
      dbeta(static_cast<Eigen::Index>(j)) = dT.row(static_cast<Eigen::Index>(i)).dot(g.feature(h.star[j]));
    gat_backward(p.selection, g.features(), *h.cache, Vector(), dbeta, sg);
    any_sel = true;
  }
  if (any_sel) {
    grad.selection.W += sg.dW;
    grad.selection.a += sg.da;
  }
}

struct LgtlOutput {
  TokenList tokens;
  Vector gate_weights;
  std::vector<std::map<NodeId, double>> within_hop;  // index i = 1..L; entry 0 is {u: 1}
  std::vector<bool> degenerate_hops;
  Vector raw_attention;
  Vector adjusted;
  RowVector representation;
};

inline LgtlOutput output_from_trace(const Graph& g, const NodeTrace& t) {
  LgtlOutput o;
  const std::size_t m = static_cast<std::size_t>(t.T.rows());
  o.tokens.center = t.center;
  o.tokens.tokens = t.T;
  o.tokens.provenance.resize(m);
  o.tokens.layer.resize(m);
  o.within_hop.resize(m);
  o.degenerate_hops.assign(m, false);
  o.tokens.provenance[0] = {TokenSource{t.center, Rational(1)}};
  o.within_hop[0][t.center] = 1.0;
  for (std::size_t i = 1; i < m; ++i) {
    o.tokens.layer[i] = i;
    const auto& h = t.hops[i];
    o.degenerate_hops[i] = h.degenerate;
    if (h.degenerate) {
      o.within_hop[i][t.center] = 1.0;
      continue;
    }
    for (std::size_t j = 0; j < h.star.size(); ++j) {
      const double b = h.beta(static_cast<Eigen::Index>(j));
      o.tokens.provenance[i].push_back({h.star[j], exact_rational(b)});
      o.within_hop[i][h.star[j]] += b;
    }
  }
  (void)g;
  o.gate_weights = t.s_hat;
  o.raw_attention = t.alpha;
  o.adjusted = t.alpha_hat;
  o.representation = t.z;
  return o;
}

inline LgtlOutput lgtl_forward(const Graph& g, NodeId u, const LgtlParams& p, std::uint64_t seed,
                               Ablation ab = Ablation::Full) {
  p.validate();
  g.check_node(u);
  if (static_cast<Eigen::Index>(g.feature_dim()) != p.proj.h()) throw ShapeError("feature width != hidden width");
  auto samples = sample_hops(g, u, p.sample_sizes, seed);
  return output_from_trace(g, trace_lgtl(g, u, samples, p, ab));
}

/// Per-node effective attention of an LGTL output: sum over hops of alpha_hat_i beta_{i,v}.
/// Degenerate hops hand their weight to nobody (their token is zero).
inline std::map<NodeId, double> effective_attention(const LgtlOutput& o) {
  std::map<NodeId, double> w;
  for (std::size_t i = 0; i < o.within_hop.size(); ++i) {
    if (o.degenerate_hops[i]) continue;
    for (const auto& [v, b] : o.within_hop[i]) w[v] += o.adjusted(static_cast<Eigen::Index>(i)) * b;
  }
  return w;
}

/// Frozen-backbone variant: instead of reweighting attention, scale each token by its
/// gate score and run the unmodified attention over the scaled tokens.
struct FrozenOutput {
  LgtlOutput base;     // tokens here are the scaled ones
  Vector attention;    // backbone attention over the scaled tokens
  RowVector representation;
  std::map<NodeId, double> effective;  // alpha_i s_i beta_{i,v}
};

inline FrozenOutput lgtl_frozen_forward(const Graph& g, NodeId u, const LgtlParams& p, std::uint64_t seed,
                                        Ablation ab = Ablation::Full) {
  FrozenOutput f;
  f.base = lgtl_forward(g, u, p, seed, ab);
  Matrix scaled = f.base.tokens.tokens;
  for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= f.base.gate_weights(i);
  f.base.tokens.tokens = scaled;
  f.attention = center_attention(scaled, p.proj);
  f.representation = (f.attention.transpose() * scaled) * p.proj.W_V;
  for (std::size_t i = 0; i < f.base.within_hop.size(); ++i) {
    if (f.base.degenerate_hops[i]) continue;
    const double hop_w = f.attention(static_cast<Eigen::Index>(i)) * f.base.gate_weights(static_cast<Eigen::Index>(i));
    for (const auto& [v, b] : f.base.within_hop[i]) f.effective[v] += hop_w * b;
  }
  return f;
}

/// Hop-level weights that make LGTL reproduce a predefined template on a regular tree.
struct Specialization {
  Vector gate;                           // s_hat realizing `adjusted` through adjust_attention (HO only)
  Vector adjusted;                       // per-hop multiplier alpha_hat_k
  std::vector<std::vector<double>> beta; // beta[k][j]: within-hop weight of the j-th hop-k node
  std::vector<double> per_node;          // per-hop effective weight of a single node (HO), or per scored node (ND)
};

/// HO as LGTL: uniform beta over N^k and hop multiplier |N^k| alpha_hat_k^HO, so every
/// hop-k node ends up with exactly the HO effective attention.
inline Specialization specialize_to_ho(std::size_t n, std::size_t L, const Vector& alpha) {
  if (static_cast<std::size_t>(alpha.size()) != L + 1) throw ShapeError("alpha must have L + 1 entries");
  std::vector<double> a(alpha.data(), alpha.data() + alpha.size());
  auto eff = effective_attention_ho(a, m_ho(n, L));
  Specialization s;
  s.adjusted.resize(static_cast<Eigen::Index>(L + 1));
  s.gate.resize(static_cast<Eigen::Index>(L + 1));
  for (std::size_t k = 0; k <= L; ++k) {
    const auto size = regular_hop_size(n, k);
    s.beta.emplace_back(size, 1.0 / static_cast<double>(size));
    s.adjusted(static_cast<Eigen::Index>(k)) = static_cast<double>(size) * eff[k];
    if (!(alpha(static_cast<Eigen::Index>(k)) > 0.0))
      throw DomainError("a hop with zero backbone attention cannot be reweighted by the gate");
    s.gate(static_cast<Eigen::Index>(k)) = s.adjusted(static_cast<Eigen::Index>(k)) / alpha(static_cast<Eigen::Index>(k));
  }
  s.gate /= s.gate.sum();
  for (std::size_t k = 0; k <= L; ++k)
    s.per_node.push_back(s.adjusted(static_cast<Eigen::Index>(k)) * s.beta[k].front());
  return s;
}

/// ND as LGTL: beta is the direct score normalized within each hop and the hop
/// multiplier is phi_{L,k} times the hop's direct mass, so node v gets phi_{L,k} alpha_v.
inline Specialization specialize_to_nd(std::size_t n, std::size_t L, const std::vector<TaggedScore>& direct) {
  auto p = phi(n, L);
  std::vector<double> mass(L + 1, 0.0);
  for (const auto& s : direct) {
    if (s.hop < 0 || static_cast<std::size_t>(s.hop) > L) throw PreconditionError("untagged node in direct scores");
    mass[static_cast<std::size_t>(s.hop)] += s.alpha;
  }
  Specialization sp;
  sp.adjusted.resize(static_cast<Eigen::Index>(L + 1));
  sp.beta.resize(L + 1);
  for (std::size_t k = 0; k <= L; ++k) sp.adjusted(static_cast<Eigen::Index>(k)) = to_double(p.phi[k]) * mass[k];
  for (const auto& s : direct) {
    const auto k = static_cast<std::size_t>(s.hop);
    const double b = mass[k] > 0 ? s.alpha / mass[k] : 0.0;
    sp.beta[k].push_back(b);
    sp.per_node.push_back(sp.adjusted(static_cast<Eigen::Index>(k)) * b);
  }
  return sp;
}

/// Personalized PageRank from u: p <- (1 - d) e_u + d p P with P the random-walk
/// matrix; a dangling node's mass restarts at u.
inline std::vector<double> personalized_pagerank(const Graph& g, NodeId u, double damping, std::size_t iters) {
  g.check_node(u);
  if (!(damping >= 0.0 && damping < 1.0)) throw PreconditionError("damping must lie in [0, 1)");
  const auto n = g.num_nodes();
  std::vector<double> p(n, 0.0), next(n);
  p[u] = 1.0;
  for (std::size_t it = 0; it < iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    next[u] += 1.0 - damping;
    for (NodeId w = 0; w < n; ++w) {
      if (p[w] == 0.0) continue;
      auto nb = g.neighbors(w);
      if (nb.empty()) {
        next[u] += damping * p[w];
        continue;
      }
      const double share = damping * p[w] / static_cast<double>(nb.size());
      for (NodeId v : nb) next[v] += share;
    }
    p.swap(next);
  }
  return p;
}

struct ClusterTokens {
  TokenList tokens;            // gate-scaled base tokens followed by one token per non-empty cluster
  std::size_t base_count = 0;
  std::vector<bool> skipped;   // per input cluster: true when it was empty
};

/// Extends an LGTL token list with PPR-weighted cluster tokens
/// T^{L+j} = sum_{v in C^j} p_{u,v} x_v. Base tokens are scaled by s_hat as in the
/// frozen-backbone form.
inline ClusterTokens append_cluster_tokens(const Graph& g, const TokenList& base, const std::vector<std::vector<NodeId>>& clusters,
                                           const std::vector<double>& ppr, const Vector& s_hat) {
  if (static_cast<std::size_t>(s_hat.size()) != base.size()) throw ShapeError("one gate weight per base token");
  if (ppr.size() != g.num_nodes()) throw ShapeError("PPR vector must cover every node");
  for (double v : ppr)
    if (v < 0) throw PreconditionError("PPR scores must be nonnegative");
  ClusterTokens out;
  out.base_count = base.size();
  out.tokens = base;
  for (Eigen::Index i = 0; i < s_hat.size(); ++i) {
    out.tokens.tokens.row(i) *= s_hat(i);
    for (auto& src : out.tokens.provenance[static_cast<std::size_t>(i)]) src.weight *= exact_rational(s_hat(i));
  }
  std::vector<RowVector> extra;
  for (const auto& c : clusters) {
    out.skipped.push_back(c.empty());
    if (c.empty()) continue;
    RowVector t = RowVector::Zero(static_cast<Eigen::Index>(g.feature_dim()));
    std::vector<TokenSource> prov;
    for (NodeId v : c) {
      g.check_node(v);
      t += ppr[v] * g.feature(v);
      prov.push_back({v, exact_rational(ppr[v])});
    }
    extra.push_back(t);
    out.tokens.provenance.push_back(std::move(prov));
    out.tokens.layer.push_back(base.size());
  }
  if (!extra.empty()) {
    FeatureMatrix grown(out.tokens.tokens.rows() + static_cast<Eigen::Index>(extra.size()), out.tokens.tokens.cols());
    grown.topRows(out.tokens.tokens.rows()) = out.tokens.tokens;
    for (std::size_t j = 0; j < extra.size(); ++j) grown.row(out.tokens.tokens.rows() + static_cast<Eigen::Index>(j)) = extra[j];
    out.tokens.tokens = std::move(grown);
  }
  return out;
}

/// Center-row attention output over all of T with the weights of tokens at index
/// >= active forced to zero (the softmax is taken over the unmasked logits only).
inline RowVector masked_center_output(const Matrix& T, const ProjectionWeights& w, std::size_t active) {
  if (active == 0 || active > static_cast<std::size_t>(T.rows())) throw PreconditionError("bad active token count");
  detail::check_tokens(T, w);
  const Vector q = (T.row(0) * w.W_Q).transpose();
  const Vector logits = (T * w.W_K) * q / std::sqrt(static_cast<double>(w.h()));
  Vector a = Vector::Zero(T.rows());
  a.head(static_cast<Eigen::Index>(active)) = softmax(logits.head(static_cast<Eigen::Index>(active)));
  return (a.transpose() * T) * w.W_V;
}

}  // namespace lgtl
