#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lgtl/graph.hpp"
#include "lgtl/hop_matrix.hpp"
#include "lgtl/templates.hpp"

namespace lgtl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ProjectionWeights {
  Matrix W_Q, W_K, W_V;

  static ProjectionWeights zeros(Eigen::Index h) {
    return {Matrix::Zero(h, h), Matrix::Zero(h, h), Matrix::Zero(h, h)};
  }
  static ProjectionWeights identity(Eigen::Index h) {
    return {Matrix::Identity(h, h), Matrix::Identity(h, h), Matrix::Identity(h, h)};
  }
  Eigen::Index h() const noexcept { return W_Q.rows(); }

  void validate() const {
    const auto n = W_Q.rows();
    for (const Matrix* m : {&W_Q, &W_K, &W_V}) {
      if (m->rows() != n || m->cols() != n) throw ShapeError("projection matrices must all be h x h");
      if (!m->allFinite()) throw NumericError("projection matrix has non-finite entries");
    }
  }
};

struct AttentionResult {
  Matrix weights;  // m x m, row-stochastic
  Matrix output;   // m x h
};

/// Numerically stable softmax (max subtracted before exponentiating).
inline Vector softmax(const Vector& logits) {
  if (logits.size() == 0) return logits;
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

namespace detail {
inline void check_tokens(const Matrix& T, const ProjectionWeights& w) {
  w.validate();
  if (T.cols() != w.h())
    throw ShapeError("token width " + std::to_string(T.cols()) + " != hidden width " + std::to_string(w.h()));
  if (T.rows() == 0) throw ShapeError("empty token list");
  if (!T.allFinite()) throw NumericError("token matrix has non-finite entries");
}
}  // namespace detail

/// Single-head scaled dot-product self-attention, Softmax(Q K^T / sqrt h) V.
inline AttentionResult attend(const Matrix& T, const ProjectionWeights& w) {
  detail::check_tokens(T, w);
  const Matrix Q = T * w.W_Q, K = T * w.W_K, V = T * w.W_V;
  const double scale = 1.0 / std::sqrt(static_cast<double>(w.h()));
  const Matrix logits = (Q * K.transpose()) * scale;
  AttentionResult r;
  r.weights.resize(T.rows(), T.rows());
  for (Eigen::Index i = 0; i < T.rows(); ++i) r.weights.row(i) = softmax(logits.row(i).transpose()).transpose();
  r.output = r.weights * V;
  return r;
}

inline AttentionResult attend(const TokenList& tokens, const ProjectionWeights& w) {
  return attend(Matrix(tokens.tokens), w);
}

/// Attention row of the center (token 0) only; what the node representation uses.
inline Vector center_attention(const Matrix& T, const ProjectionWeights& w) {
  detail::check_tokens(T, w);
  const Vector q = (T.row(0) * w.W_Q).transpose();
  const Matrix K = T * w.W_K;
  return softmax((K * q) / std::sqrt(static_cast<double>(w.h())));
}

/// ||x_u - sum_v w_v x_v||.
inline double smoothness(const RowVector& x_u, const std::map<NodeId, double>& weights, const FeatureMatrix& features) {
  RowVector agg = RowVector::Zero(x_u.size());
  for (const auto& [v, wv] : weights) {
    if (wv < 0) throw PreconditionError("attention weights must be nonnegative");
    if (v >= features.rows()) throw RangeError("node " + std::to_string(v) + " out of range");
    agg += wv * features.row(v);
  }
  return (x_u - agg).norm();
}

/// Per-node effective attention obtained by unfolding each token into its provenance.
inline std::map<NodeId, double> unfold(const TokenList& tokens, const Vector& token_weights) {
  if (static_cast<std::size_t>(token_weights.size()) != tokens.size())
    throw ShapeError("one weight per token required");
  std::map<NodeId, double> out;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (const auto& s : tokens.provenance[i]) out[s.node] += token_weights(static_cast<Eigen::Index>(i)) * to_double(s.weight);
  return out;
}

/// Inputs shared by the three bounds. `sizes` are |N_u^i| (or |G_u^i|), `consistency`
/// the matching C_u^i. `lipschitz` is the feature/label Lipschitz constant, named to
/// keep it apart from the hop count.
struct BoundInputs {
  std::vector<double> sizes;
  std::vector<double> consistency;
  double lipschitz = 0.0;
  double eta = 1.0;    // mean exp-score of differently labelled nodes
  double gamma = 1.0;  // mean exp-score of same-label nodes

  void validate() const {
    if (sizes.size() != consistency.size()) throw ShapeError("sizes and consistencies differ in length");
    for (double c : consistency)
      if (!(c >= 0.0 && c <= 1.0)) throw DomainError("consistency outside [0, 1]");
    for (double s : sizes)
      if (!(s >= 0.0)) throw DomainError("negative hop size");
    if (!(lipschitz >= 0.0)) throw DomainError("negative Lipschitz constant");
    if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
    if (!(eta >= 0.0)) throw DomainError("eta must be nonnegative");
  }
};

/// sqrt(2) Lip * sum_i alpha_hat_i |N^i| (1 - C^i).
inline double bound_ho(std::span<const double> alpha_hat, const BoundInputs& b) {
  b.validate();
  if (alpha_hat.size() != b.sizes.size()) throw ShapeError("alpha_hat and hop arrays differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < alpha_hat.size(); ++i) s += alpha_hat[i] * b.sizes[i] * (1.0 - b.consistency[i]);
  return std::numbers::sqrt2 * b.lipschitz * s;
}

/// sqrt(2) Lip / (1 + (gamma/eta) / (R - 1)), R = sum phi|N| / sum phi|N|C.
///
/// This is the fraction of softmax mass that lands on differently labelled
/// nodes when those score eta on average and same-label nodes score gamma.
/// R = 1 (everything consistent) gives 0; no consistent mass gives sqrt(2) Lip.
inline double bound_nd(const PhiVector& p, const BoundInputs& b) {
  b.validate();
  if (b.sizes.size() != p.phi.size()) throw ShapeError("phi and hop arrays differ in length");
  double total = 0.0, same = 0.0;
  for (std::size_t i = 0; i < b.sizes.size(); ++i) {
    const double w = to_double(p.phi[i]) * b.sizes[i];
    total += w;
    same += w * b.consistency[i];
  }
  const double cap = std::numbers::sqrt2 * b.lipschitz;
  const double diff = total - same;
  if (diff <= 0.0 || b.eta == 0.0) return 0.0;
  if (same <= 0.0) return cap;
  // 1/(R-1) = same/diff
  return cap / (1.0 + (same / diff) * (b.gamma / b.eta));
}

/// sqrt(2) Lip * sum s_i|G^i|(1-C^i) / (sum |G^i|(1-C^i) + (gamma/eta) sum |G^i| C^i),
/// with the softmax gate rescaled to sum to L+1 first.
inline double bound_lgtl(std::span<const double> s_hat, const BoundInputs& b) {
  b.validate();
  if (s_hat.size() != b.sizes.size()) throw ShapeError("gate and hop arrays differ in length");
  double ssum = 0.0;
  for (double s : s_hat) ssum += s;
  if (!(ssum > 0.0)) throw DomainError("gate weights sum to zero");
  const double rescale = static_cast<double>(s_hat.size()) / ssum;
  double num = 0.0, diff = 0.0, same = 0.0;
  for (std::size_t i = 0; i < s_hat.size(); ++i) {
    num += rescale * s_hat[i] * b.sizes[i] * (1.0 - b.consistency[i]);
    diff += b.sizes[i] * (1.0 - b.consistency[i]);
    same += b.sizes[i] * b.consistency[i];
  }
  if (num == 0.0) return 0.0;
  if (b.eta == 0.0) return 0.0;
  const double den = diff + (b.gamma / b.eta) * same;
  if (!(den > 0.0)) throw DomainError("bound denominator is zero");
  return std::numbers::sqrt2 * b.lipschitz * num / den;
}

struct EtaGamma {
  double eta = 0.0;
  double gamma = 0.0;
};

/// Means of exp(q k^T / sqrt h) over key rows split by `same`. Either side empty is a
/// domain error.
inline EtaGamma eta_gamma_from_keys(const RowVector& query_source, const Matrix& key_sources,
                                    const std::vector<bool>& same, const ProjectionWeights& w) {
  if (static_cast<std::size_t>(key_sources.rows()) != same.size()) throw ShapeError("one label flag per key row");
  const Vector q = (query_source * w.W_Q).transpose();
  const Vector scores = (key_sources * w.W_K) * q / std::sqrt(static_cast<double>(w.h()));
  double es = 0.0, ed = 0.0;
  std::size_t ns = 0, nd = 0;
  for (std::size_t i = 0; i < same.size(); ++i) {
    const double e = std::exp(scores(static_cast<Eigen::Index>(i)));
    if (same[i]) es += e, ++ns;
    else ed += e, ++nd;
  }
  if (ns == 0) throw DomainError("no same-label keys to average");
  if (nd == 0) throw DomainError("no differently labelled keys to average");
  return {ed / static_cast<double>(nd), es / static_cast<double>(ns)};
}

/// eta and gamma over the nodes at hops 1..hops from u, scored against u's raw query.
inline EtaGamma estimate_eta_gamma(const Graph& g, NodeId u, const ProjectionWeights& w, std::size_t hops) {
  const auto& y = g.labels();
  w.validate();
  if (static_cast<Eigen::Index>(g.feature_dim()) != w.h()) throw ShapeError("feature width != hidden width");
  auto layers = hop_layers(g, u, hops);
  std::vector<NodeId> nodes;
  for (std::size_t k = 1; k < layers.size(); ++k) nodes.insert(nodes.end(), layers[k].begin(), layers[k].end());
  Matrix keys(static_cast<Eigen::Index>(nodes.size()), w.h());
  std::vector<bool> same(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    keys.row(static_cast<Eigen::Index>(i)) = g.feature(nodes[i]);
    same[i] = y[nodes[i]] == y[u];
  }
  return eta_gamma_from_keys(g.feature(u), keys, same, w);
}

/// Smallest L with ||x_u - x_v|| <= L ||y_u - y_v|| over all differently labelled
/// pairs, using ||y_u - y_v|| = sqrt 2 for distinct one-hot labels.
inline double estimate_lipschitz(const Graph& g) {
  const auto& y = g.labels();
  const auto& x = g.features();
  double best = -1.0;
  for (NodeId u = 0; u < g.num_nodes(); ++u)
    for (NodeId v = u + 1; v < g.num_nodes(); ++v)
      if (y[u] != y[v]) best = std::max(best, (x.row(u) - x.row(v)).norm());
  if (best < 0.0) throw DomainError("no differently labelled pair");
  return best / std::numbers::sqrt2;
}

}  // namespace lgtl
