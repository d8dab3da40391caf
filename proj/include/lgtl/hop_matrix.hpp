#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lgtl/generators.hpp"
#include "lgtl/graph.hpp"
#include "lgtl/rational.hpp"

namespace lgtl {

enum class TableKind { HO, ND };

inline const char* to_string(TableKind k) { return k == TableKind::HO ? "ho" : "nd"; }

/// M[k][i], indexed [token depth][hop], (K+1)x(K+1) with explicit zeros.
struct HopContribTable {
  TableKind kind = TableKind::HO;
  std::size_t n = 2;
  std::size_t K = 0;
  std::vector<std::vector<Rational>> entries;

  const Rational& operator()(std::size_t k, std::size_t i) const { return entries.at(k).at(i); }
  /// Out-of-range reads are zero, which is what the recursions need at the edges.
  Rational get(std::size_t k, std::size_t i) const {
    if (k > K || i > K) return Rational(0);
    return entries[k][i];
  }
};

struct PhiVector {
  std::size_t n = 2;
  std::size_t L = 0;
  std::vector<Rational> phi;
};

namespace detail {
inline void check_degree(std::size_t n) {
  if (n < 2) throw PreconditionError("branching degree must be >= 2, got " + std::to_string(n));
}
}  // namespace detail

inline HopContribTable m_ho(std::size_t n, std::size_t K) {
  detail::check_degree(n);
  HopContribTable t{TableKind::HO, n, K, std::vector<std::vector<Rational>>(K + 1, std::vector<Rational>(K + 1))};
  const Rational inv_n(1, static_cast<long long>(n));
  t.entries[0][0] = 1;
  for (std::size_t k = 1; k <= K; ++k) {
    t.entries[k][0] = t.get(k - 1, 1);
    for (std::size_t i = 1; i <= k; ++i)
      t.entries[k][i] = inv_n * (t.get(k - 1, i - 1) + Rational(static_cast<long long>(n - 1)) * t.get(k - 1, i + 1));
  }
  return t;
}

inline HopContribTable m_nd(std::size_t n, std::size_t K) {
  detail::check_degree(n);
  HopContribTable t{TableKind::ND, n, K, std::vector<std::vector<Rational>>(K + 1, std::vector<Rational>(K + 1))};
  const Rational nn(static_cast<long long>(n));
  t.entries[0][0] = 1;
  if (K >= 1) t.entries[1][1] = 1;
  for (std::size_t k = 2; k <= K; ++k) {
    t.entries[k][0] = nn * t.get(k - 1, 1);
    for (std::size_t j = 1; j <= k; ++j)
      t.entries[k][j] = t.get(k - 1, j - 1) + (nn - 1) * t.get(k - 1, j + 1);
  }
  return t;
}

inline PhiVector phi(std::size_t n, std::size_t L) {
  auto m = m_nd(n, L);
  PhiVector p{n, L, std::vector<Rational>(L + 1)};
  for (std::size_t k = 0; k <= L; ++k)
    for (std::size_t i = k; i <= L; i += 2) p.phi[k] += m(i, k);
  return p;
}

namespace detail {
inline double abs_diff_from_one(const Rational& s) { return std::abs(to_double(s - 1)); }
inline double abs_diff_from_one(double s) { return std::abs(s - 1.0); }
inline double scalar_of(const Rational& r) { return to_double(r); }
inline double scalar_of(double r) { return r; }
template <typename T>
T from_rational(const Rational& r) {
  if constexpr (std::is_same_v<T, Rational>) return r;
  else return to_double(r);
}
}  // namespace detail

/// alpha-hat_k = sum over i >= k with i = k (mod 2) of alpha_i * M[i][k]: the weight each
/// individual hop-k node receives when attention alpha is spread over HO tokens.
template <typename T>
std::vector<T> effective_attention_ho(const std::vector<T>& alpha, const HopContribTable& table) {
  if (table.kind != TableKind::HO) throw PreconditionError("effective_attention_ho needs an HO table");
  if (alpha.size() > table.K + 1)
    throw PreconditionError("alpha has " + std::to_string(alpha.size()) + " entries but table depth is " +
                            std::to_string(table.K));
  T sum = T(0);
  for (const auto& a : alpha) {
    if (detail::scalar_of(a) < 0) throw PreconditionError("attention weights must be nonnegative");
    sum += a;
  }
  if (detail::abs_diff_from_one(sum) > 1e-9) throw PreconditionError("attention weights do not sum to 1");
  std::vector<T> out(alpha.size(), T(0));
  for (std::size_t k = 0; k < alpha.size(); ++k)
    for (std::size_t i = k; i < alpha.size(); i += 2) out[k] += alpha[i] * detail::from_rational<T>(table(i, k));
  return out;
}

struct TaggedScore {
  NodeId node = 0;
  int hop = -1;  // -1: untagged
  double alpha = 0.0;
};

/// ND effective attention: each node's direct score scaled by the phi weight of its hop.
inline std::vector<double> effective_attention_nd(const std::vector<TaggedScore>& scores, const PhiVector& p) {
  std::vector<double> out;
  out.reserve(scores.size());
  for (const auto& s : scores) {
    if (s.hop < 0 || static_cast<std::size_t>(s.hop) > p.L)
      throw PreconditionError("node " + std::to_string(s.node) + " has no valid hop tag");
    out.push_back(to_double(p.phi[static_cast<std::size_t>(s.hop)]) * s.alpha);
  }
  return out;
}

/// Brute-force HO coefficients by walk enumeration on a tree: the weight of v in T_k
/// is the sum over length-k walks u -> v of the product of 1/deg over the walk's
/// first k nodes. Result [k][i] is the common weight of hop-i nodes in T_k.
inline std::vector<std::vector<Rational>> oracle_ho_coefficients(const Graph& tree, NodeId u, std::size_t K) {
  tree.check_node(u);
  const auto n = tree.num_nodes();
  if (tree.num_edges() + 1 != n) throw PreconditionError("oracle needs a tree (|E| = |V| - 1)");
  auto dist = hop_distances(tree, u, n);
  for (int d : dist)
    if (d < 0) throw PreconditionError("oracle needs a connected tree");

  std::vector<std::vector<std::optional<Rational>>> seen(K + 1, std::vector<std::optional<Rational>>(K + 1));
  std::vector<Rational> weight(n);
  for (std::size_t k = 0; k <= K; ++k) {
    std::fill(weight.begin(), weight.end(), Rational(0));
    // depth-first over all walks of length k
    struct Frame {
      NodeId node;
      std::size_t step;
      Rational w;
    };
    std::vector<Frame> stack{{u, 0, Rational(1)}};
    while (!stack.empty()) {
      Frame f = std::move(stack.back());
      stack.pop_back();
      if (f.step == k) {
        weight[f.node] += f.w;
        continue;
      }
      const auto nbrs = tree.neighbors(f.node);
      if (nbrs.empty()) throw PreconditionError("walk reached an isolated node");
      const Rational w = f.w / static_cast<long long>(nbrs.size());
      for (NodeId v : nbrs) stack.push_back({v, f.step + 1, w});
    }
    for (NodeId v = 0; v < n; ++v) {
      const auto i = static_cast<std::size_t>(dist[v]);
      if (i > K) continue;
      auto& slot = seen[k][i];
      if (!slot) slot = weight[v];
      else if (*slot != weight[v])
        throw PreconditionError("hop " + std::to_string(i) + " nodes get unequal weights; tree is not regular to depth " +
                                std::to_string(K));
    }
  }
  std::vector<std::vector<Rational>> out(K + 1, std::vector<Rational>(K + 1));
  for (std::size_t k = 0; k <= K; ++k)
    for (std::size_t i = 0; i <= K; ++i) out[k][i] = seen[k][i].value_or(Rational(0));
  return out;
}

struct PropertyReport {
  bool parity = true;
  bool row_decay = true;
  bool column_monotonicity = true;
  std::optional<std::string> counterexample;

  bool all() const { return parity && row_decay && column_monotonicity; }

  void fail(bool PropertyReport::*which, std::string what) {
    this->*which = false;
    if (!counterexample) counterexample = std::move(what);
  }
};

namespace detail {
inline std::string cell(const char* name, std::size_t k, std::size_t i, const Rational& v) {
  return std::string(name) + "[" + std::to_string(k) + "][" + std::to_string(i) + "]=" + lgtl::to_string(v);
}
}  // namespace detail

/// Parity support, row and column ordering. For HO: rows decay (M[k][i] > M[k][i+2])
/// and columns decay (M[k][i] > M[k+2][i]). For ND: rows decay within a layer and
/// columns grow across layers (M[k][i] < M[k+2][i]).
inline PropertyReport check_properties(const HopContribTable& t) {
  PropertyReport r;
  const char* name = to_string(t.kind);
  for (std::size_t k = 0; k <= t.K; ++k)
    for (std::size_t i = 0; i <= t.K; ++i) {
      const bool support = i <= k && (k - i) % 2 == 0;
      const bool nonzero = t(k, i) != 0;
      if (support != nonzero) {
        // ND's M[k][0] at odd k and the like are structural zeros; any nonzero off-support is a violation
        if (nonzero || support)
          r.fail(&PropertyReport::parity, detail::cell(name, k, i, t(k, i)) + (nonzero ? " off-parity" : " missing"));
      }
    }
  for (std::size_t k = 0; k <= t.K; ++k)
    for (std::size_t i = k % 2; i + 2 <= k; i += 2)
      if (!(t(k, i) > t(k, i + 2)))
        r.fail(&PropertyReport::row_decay,
               detail::cell(name, k, i, t(k, i)) + " <= " + detail::cell(name, k, i + 2, t(k, i + 2)));
  for (std::size_t k = 0; k + 2 <= t.K; ++k)
    for (std::size_t i = k % 2; i <= k; i += 2) {
      const bool ok = t.kind == TableKind::HO ? t(k, i) > t(k + 2, i) : t(k, i) < t(k + 2, i);
      if (!ok)
        r.fail(&PropertyReport::column_monotonicity,
               detail::cell(name, k, i, t(k, i)) + " vs " + detail::cell(name, k + 2, i, t(k + 2, i)));
    }
  return r;
}

struct PhiReport {
  bool recurrence = true;      // the odd/even-L identity linking neighbouring phi entries
  bool near_hop = true;        // phi_k > phi_{k+2}
  bool parity_bias = true;     // phi_k > phi_{k-1} and phi_k > (n-1) phi_{k+1} on the favoured parity
  std::optional<std::string> counterexample;

  bool all() const { return recurrence && near_hop && parity_bias; }
  void fail(bool PhiReport::*which, std::string what) {
    this->*which = false;
    if (!counterexample) counterexample = std::move(what);
  }
};

/// The favoured parity is that of L. The comparison phi_k > phi_{k-1} becomes an
/// equality at k = L (both equal 1), so it is checked strictly for k < L and as
/// equality at k = L.
inline PhiReport check_phi_properties(const PhiVector& p) {
  PhiReport r;
  const auto& f = p.phi;
  const std::size_t L = p.L;
  const Rational nm1(static_cast<long long>(p.n - 1));
  auto at = [&](std::size_t k) { return k <= L ? f[k] : Rational(0); };
  auto cell = [](std::size_t k, const Rational& v) { return "phi[" + std::to_string(k) + "]=" + lgtl::to_string(v); };

  for (std::size_t k = L % 2 == 1 ? 1 : 2; k <= L; k += 2)
    if (at(k) != at(k - 1) + nm1 * at(k + 1))
      r.fail(&PhiReport::recurrence, cell(k, at(k)) + " != phi[k-1] + (n-1) phi[k+1]");

  for (std::size_t k = 0; k + 2 <= L; ++k)
    if (!(at(k) > at(k + 2))) r.fail(&PhiReport::near_hop, cell(k, at(k)) + " <= " + cell(k + 2, at(k + 2)));

  for (std::size_t k = L % 2; k <= L; k += 2) {
    if (k >= 1) {
      const bool ok = k < L ? at(k) > at(k - 1) : at(k) == at(k - 1);
      if (!ok) r.fail(&PhiReport::parity_bias, cell(k, at(k)) + " vs " + cell(k - 1, at(k - 1)));
    }
    if (!(at(k) > nm1 * at(k + 1)))
      r.fail(&PhiReport::parity_bias, cell(k, at(k)) + " <= (n-1) " + cell(k + 1, at(k + 1)));
  }
  return r;
}

}  // namespace lgtl
