#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <vector>

#include "lgtl/bound_checks.hpp"
#include "lgtl/generators.hpp"
#include "lgtl/hop_matrix.hpp"
#include "lgtl/lgtl.hpp"
#include "lgtl/templates.hpp"
#include "lgtl/training.hpp"

namespace lgtl {

struct CheckResult {
  std::string name;
  bool pass = true;
  std::string detail{};
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
}

inline ProjectionWeights random_projection(Eigen::Index h, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed);
  auto w = ProjectionWeights::zeros(h);
  for (auto* m : {&w.W_Q, &w.W_K, &w.W_V})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = scale * rng.normal();
  return w;
}

}  // namespace detail

inline CheckResult check_ho_oracle(std::initializer_list<std::size_t> degrees = {2, 3, 5}, std::size_t max_depth = 6) {
  CheckResult r{"ho_recursion_vs_walk_oracle"};
  for (auto n : degrees) {
    const auto tree = generate_regular_tree(n, max_depth);
    const auto oracle = oracle_ho_coefficients(tree, 0, max_depth);
    const auto table = m_ho(n, max_depth);
    for (std::size_t k = 0; k <= max_depth; ++k)
      for (std::size_t i = 0; i <= max_depth; ++i)
        if (table(k, i) != oracle[k][i] && r.pass) {
          r.pass = false;
          r.detail = "n=" + std::to_string(n) + " M[" + std::to_string(k) + "][" + std::to_string(i) + "]";
        }
  }
  return r;
}

inline CheckResult check_ho_closed_forms() {
  CheckResult r{"ho_closed_forms"};
  for (long long n = 2; n <= 6; ++n) {
    const auto t = m_ho(static_cast<std::size_t>(n), 8);
    const bool ok1 = t(1, 1) == Rational(1, n);
    const bool ok3 = t(3, 1) == Rational(2 * n - 1, n * n * n);
    bool ratio = true;
    for (long long k = 2; k <= 8; ++k)
      ratio = ratio && t(static_cast<std::size_t>(k), static_cast<std::size_t>(k - 2)) /
                               t(static_cast<std::size_t>(k), static_cast<std::size_t>(k)) ==
                           Rational((k - 1) * n - (k - 2));
    if (!(ok1 && ok3 && ratio) && r.pass) {
      r.pass = false;
      r.detail = "n=" + std::to_string(n);
    }
  }
  return r;
}

/// One result per property family over n in [2, 6], every depth up to max_depth.
inline std::vector<CheckResult> check_table_properties(std::size_t max_depth = 10) {
  CheckResult ho{"ho_parity_row_column"}, nd{"nd_parity_within_cross_layer"}, ph{"phi_recurrence_near_hop_parity"};
  auto note = [](CheckResult& r, const std::string& what) {
    if (!r.pass) return;
    r.pass = false;
    r.detail = what;
  };
  for (std::size_t n = 2; n <= 6; ++n)
    for (std::size_t K = 0; K <= max_depth; ++K) {
      const auto a = check_properties(m_ho(n, K));
      if (!a.all()) note(ho, "n=" + std::to_string(n) + " " + a.counterexample.value_or(""));
      const auto b = check_properties(m_nd(n, K));
      if (!b.all()) note(nd, "n=" + std::to_string(n) + " " + b.counterexample.value_or(""));
      const auto c = check_phi_properties(phi(n, K));
      if (!c.all()) note(ph, "n=" + std::to_string(n) + " L=" + std::to_string(K) + " " + c.counterexample.value_or(""));
    }
  return {ho, nd, ph};
}

/// Center-row attention over HO tokens on a regular tree equals the sum of per-node
/// effective attention times x_v W_V.
inline CheckResult check_ho_decomposition(std::size_t n = 3, std::size_t L = 3, std::uint64_t seed = 7) {
  CheckResult r{"ho_effective_attention_decomposition"};
  const auto tree = generate_regular_tree(n, L, 4, seed);
  const auto tl = ho_tokens(tree, 0, L);
  const auto w = detail::random_projection(4, seed);
  const auto res = attend(tl, w);
  const Vector alpha = res.weights.row(0).transpose();
  std::vector<double> a(alpha.data(), alpha.data() + alpha.size());
  const auto eff = effective_attention_ho(a, m_ho(n, L));
  const auto dist = hop_distances(tree, 0, L);
  RowVector agg = RowVector::Zero(4);
  double mass = 0.0;
  for (NodeId v = 0; v < tree.num_nodes(); ++v) {
    if (dist[v] < 0) continue;
    agg += eff[static_cast<std::size_t>(dist[v])] * tree.feature(v);
    mass += eff[static_cast<std::size_t>(dist[v])];
  }
  const double err = (agg * w.W_V - res.output.row(0)).cwiseAbs().maxCoeff();
  r.pass = err < 1e-9 && std::abs(mass - 1.0) < 1e-9;
  r.detail = "max_abs_err=" + detail::num(err) + " mass=" + detail::num(mass);
  return r;
}

inline std::vector<CheckResult> check_bound_suite(const BoundSuiteConfig& cfg = {}) {
  std::vector<CheckResult> out;
  const auto rows = run_bound_suite(cfg);
  for (const char* t : {"ho", "nd", "lgtl"}) {
    std::size_t n = 0, bad = 0;
    for (const auto& row : rows)
      if (row.template_name == t && !row.row.skipped) {
        ++n;
        bad += row.row.smoothness > row.row.bound + 1e-9 ? 1 : 0;
      }
    out.push_back({std::string("smoothness_bound_") + t, bad == 0,
                   std::to_string(bad) + "/" + std::to_string(n) + " violations"});
  }
  return out;
}

/// Specialized LGTL weights against the template effective attention.
inline std::vector<CheckResult> check_specialization(std::uint64_t seed = 11) {
  CheckResult ho{"specialize_to_ho"}, nd{"specialize_to_nd"};
  double worst_ho = 0.0, worst_nd = 0.0;
  CounterRng rng(seed);
  for (std::size_t n = 2; n <= 3; ++n)
    for (std::size_t L = 0; L <= 4; ++L) {
      Vector alpha(static_cast<Eigen::Index>(L + 1));
      for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha(i) = 0.1 + rng.uniform();
      alpha /= alpha.sum();
      const auto s = specialize_to_ho(n, L, alpha);
      // recompose through the actual gate adjustment
      const Vector adj = adjust_attention(alpha, s.gate);
      const auto ref = effective_attention_ho(std::vector<double>(alpha.data(), alpha.data() + alpha.size()), m_ho(n, L));
      for (std::size_t k = 0; k <= L; ++k)
        for (double b : s.beta[k]) worst_ho = std::max(worst_ho, std::abs(adj(static_cast<Eigen::Index>(k)) * b - ref[k]));

      const auto tree = generate_regular_tree(n, std::max<std::size_t>(L, 1));
      const auto dist = hop_distances(tree, 0, L);
      std::vector<TaggedScore> direct;
      for (NodeId v = 0; v < tree.num_nodes(); ++v)
        if (dist[v] >= 0) direct.push_back({v, dist[v], rng.uniform()});
      double total = 0;
      for (auto& d : direct) total += d.alpha;
      for (auto& d : direct) d.alpha /= total;
      const auto sp = specialize_to_nd(n, L, direct);
      const auto want = effective_attention_nd(direct, phi(n, L));
      for (std::size_t j = 0; j < direct.size(); ++j) worst_nd = std::max(worst_nd, std::abs(sp.per_node[j] - want[j]));
    }
  ho.pass = worst_ho < 1e-10;
  ho.detail = "max_abs_err=" + detail::num(worst_ho);
  nd.pass = worst_nd < 1e-10;
  nd.detail = "max_abs_err=" + detail::num(worst_nd);
  return {ho, nd};
}

/// Full LGTL pipeline (gate, selection, attention with trainable backbone, head) on a
/// 30-node graph, every coordinate.
inline CheckResult check_gradients(double eps = 1e-4, std::uint64_t seed = 3) {
  CheckResult r{"gradient_finite_difference"};
  SbmConfig c;
  c.nodes_per_class = 15;
  c.p_intra = 0.2;
  c.p_inter = 0.15;
  c.feature_dim = 4;
  c.seed = seed;
  const Graph g = generate_sbm(c);
  TrainConfig tc;
  tc.template_kind = TemplateKind::LGTL;
  tc.hop_count = 2;
  tc.sample_sizes = {3, 4};
  tc.seed = seed;
  InitScales s;
  s.gate = 0.5;
  s.selection = 0.5;
  s.classifier = 0.5;
  const auto p = init_params(4, 2, 2, tc.sample_sizes, seed, s);
  Inputs in(g, tc);
  std::vector<NodeId> batch(g.num_nodes());
  for (NodeId u = 0; u < g.num_nodes(); ++u) batch[u] = u;
  const auto rep = grad_check(in, batch, p, eps);
  r.pass = rep.max_rel_error < 1e-4;
  r.detail = "max_rel_err=" + detail::num(rep.max_rel_error) + " over " + std::to_string(rep.checked) + " coords";
  return r;
}

inline std::vector<CheckResult> run_invariant_checks() {
  std::vector<CheckResult> out{check_ho_oracle(), check_ho_closed_forms()};
  for (auto& r : check_table_properties()) out.push_back(r);
  out.push_back(check_ho_decomposition());
  for (auto& r : check_bound_suite()) out.push_back(r);
  for (auto& r : check_specialization()) out.push_back(r);
  out.push_back(check_gradients());
  return out;
}

}  // namespace lgtl
