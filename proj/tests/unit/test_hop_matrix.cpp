#include <gtest/gtest.h>

#include "lgtl/generators.hpp"
#include "lgtl/hop_matrix.hpp"

using namespace lgtl;

namespace {

Rational R(long long a, long long b = 1) { return Rational(a, b); }

// M_HO from the explicit walk-count formula: on the tree, a length-k walk from the
// root ending at a fixed hop-i node has probability (#walks) / n^k where each step
// away from the root picks one of n (root) or n - 1 children and each step back
// is forced. Counted here by dynamic programming over depth.
Rational walk_formula(long long n, std::size_t k, std::size_t i) {
  if (i > k) return 0;
  // ways[d] = number of length-s walks from the root that end at depth d, counted
  // per endpoint (divide by the hop size at the end)
  std::vector<Rational> ways(k + 2, Rational(0));
  ways[0] = 1;
  for (std::size_t s = 0; s < k; ++s) {
    std::vector<Rational> next(k + 2, Rational(0));
    for (std::size_t d = 0; d <= k; ++d) {
      if (ways[d] == 0) continue;
      const long long down = d == 0 ? n : n - 1;
      next[d + 1] += ways[d] * down;
      if (d > 0) next[d - 1] += ways[d];
    }
    ways = next;
  }
  Rational hop_size = 1;
  for (std::size_t d = 1; d <= i; ++d) hop_size *= d == 1 ? n : n - 1;
  Rational nk = 1;
  for (std::size_t s = 0; s < k; ++s) nk *= n;
  return ways[i] / hop_size / nk;
}

}  // namespace

TEST(MHo, BaseValues) {
  for (long long n = 2; n <= 6; ++n) {
    auto t = m_ho(static_cast<std::size_t>(n), 4);
    EXPECT_EQ(t(0, 0), 1);
    EXPECT_EQ(t(1, 1), R(1, n));
    EXPECT_EQ(t(3, 1), R(2 * n - 1, n * n * n));
    EXPECT_EQ(t(2, 0), R(1, n));
  }
  EXPECT_THROW(m_ho(1, 3), PreconditionError);
}

TEST(MHo, MatchesWalkCountFormula) {
  for (long long n = 2; n <= 5; ++n) {
    auto t = m_ho(static_cast<std::size_t>(n), 9);
    for (std::size_t k = 0; k <= 9; ++k)
      for (std::size_t i = 0; i <= 9; ++i) EXPECT_EQ(t(k, i), walk_formula(n, k, i)) << n << ' ' << k << ' ' << i;
  }
}

TEST(MHo, MatchesOracleOnTrees) {
  for (std::size_t n : {2u, 3u, 5u})
    for (std::size_t K = 0; K <= 6; ++K) {
      auto tree = generate_regular_tree(n, std::max<std::size_t>(K, 1));
      auto oracle = oracle_ho_coefficients(tree, 0, K);
      auto t = m_ho(n, K);
      for (std::size_t k = 0; k <= K; ++k)
        for (std::size_t i = 0; i <= K; ++i) EXPECT_EQ(t(k, i), oracle[k][i]);
    }
}

TEST(MHo, OracleRejectsNonTrees) {
  Graph cyc(3, std::vector<Graph::Edge>{{0, 1}, {1, 2}, {0, 2}}, FeatureMatrix::Zero(3, 1));
  EXPECT_THROW(oracle_ho_coefficients(cyc, 0, 2), PreconditionError);
  auto small = oracle_ho_coefficients(generate_regular_tree(3, 1), 0, 1);
  EXPECT_EQ(small[0][0], 1);
  EXPECT_EQ(small[1][1], R(1, 3));
  EXPECT_EQ(oracle_ho_coefficients(generate_regular_tree(2, 3), 0, 3)[3][1], R(3, 8));
}

TEST(MHo, RowRatioClosedForm) {
  for (long long n = 2; n <= 6; ++n) {
    auto t = m_ho(static_cast<std::size_t>(n), 8);
    for (long long k = 2; k <= 8; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      EXPECT_EQ(t(kk, kk - 2) / t(kk, kk), R((k - 1) * n - (k - 2)));
    }
  }
}

TEST(MHo, ParityAndRowDecayHold) {
  for (std::size_t n = 2; n <= 6; ++n)
    for (std::size_t K = 0; K <= 10; ++K) {
      auto r = check_properties(m_ho(n, K));
      EXPECT_TRUE(r.parity);
      EXPECT_TRUE(r.row_decay) << r.counterexample.value_or("");
    }
}

// Down a column, M[k+2][k] / M[k][k] = ((k+1)n - k) / n^2, which reaches 1 at k = n
// and exceeds it beyond, so strict column decay cannot hold once K >= n + 2.
TEST(MHo, ColumnRatioClosedForm) {
  for (long long n = 2; n <= 6; ++n) {
    auto t = m_ho(static_cast<std::size_t>(n), 12);
    for (long long k = 0; k + 2 <= 12; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      EXPECT_EQ(t(kk + 2, kk) / t(kk, kk), R((k + 1) * n - k, n * n));
    }
  }
  auto t = m_ho(2, 4);
  EXPECT_EQ(t(2, 2), t(4, 2));
  EXPECT_FALSE(check_properties(m_ho(2, 4)).column_monotonicity);
  EXPECT_TRUE(check_properties(m_ho(3, 4)).column_monotonicity);
}

TEST(MNd, BaseValues) {
  auto t = m_nd(2, 8);
  EXPECT_EQ(t(0, 0), 1);
  EXPECT_EQ(t(1, 1), 1);
  EXPECT_EQ(t(1, 0), 0);
  EXPECT_EQ(t(2, 0), 2);
  EXPECT_EQ(t(2, 2), 1);
  for (std::size_t k = 0; k <= 8; ++k)
    for (std::size_t i = 0; i <= 8; ++i) EXPECT_EQ(denominator(t(k, i)), 1);
}

TEST(MNd, WalkCountsTimesProbability) {
  // an ND tree with full sampling enumerates all walks, so M_ND = n^k M_HO
  for (long long n = 2; n <= 5; ++n) {
    auto nd = m_nd(static_cast<std::size_t>(n), 8);
    auto ho = m_ho(static_cast<std::size_t>(n), 8);
    Rational nk = 1;
    for (std::size_t k = 0; k <= 8; ++k, nk *= n)
      for (std::size_t i = 0; i <= 8; ++i) EXPECT_EQ(nd(k, i), nk * ho(k, i));
  }
}

TEST(MNd, PropertiesHold) {
  for (std::size_t n = 2; n <= 6; ++n)
    for (std::size_t K = 0; K <= 10; ++K) {
      auto r = check_properties(m_nd(n, K));
      EXPECT_TRUE(r.all()) << "n=" << n << " K=" << K << ' ' << r.counterexample.value_or("");
    }
}

TEST(Phi, Values) {
  auto p1 = phi(3, 1);
  EXPECT_EQ(p1.phi, (std::vector<Rational>{1, 1}));
  auto p2 = phi(2, 2);
  EXPECT_EQ(p2.phi[2], 1);
  EXPECT_EQ(p2.phi[0], 3);  // M[0][0] + M[2][0] = 1 + 2
  for (std::size_t n = 2; n <= 6; ++n)
    for (std::size_t L = 0; L <= 10; ++L) {
      auto m = m_nd(n, L);
      auto p = phi(n, L);
      for (std::size_t k = 0; k <= L; ++k) {
        Rational s = 0;
        for (std::size_t i = 0; i <= L; ++i)
          if (i >= k && (i - k) % 2 == 0) s += m(i, k);
        EXPECT_EQ(p.phi[k], s);
      }
      auto r = check_phi_properties(p);
      EXPECT_TRUE(r.all()) << "n=" << n << " L=" << L << ' ' << r.counterexample.value_or("");
    }
}

TEST(Phi, OddRecurrence) {
  for (std::size_t n = 2; n <= 5; ++n)
    for (std::size_t L = 1; L <= 9; L += 2) {
      auto p = phi(n, L);
      for (std::size_t t = 0; 2 * t + 1 <= L; ++t) {
        const Rational next = 2 * t + 2 <= L ? p.phi[2 * t + 2] : Rational(0);
        EXPECT_EQ(p.phi[2 * t + 1], p.phi[2 * t] + Rational(static_cast<long long>(n - 1)) * next);
      }
    }
}

TEST(EffectiveAttentionHo, Examples) {
  auto t = m_ho(2, 2);
  auto a = effective_attention_ho(std::vector<Rational>{1, 0, 0}, t);
  EXPECT_EQ(a, (std::vector<Rational>{1, 0, 0}));
  auto t3 = m_ho(3, 2);
  auto b = effective_attention_ho(std::vector<Rational>{0, 1, 0}, t3);
  EXPECT_EQ(b, (std::vector<Rational>{0, R(1, 3), 0}));
  auto c = effective_attention_ho(std::vector<Rational>{0, 0, 1}, t);
  EXPECT_EQ(c, (std::vector<Rational>{R(1, 2), 0, R(1, 4)}));
  EXPECT_EQ(c[0] * 1 + c[2] * 2, 1);
  EXPECT_THROW(effective_attention_ho(std::vector<double>{0.5, 0.6}, t), PreconditionError);
  EXPECT_THROW(effective_attention_ho(std::vector<double>{0.25, 0.25, 0.25, 0.25}, t), PreconditionError);
  EXPECT_THROW(effective_attention_ho(std::vector<double>{1}, m_nd(2, 2)), PreconditionError);
}

TEST(EffectiveAttentionHo, MassConservationAndNearHopDominance) {
  CounterRng rng(5);
  for (std::size_t n = 2; n <= 5; ++n)
    for (std::size_t K = 1; K <= 7; ++K) {
      for (int trial = 0; trial < 5; ++trial) {
        std::vector<Rational> alpha(K + 1);
        Rational total = 0;
        for (auto& a : alpha) {
          a = Rational(static_cast<long long>(rng.below(10)));
          total += a;
        }
        if (total == 0) continue;
        for (auto& a : alpha) a /= total;
        auto eff = effective_attention_ho(alpha, m_ho(n, K));
        Rational mass = 0;
        for (std::size_t k = 0; k <= K; ++k) mass += Rational(static_cast<long long>(regular_hop_size(n, k))) * eff[k];
        EXPECT_EQ(mass, 1);
        for (std::size_t k1 = 0; k1 <= K; ++k1)
          for (std::size_t k2 = k1 + 2; k2 <= K; k2 += 2) {
            bool above = false;
            for (std::size_t i = k2; i <= K; ++i) above = above || alpha[i] > 0;
            if (above) {
              EXPECT_GT(eff[k1], eff[k2]);
            }
          }
      }
    }
}

TEST(EffectiveAttentionNd, Scaling) {
  auto p = phi(2, 2);
  std::vector<TaggedScore> s{{0, 0, 0.5}, {1, 2, 0.25}, {2, 1, 0.25}};
  auto out = effective_attention_nd(s, p);
  EXPECT_DOUBLE_EQ(out[0], 0.5 * 3);
  EXPECT_DOUBLE_EQ(out[1], 0.25);
  EXPECT_DOUBLE_EQ(out[2], 0.25 * to_double(p.phi[1]));
  PhiVector ones{2, 2, {1, 1, 1}};
  auto same = effective_attention_nd(s, ones);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_DOUBLE_EQ(same[i], s[i].alpha);
  EXPECT_THROW(effective_attention_nd({{0, -1, 1.0}}, p), PreconditionError);
  EXPECT_THROW(effective_attention_nd({{0, 3, 1.0}}, p), PreconditionError);
}
