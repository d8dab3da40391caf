#include <map>

#include <gtest/gtest.h>

#include "lgtl/generators.hpp"
#include "lgtl/hop_matrix.hpp"
#include "lgtl/templates.hpp"

using namespace lgtl;

namespace {

Graph path3() {
  FeatureMatrix x(3, 2);
  x << 1, 0, 0, 1, 3, 5;
  return Graph(3, std::vector<Graph::Edge>{{0, 1}, {1, 2}}, x);
}

}  // namespace

TEST(NoneTemplate, SingleToken) {
  auto g = path3();
  for (NodeId u = 0; u < 3; ++u) {
    auto t = none_tokens(g, u);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_TRUE(t.tokens.row(0) == g.feature(u));
    ASSERT_EQ(t.provenance[0].size(), 1u);
    EXPECT_EQ(t.provenance[0][0].node, u);
    EXPECT_EQ(t.provenance[0][0].weight, 1);
  }
  EXPECT_THROW(none_tokens(g, 3), RangeError);
}

TEST(HoTemplate, BaseCaseAndOneStep) {
  auto g = path3();
  auto t0 = ho_tokens(g, 1, 0);
  ASSERT_EQ(t0.size(), 1u);
  EXPECT_TRUE(t0.tokens.row(0) == g.feature(1));
  auto t1 = ho_tokens(g, 1, 1);
  RowVector want = (g.feature(0) + g.feature(2)) / 2.0;
  EXPECT_TRUE(t1.tokens.row(1).isApprox(want, 1e-15));
}

TEST(HoTemplate, RegularTreeWeight) {
  for (long long n = 2; n <= 5; ++n) {
    auto tree = generate_regular_tree(static_cast<std::size_t>(n), 3);
    auto t = ho_tokens(tree, 0, 3);
    for (const auto& s : t.provenance[3])
      if (tree.has_edge(0, s.node)) {
        EXPECT_EQ(s.weight, Rational(2 * n - 1, n * n * n));
      }
  }
}

TEST(HoTemplate, MassAndReconstruction) {
  SbmConfig c;
  c.nodes_per_class = 20;
  c.p_intra = 0.2;
  c.p_inter = 0.1;
  c.seed = 2;
  auto g = generate_sbm(c);
  for (NodeId u = 0; u < 10; ++u) {
    if (g.degree(u) == 0) continue;
    TokenList t;
    try {
      t = ho_tokens(g, u, 3);
    } catch (const DegenerateStructureError&) {
      continue;
    }
    for (std::size_t k = 0; k < t.size(); ++k) {
      EXPECT_EQ(t.mass(k), 1);
      const RowVector r = t.reconstruct(g, k);
      EXPECT_LE((r - t.tokens.row(static_cast<Eigen::Index>(k))).norm(), 1e-12 * std::max(1.0, r.norm()));
    }
  }
}

TEST(HoTemplate, StackMatchesPerNode) {
  SbmConfig c;
  c.nodes_per_class = 15;
  c.p_intra = 0.3;
  c.p_inter = 0.1;
  c.seed = 3;
  auto g = generate_sbm(c);
  auto stack = ho_token_stack(g, 2);
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    try {
      auto t = ho_tokens(g, u, 2);
      for (Eigen::Index k = 0; k <= 2; ++k) EXPECT_TRUE(stack[k].row(u).isApprox(t.tokens.row(k), 1e-12));
    } catch (const DegenerateStructureError&) {
    }
  }
}

TEST(HoTemplate, IsolatedNodeIsDegenerate) {
  Graph g(3, std::vector<Graph::Edge>{{0, 1}}, FeatureMatrix::Ones(3, 1));
  EXPECT_THROW(ho_tokens(g, 2, 1), DegenerateStructureError);
  EXPECT_NO_THROW(ho_tokens(g, 2, 0));
}

TEST(HoTemplate, MatchesTableOnRegularTree) {
  for (std::size_t n : {2u, 3u}) {
    const std::size_t L = 4;
    auto tree = generate_regular_tree(n, L);
    auto dist = hop_distances(tree, 0, L);
    auto coeff = ho_coefficients(tree, 0, L);
    auto M = m_ho(n, L);
    for (std::size_t k = 0; k <= L; ++k)
      for (NodeId v = 0; v < tree.num_nodes(); ++v) {
        auto it = coeff[k].find(v);
        const Rational got = it == coeff[k].end() ? Rational(0) : it->second;
        EXPECT_EQ(got, M(k, static_cast<std::size_t>(dist[v])));
      }
  }
}

TEST(NdTemplate, PathSingleSample) {
  auto g = path3();
  const std::vector<std::size_t> sizes{1};
  auto [t, tree] = nd_tokens(g, 1, sizes, 5);
  ASSERT_EQ(tree.layers.size(), 2u);
  ASSERT_EQ(tree.layers[1].size(), 1u);
  EXPECT_TRUE(tree.layers[1][0] == 0 || tree.layers[1][0] == 2);
  EXPECT_EQ(t.size(), 2u);
}

TEST(NdTemplate, LayerSizes) {
  auto tree = generate_regular_tree(3, 3);
  const std::vector<std::size_t> sizes{2, 2};
  auto nd = nd_tree(tree, 0, sizes, 1);
  ASSERT_EQ(nd.layers.size(), 3u);
  EXPECT_EQ(nd.layers[1].size(), 2u);
  EXPECT_EQ(nd.layers[2].size(), 4u);
  for (std::size_t k = 1; k < nd.layers.size(); ++k)
    for (std::size_t j = 0; j < nd.layers[k].size(); ++j) {
      const NodeId parent = nd.layers[k - 1][nd.parent_index(k, j)];
      const NodeId v = nd.layers[k][j];
      EXPECT_TRUE(v == parent || tree.has_edge(parent, v));
    }
}

TEST(NdTemplate, PaddingWithParent) {
  Graph g(2, std::vector<Graph::Edge>{{0, 1}}, FeatureMatrix::Ones(2, 1));
  const std::vector<std::size_t> sizes{3};
  auto nd = nd_tree(g, 0, sizes, 0);
  EXPECT_EQ(nd.layers[1], (std::vector<NodeId>{1, 0, 0}));
}

TEST(NdTemplate, SamplesWithoutReplacement) {
  auto tree = generate_regular_tree(5, 2);
  const std::vector<std::size_t> sizes{4};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto l = nd_tree(tree, 0, sizes, seed).layers[1];
    std::sort(l.begin(), l.end());
    EXPECT_EQ(std::unique(l.begin(), l.end()), l.end());
  }
}

TEST(NdTemplate, Deterministic) {
  SbmConfig c;
  c.seed = 8;
  auto g = generate_sbm(c);
  const std::vector<std::size_t> sizes{3, 2};
  auto a = nd_tree(g, 4, sizes, 99), b = nd_tree(g, 4, sizes, 99);
  EXPECT_EQ(a.layers, b.layers);
  EXPECT_THROW(nd_tree(g, 4, std::vector<std::size_t>{0}, 1), PreconditionError);
}

TEST(NdTemplate, OccurrenceCountsMatchTable) {
  for (std::size_t n : {2u, 3u})
    for (std::size_t K = 1; K <= 4; ++K) {
      auto tree = generate_regular_tree(n, K);
      const std::vector<std::size_t> sizes(K, n);
      auto nd = nd_tree(tree, 0, sizes, 1);
      auto dist = hop_distances(tree, 0, K);
      auto M = m_nd(n, K);
      for (std::size_t i = 0; i <= K; ++i) {
        std::map<NodeId, long long> count;
        for (NodeId v : nd.layers[i]) ++count[v];
        for (NodeId v = 0; v < tree.num_nodes(); ++v) {
          const auto j = static_cast<std::size_t>(dist[v]);
          EXPECT_EQ(Rational(count[v]), M(i, j)) << "n=" << n << " i=" << i << " node " << v;
        }
      }
    }
}

TEST(NdTemplate, FlattenOrder) {
  auto tree = generate_regular_tree(2, 2, 1, 3);
  const std::vector<std::size_t> sizes{2, 1};
  auto [t, nd] = nd_tokens(tree, 0, sizes, 4);
  std::size_t i = 0;
  for (std::size_t k = 0; k < nd.layers.size(); ++k)
    for (NodeId v : nd.layers[k]) {
      EXPECT_EQ(t.layer[i], k);
      EXPECT_EQ(t.provenance[i][0].node, v);
      EXPECT_TRUE(t.tokens.row(static_cast<Eigen::Index>(i)) == tree.feature(v));
      ++i;
    }
  EXPECT_EQ(i, t.size());
}
