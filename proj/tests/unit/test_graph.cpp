#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "lgtl/generators.hpp"
#include "lgtl/graph.hpp"
#include "lgtl/graph_io.hpp"

using namespace lgtl;
namespace fs = std::filesystem;

namespace {

Graph make(std::size_t n, std::vector<Graph::Edge> edges, std::optional<std::vector<int>> labels = std::nullopt) {
  return Graph(n, edges, FeatureMatrix::Zero(static_cast<Eigen::Index>(n), 1), std::move(labels));
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("lgtl_graph_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
  fs::path dir;
};

// plain BFS distances, written independently of hop_layers
std::vector<int> bfs(const Graph& g, NodeId s) {
  std::vector<int> d(g.num_nodes(), -1);
  std::vector<NodeId> q{s};
  d[s] = 0;
  for (std::size_t h = 0; h < q.size(); ++h)
    for (NodeId v : g.neighbors(q[h]))
      if (d[v] < 0) {
        d[v] = d[q[h]] + 1;
        q.push_back(v);
      }
  return d;
}

}  // namespace

TEST(Graph, NormalizesAdjacency) {
  auto g = make(4, {{2, 0}, {0, 2}, {1, 1}, {3, 1}, {0, 3}, {2, 0}});
  EXPECT_EQ(g.num_edges(), 3u);
  for (NodeId u = 0; u < 4; ++u) {
    auto nb = g.neighbors(u);
    EXPECT_TRUE(std::is_sorted(nb.begin(), nb.end()));
    EXPECT_EQ(std::set<NodeId>(nb.begin(), nb.end()).size(), nb.size());
    for (NodeId v : nb) {
      EXPECT_NE(u, v);
      EXPECT_TRUE(g.has_edge(v, u));
    }
  }
}

TEST(Graph, RejectsBadShapes) {
  EXPECT_THROW(Graph(3, std::vector<Graph::Edge>{}, FeatureMatrix::Zero(2, 1)), ShapeError);
  EXPECT_THROW(make(3, {}, std::vector<int>{0, 1}), ShapeError);
  EXPECT_THROW(make(2, {{0, 5}}), RangeError);
  EXPECT_THROW(make(2, {}).neighbors(2), RangeError);
}

TEST(KHop, PathAndTriangle) {
  auto path = make(3, {{0, 1}, {1, 2}});
  EXPECT_EQ(k_hop(path, 0, 2).members, std::vector<NodeId>{2});
  EXPECT_EQ(k_hop(path, 0, 0).members, std::vector<NodeId>{0});
  auto tri = make(3, {{0, 1}, {1, 2}, {0, 2}});
  EXPECT_TRUE(k_hop(tri, 0, 2).members.empty());
  EXPECT_THROW(k_hop(tri, 7, 1), RangeError);
}

TEST(KHop, RegularTreeLeaves) {
  auto t = generate_regular_tree(3, 2);
  auto leaves = k_hop(t, 0, 2).members;
  ASSERT_EQ(leaves.size(), 6u);
  for (NodeId v : leaves) EXPECT_EQ(t.degree(v), 1u);
}

TEST(KHop, HopsPartitionComponentAndMatchBfs) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SbmConfig c;
    c.nodes_per_class = 20;
    c.p_intra = 0.15;
    c.p_inter = 0.05;
    c.seed = seed;
    auto g = generate_sbm(c);
    const NodeId u = static_cast<NodeId>(seed * 3);
    auto d = bfs(g, u);
    auto layers = hop_layers(g, u, g.num_nodes());
    std::vector<int> seen(g.num_nodes(), 0);
    for (std::size_t k = 0; k < layers.size(); ++k)
      for (NodeId v : layers[k]) {
        ++seen[v];
        EXPECT_EQ(d[v], static_cast<int>(k));
      }
    for (NodeId v = 0; v < g.num_nodes(); ++v) EXPECT_EQ(seen[v], d[v] >= 0 ? 1 : 0);
  }
}

TEST(Homophily, EdgeCases) {
  EXPECT_DOUBLE_EQ(edge_homophily(make(3, {{0, 1}, {1, 2}}, std::vector<int>{1, 1, 1})), 1.0);
  // complete bipartite K_{2,2}, sides labelled differently
  EXPECT_DOUBLE_EQ(edge_homophily(make(4, {{0, 2}, {0, 3}, {1, 2}, {1, 3}}, std::vector<int>{0, 0, 1, 1})), 0.0);
  auto star = make(4, {{0, 1}, {0, 2}, {0, 3}}, std::vector<int>{0, 0, 1, 1});
  EXPECT_DOUBLE_EQ(edge_homophily(star), 1.0 / 3.0);
  EXPECT_THROW(edge_homophily(make(2, {})), PreconditionError);
  EXPECT_THROW(edge_homophily(make(2, {}, std::vector<int>{0, 1})), DomainError);
}

TEST(Homophily, EdgeHomophilyIsPermutationInvariant) {
  SbmConfig c;
  c.nodes_per_class = 15;
  c.p_intra = 0.2;
  c.p_inter = 0.1;
  c.seed = 9;
  auto g = generate_sbm(c);
  std::vector<NodeId> perm(g.num_nodes());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::vector<Graph::Edge> e;
  for (auto [a, b] : g.edges()) e.emplace_back(perm[a], perm[b]);
  std::vector<int> y(g.num_nodes());
  for (NodeId u = 0; u < g.num_nodes(); ++u) y[perm[u]] = g.label(u);
  Graph h(g.num_nodes(), e, FeatureMatrix::Zero(static_cast<Eigen::Index>(g.num_nodes()), 1), y);
  EXPECT_DOUBLE_EQ(edge_homophily(g), edge_homophily(h));
}

TEST(Homophily, NodeHomophily) {
  auto g = make(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}, std::vector<int>{0, 0, 0, 0, 1, 1});
  EXPECT_DOUBLE_EQ(node_homophily(g, 0), 0.75);
  EXPECT_DOUBLE_EQ(node_homophily(g, 1), 1.0);
  EXPECT_DOUBLE_EQ(node_homophily(g, 4), 0.0);
  EXPECT_THROW(node_homophily(g, 5), DomainError);
}

TEST(Homophily, HopConsistency) {
  auto g = make(5, {{0, 1}, {1, 2}, {2, 3}}, std::vector<int>{0, 1, 0, 1, 0});
  EXPECT_DOUBLE_EQ(hop_consistency(g, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(hop_consistency(g, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(hop_consistency(g, 0, 2), 1.0);
  EXPECT_THROW(hop_consistency(g, 0, 4), DomainError);
  auto same = make(3, {{0, 1}, {1, 2}}, std::vector<int>{2, 2, 2});
  for (std::size_t i = 0; i <= 2; ++i) EXPECT_DOUBLE_EQ(hop_consistency(same, 0, i), 1.0);
}

TEST(Homophily, HeterophilicSbmHasLowHop1HighHop2Consistency) {
  SbmConfig c;
  c.nodes_per_class = 100;
  c.p_intra = 0.005;
  c.p_inter = 0.08;
  c.seed = 4;
  auto g = generate_sbm(c);
  double c1 = 0, c2 = 0;
  int n = 0;
  for (NodeId u = 0; u < 40; ++u) {
    if (g.degree(u) == 0) continue;
    c1 += hop_consistency(g, u, 1);
    c2 += hop_consistency(g, u, 2);
    ++n;
  }
  EXPECT_LT(c1 / n, 0.2);
  EXPECT_GT(c2 / n, 0.8);
}

TEST(Sbm, ExtremeProbabilities) {
  SbmConfig c;
  c.nodes_per_class = 30;
  c.p_inter = 0.0;
  c.p_intra = 0.2;
  EXPECT_DOUBLE_EQ(edge_homophily(generate_sbm(c)), 1.0);
  c.p_intra = 0.0;
  c.p_inter = 0.2;
  EXPECT_DOUBLE_EQ(edge_homophily(generate_sbm(c)), 0.0);
  c.nodes_per_class = 0;
  EXPECT_THROW(generate_sbm(c), ConfigError);
  c.nodes_per_class = 5;
  c.p_intra = 1.5;
  EXPECT_THROW(generate_sbm(c), ConfigError);
}

TEST(Sbm, RealizedHomophilyNearExpectation) {
  // expected same-label edge share: p_intra * 2 C(100,2) / (that + p_inter * 100^2)
  const double intra_pairs = 2 * 100.0 * 99 / 2, inter_pairs = 100.0 * 100;
  const double expected = 0.1 * intra_pairs / (0.1 * intra_pairs + 0.01 * inter_pairs);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SbmConfig c;
    c.seed = seed;
    const double h = edge_homophily(generate_sbm(c));
    EXPECT_NEAR(h, 10.0 / 11.0, 0.1);
    EXPECT_NEAR(h, expected, 0.05);
  }
}

TEST(Sbm, BitDeterministic) {
  SbmConfig c;
  c.seed = 77;
  auto a = generate_sbm(c), b = generate_sbm(c);
  EXPECT_EQ(a.edges(), b.edges());
  EXPECT_TRUE(a.features() == b.features());
  c.seed = 78;
  EXPECT_NE(a.edges(), generate_sbm(c).edges());
}

TEST(RegularTree, SizesAndDegrees) {
  EXPECT_EQ(generate_regular_tree(2, 1).num_nodes(), 3u);
  EXPECT_EQ(generate_regular_tree(3, 2).num_nodes(), 10u);
  EXPECT_EQ(generate_regular_tree(2, 3).num_nodes(), 7u);
  for (std::size_t n = 2; n <= 4; ++n) {
    auto t = generate_regular_tree(n, 3);
    EXPECT_EQ(t.num_edges() + 1, t.num_nodes());
    EXPECT_EQ(t.num_nodes(), regular_tree_size(n, 3));
    for (NodeId u = 0; u < t.num_nodes(); ++u) EXPECT_TRUE(t.degree(u) == n || t.degree(u) == 1);
  }
  EXPECT_THROW(generate_regular_tree(1, 2), PreconditionError);
  EXPECT_THROW(generate_regular_tree(3, 0), PreconditionError);
}

TEST_F(TempDir, LoadPathGraph) {
  auto g = load_graph(write("e.txt", "0 1\n1 2\n"), write("x.csv", "1\n2\n3\n"));
  EXPECT_EQ(g.num_nodes(), 3u);
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_FALSE(g.has_labels());
}

TEST_F(TempDir, LoadSymmetrizesAndSkipsComments) {
  auto g = load_graph(write("e.txt", "# comment\n0 1\n1 0\n\n"), write("x.csv", "a,b\n1,2\n3,4\n"),
                      write("y.csv", "0\n1\n"));
  EXPECT_EQ(g.num_edges(), 1u);
  EXPECT_EQ(g.feature_dim(), 2u);
  EXPECT_EQ(g.label(1), 1);
}

TEST_F(TempDir, LoadErrors) {
  auto x3 = write("x3.csv", "1\n2\n3\n");
  EXPECT_THROW(load_graph(write("e4.txt", "0 1\n2 3\n"), x3), ShapeError);
  try {
    load_graph(write("bad.txt", "0 1\n1 x\n"), x3);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_graph(write("big.txt", "0 99999999999\n"), x3), RangeError);
  EXPECT_THROW(load_graph(write("e.txt", "0 1\n"), x3, write("y.csv", "0\n1\n")), ShapeError);
  EXPECT_THROW(load_graph(write("e.txt", "0 1\n"), write("ragged.csv", "1,2\n3\n4,5\n")), ParseError);
  EXPECT_THROW(load_graph(dir / "missing.txt", x3), Error);
}

TEST_F(TempDir, SaveLoadRoundTrip) {
  SbmConfig c;
  c.nodes_per_class = 10;
  c.seed = 5;
  auto g = generate_sbm(c);
  save_graph_dir(g, dir / "g");
  auto h = load_graph_dir(dir / "g");
  EXPECT_EQ(g.edges(), h.edges());
  EXPECT_TRUE(g.features() == h.features());
  EXPECT_EQ(g.labels(), h.labels());
}
