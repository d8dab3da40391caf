#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lgtl/graph.hpp"

namespace lgtl {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open " + path.string());
  return in;
}

}  // namespace detail

/// Edge list: one edge per line as two whitespace-separated base-10 ids; '#' lines are comments.
inline std::vector<Graph::Edge> read_edge_list(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<Graph::Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    std::istringstream fields{std::string(s)};
    std::string a, b, extra;
    if (!(fields >> a >> b) || (fields >> extra))
      throw ParseError(path.string(), lineno, "expected two node ids, got '" + std::string(s) + "'");
    std::uint64_t ua = 0, ub = 0;
    if (!detail::parse_number(a, ua) || !detail::parse_number(b, ub))
      throw ParseError(path.string(), lineno, "node ids must be non-negative integers");
    if (ua > std::numeric_limits<NodeId>::max() || ub > std::numeric_limits<NodeId>::max())
      throw RangeError(path.string() + ":" + std::to_string(lineno) + ": node id exceeds 32 bits");
    edges.emplace_back(static_cast<NodeId>(ua), static_cast<NodeId>(ub));
  }
  return edges;
}

/// Feature CSV: row i is node i. A first row that does not parse as numbers is a header.
inline FeatureMatrix read_features(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = detail::trim(line);
    if (s.empty()) continue;
    auto cells = detail::split_csv(s);
    std::vector<double> row;
    row.reserve(cells.size());
    bool ok = true;
    for (auto c : cells) {
      double v = 0;
      if (!detail::parse_number(c, v)) {
        ok = false;
        break;
      }
      row.push_back(v);
    }
    if (!ok) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw ParseError(path.string(), lineno, "non-numeric feature value");
    }
    if (rows.empty()) width = row.size();
    if (row.size() != width)
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(width) + " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  FeatureMatrix x(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) x(i, j) = rows[i][j];
  return x;
}

/// Labels: one integer class per line (a first-line header is skipped).
inline std::vector<int> read_labels(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = detail::trim(line);
    if (s.empty()) continue;
    int y = 0;
    if (!detail::parse_number(s, y)) {
      if (labels.empty() && lineno == 1) continue;
      throw ParseError(path.string(), lineno, "expected an integer class, got '" + std::string(s) + "'");
    }
    if (y < 0) throw RangeError(path.string() + ":" + std::to_string(lineno) + ": negative class label");
    labels.push_back(y);
  }
  return labels;
}

/// The edge list implies at least max_id + 1 nodes; the feature file must cover all of
/// them (extra rows are isolated nodes). Labels, when given, must match the feature rows.
inline Graph load_graph(const std::filesystem::path& edges_path, const std::filesystem::path& features_path,
                        const std::optional<std::filesystem::path>& labels_path = std::nullopt) {
  auto edges = read_edge_list(edges_path);
  auto features = read_features(features_path);
  std::optional<std::vector<int>> labels;
  if (labels_path) labels = read_labels(*labels_path);
  const auto n = static_cast<std::size_t>(features.rows());
  std::size_t implied = 0;
  for (const auto& [a, b] : edges) implied = std::max<std::size_t>(implied, std::max(a, b) + std::size_t{1});
  if (implied > n)
    throw ShapeError("edge list implies " + std::to_string(implied) + " nodes but " + features_path.string() +
                     " has " + std::to_string(n) + " rows");
  if (labels && labels->size() != n)
    throw ShapeError("label count (" + std::to_string(labels->size()) + ") != feature rows (" + std::to_string(n) +
                     ")");
  return Graph(n, edges, std::move(features), std::move(labels));
}

/// Directory layout used by the CLI: edges.txt, features.csv and optionally labels.csv.
inline Graph load_graph_dir(const std::filesystem::path& dir) {
  auto labels = dir / "labels.csv";
  return load_graph(dir / "edges.txt", dir / "features.csv",
                    std::filesystem::exists(labels) ? std::optional(labels) : std::nullopt);
}

inline void save_graph_dir(const Graph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "edges.txt");
    out << "# " << g.num_nodes() << " nodes, " << g.num_edges() << " undirected edges\n";
    for (const auto& [a, b] : g.edges()) out << a << ' ' << b << '\n';
  }
  {
    std::ofstream out(dir / "features.csv");
    char buf[32];
    for (Eigen::Index i = 0; i < g.features().rows(); ++i) {
      for (Eigen::Index j = 0; j < g.features().cols(); ++j) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, g.features()(i, j));
        if (j) out << ',';
        out.write(buf, end - buf);
      }
      out << '\n';
    }
  }
  if (g.has_labels()) {
    std::ofstream out(dir / "labels.csv");
    for (int y : g.labels()) out << y << '\n';
  }
}

}  // namespace lgtl
