#pragma once

// CSV loaders for feature matrices, bipartite edge lists and label files,
// and a CSV writer for score vectors.
//
// Feature CSV: a header row, then one numeric row per entity. A column named
// "label" (case-insensitive) is taken as 0/1 ground truth and kept out of
// the features. Discrete columns are declared in an optional sidecar
// `<path>.discrete` holding column names or zero-based indices, separated by
// commas or newlines.
//
// Edge CSV: a header row, then zero-based integer pairs `u,v` (U-node,
// V-node). Part sizes are one past the largest index unless given.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rwad/errors.hpp"
#include "rwad/features.hpp"
#include "rwad/graph.hpp"
#include "rwad/models.hpp"

namespace rwad {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string unquote(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

/// Splits on commas; quoted fields may not contain commas.
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(unquote(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

inline double parse_double(const std::string& cell, std::size_t line, std::size_t column) {
  const std::string s = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("non-numeric cell '" + s + "'", line, column);
  if (!std::isfinite(v)) throw ParseError("non-finite cell '" + s + "'", line, column);
  return v;
}

inline Index parse_index(const std::string& cell, std::size_t line, std::size_t column) {
  const std::string s = trim(cell);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("expected an integer, found '" + s + "'", line, column);
  if (v < 0) throw ParseError("negative node index", line, column);
  return static_cast<Index>(v);
}

/// Reads non-blank lines with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> read_lines(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!trim(line).empty()) out.emplace_back(no, line);
  }
  return out;
}

}  // namespace detail

struct LoadedFeatures {
  FeatureMatrix features;
  std::vector<std::string> columns;
  std::vector<bool> labels;  // empty without a label column
  std::vector<std::string> warnings;
};

/// Column declarations of a discrete sidecar, resolved to indices.
inline std::vector<Index> read_discrete_sidecar(const std::string& path, const std::vector<std::string>& columns) {
  std::vector<Index> out;
  for (const auto& [no, line] : detail::read_lines(path)) {
    std::size_t col = 0;
    for (const std::string& raw : detail::split_csv(line)) {
      ++col;
      const std::string name = detail::trim(raw);
      if (name.empty()) continue;
      const auto it = std::find(columns.begin(), columns.end(), name);
      if (it != columns.end()) {
        out.push_back(static_cast<Index>(it - columns.begin()));
        continue;
      }
      const Index j = detail::parse_index(name, no, col);
      if (j >= static_cast<Index>(columns.size()))
        throw ParseError("discrete column " + name + " out of range", no, col);
      out.push_back(j);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// `sidecar` overrides the default `<path>.discrete`; an empty string skips it.
inline LoadedFeatures load_feature_csv(const std::string& path, std::optional<std::string> sidecar = std::nullopt) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw ParseError("missing header row", 1);
  const std::vector<std::string> header = detail::split_csv(lines.front().second);
  std::optional<std::size_t> label_col;
  LoadedFeatures out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (detail::lower(header[c]) == "label" && !label_col) {
      label_col = c;
      continue;
    }
    out.columns.push_back(header[c]);
  }
  if (out.columns.empty()) throw ParseError("no feature columns", lines.front().first);

  RowMatrix x(static_cast<Index>(lines.size() - 1), static_cast<Index>(out.columns.size()));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& [no, line] = lines[r];
    const std::vector<std::string> cells = detail::split_csv(line);
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()),
                       no);
    Index j = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double v = detail::parse_double(cells[c], no, c + 1);
      if (label_col && c == *label_col) {
        if (v != 0.0 && v != 1.0) throw ParseError("label must be 0 or 1", no, c + 1);
        out.labels.push_back(v == 1.0);
        continue;
      }
      x(static_cast<Index>(r - 1), j++) = v;
    }
  }

  std::vector<FeatureKind> kinds(out.columns.size(), FeatureKind::continuous);
  const std::string side = sidecar.value_or(path + ".discrete");
  if (!side.empty() && std::filesystem::exists(side)) {
    for (Index j : read_discrete_sidecar(side, out.columns)) {
      kinds[static_cast<std::size_t>(j)] = FeatureKind::discrete;
      for (Index i = 0; i < x.rows(); ++i)
        if (x(i, j) != std::round(x(i, j)))
          throw ParseError("discrete column '" + out.columns[static_cast<std::size_t>(j)] + "' holds a non-integer",
                           lines[static_cast<std::size_t>(i) + 1].first, static_cast<std::size_t>(j) + 1);
    }
  } else if (sidecar && !sidecar->empty()) {
    throw DataError("cannot open '" + *sidecar + "'");
  }
  out.features = FeatureMatrix(std::move(x), std::move(kinds));
  return out;
}

struct LoadedBipartite {
  BipartiteGraph graph;
  std::vector<std::string> warnings;
};

/// `u_size` / `v_size` of -1 infer the part sizes from the largest index.
inline LoadedBipartite load_bipartite_edges(const std::string& path, Index u_size = -1, Index v_size = -1) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw ParseError("missing header row", 1);
  std::vector<std::pair<std::size_t, NodePair>> edges;
  Index max_u = -1, max_v = -1;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& [no, line] = lines[r];
    const std::vector<std::string> cells = detail::split_csv(line);
    if (cells.size() != 2) throw ParseError("expected two columns u,v", no);
    const Index u = detail::parse_index(cells[0], no, 1);
    const Index v = detail::parse_index(cells[1], no, 2);
    max_u = std::max(max_u, u);
    max_v = std::max(max_v, v);
    edges.push_back({no, {u, v}});
  }
  const Index k = u_size >= 0 ? u_size : max_u + 1;
  const Index m = v_size >= 0 ? v_size : max_v + 1;
  if (max_u >= k || max_v >= m) throw DimensionMismatch("edge index exceeds the declared part size");
  if (k < 1 || m < 1) throw DataError("edge list is empty");
  Matrix w = Matrix::Zero(k, m);
  LoadedBipartite out;
  for (const auto& [no, e] : edges) {
    if (w(e.first, e.second) != 0.0) {
      out.warnings.push_back("duplicate edge (" + std::to_string(e.first) + ", " + std::to_string(e.second) +
                             ") on line " + std::to_string(no) + " ignored");
      continue;
    }
    w(e.first, e.second) = 1.0;
  }
  out.graph = BipartiteGraph(std::move(w));
  return out;
}

/// Anomalous node ids, one per row under a header, as an n-long mask.
inline std::vector<bool> load_node_labels(const std::string& path, Index n) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw ParseError("missing header row", 1);
  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& [no, line] = lines[r];
    const std::vector<std::string> cells = detail::split_csv(line);
    if (cells.size() != 1) throw ParseError("expected one node id per row", no);
    const Index v = detail::parse_index(cells[0], no, 1);
    if (v >= n) throw ParseError("node id " + std::to_string(v) + " out of range", no, 1);
    mask[static_cast<std::size_t>(v)] = true;
  }
  return mask;
}

/// node,score[,flagged_5,flagged_10] rows with round-trip precision.
inline void write_scores_csv(std::ostream& out, const AnomalyScores& scores) {
  const std::vector<bool> f5 = classify(scores, 0.05);
  const std::vector<bool> f10 = classify(scores, 0.10);
  out << "node,score,flagged_5,flagged_10\n";
  out << std::setprecision(17);
  for (Index v = 0; v < scores.size(); ++v)
    out << v << ',' << scores.values(v) << ',' << (f5[static_cast<std::size_t>(v)] ? 1 : 0) << ','
        << (f10[static_cast<std::size_t>(v)] ? 1 : 0) << '\n';
}

inline void write_feature_csv(std::ostream& out, const FeatureMatrix& x, const std::vector<std::string>& columns) {
  if (static_cast<Index>(columns.size()) != x.cols()) throw DimensionMismatch("column names do not match features");
  for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
  out << '\n' << std::setprecision(17);
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << x.values()(i, j);
    out << '\n';
  }
}

inline void write_bipartite_edges(std::ostream& out, const BipartiteGraph& bg) {
  out << "u,v\n";
  for (Index u = 0; u < bg.u_size(); ++u)
    for (Index v = 0; v < bg.v_size(); ++v)
      if (bg.has_edge(u, v)) out << u << ',' << v << '\n';
}

/// Upper-triangle edge list `u,v,w` of an undirected graph.
inline void write_edge_list(std::ostream& out, const DenseGraph& g) {
  out << "u,v,w\n" << std::setprecision(17);
  for (Index u = 0; u < g.size(); ++u)
    for (Index v = g.directed() ? 0 : u + 1; v < g.size(); ++v)
      if (g.weight(u, v) != 0.0) out << u << ',' << v << ',' << g.weight(u, v) << '\n';
}

}  // namespace rwad
