#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hyperbrain/ingest.hpp"

namespace hyperbrain::graph {

using NodeSet = std::vector<int>;  // sorted ascending, duplicate-free

struct Hyperedge {
  NodeSet nodes;
  int t = 0;

  friend bool operator==(const Hyperedge&, const Hyperedge&) = default;
  friend auto operator<=>(const Hyperedge& a, const Hyperedge& b) {
    if (a.t != b.t) return a.t <=> b.t;
    return a.nodes <=> b.nodes;
  }
};

struct IndexEntry {
  int edge;
  int t;
  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

/// Node set plus timestamped hyperedges. Timestamps are window indices. The
/// per-node index lists (edge id, t) ascending by t, ties by edge id.
class TemporalHypergraph {
 public:
  TemporalHypergraph() = default;
  /// Edges are sorted by (t, nodes) and validated.
  TemporalHypergraph(int n_nodes, int n_windows, std::vector<Hyperedge> edges);

  int n_nodes() const { return n_nodes_; }
  int n_windows() const { return n_windows_; }
  std::size_t n_edges() const { return edges_.size(); }
  const std::vector<Hyperedge>& edges() const { return edges_; }
  const Hyperedge& edge(int id) const;
  std::span<const IndexEntry> incident(int node) const;

  /// Index entries of `node` with t <= t_max.
  std::span<const IndexEntry> incident_until(int node, int t_max) const;

 private:
  int n_nodes_ = 0;
  int n_windows_ = 0;
  std::vector<Hyperedge> edges_;
  std::vector<std::vector<IndexEntry>> node_index_;
};

struct WindowConfig {
  int window_length = 40;
  int stride = 20;
  double percentile = 90.0;
  int max_hyperedge_size = 8;

  void validate(int n_timepoints) const;
};

/// Number of sliding windows; throws ConfigError when L > T or s < 1.
int window_count(int n_timepoints, int window_length, int stride);

/// Sample Pearson correlation. Throws DegenerateSignal on a constant input,
/// ContractError on mismatched or too-short inputs.
double pearson(std::span<const double> x, std::span<const double> y);

/// R x R correlation matrix of the rows of `window`. Pairs involving a
/// constant row hold NaN (no correlation).
ingest::Matrix correlation_matrix(const ingest::Matrix& window);

/// Nearest-rank percentile of the strictly positive entries of `values`;
/// returns nullopt if none are positive.
std::optional<double> positive_percentile(std::span<const double> values, double percentile);

/// Adjacency (u, v) iff corr > 0 and corr reaches both endpoints' percentile
/// thresholds.
std::vector<std::vector<bool>> strong_tie_graph(const ingest::Matrix& corr, double percentile);

/// Maximal cliques (size >= 1) of an undirected graph, each sorted, the list
/// sorted lexicographically.
std::vector<NodeSet> maximal_cliques(const std::vector<std::vector<bool>>& adjacency);

/// Hyperedges of one window (rows = ROIs, columns = timepoints).
std::vector<Hyperedge> build_window_hypergraph(const ingest::Matrix& window, const WindowConfig& cfg, int t);

TemporalHypergraph build_temporal_hypergraph(const ingest::SignalMatrix& signals, const WindowConfig& cfg);

/// All edges other than `edge_id` sharing a node with it and with t <= t_max,
/// sorted by (t, edge id). Throws IndexError for an invalid id.
std::vector<IndexEntry> temporal_neighbors(const TemporalHypergraph& g, int edge_id, int t_max);

/// JSON Lines: header {"n_nodes":R,"n_windows":M}, then {"nodes":[..],"t":t}
/// per edge sorted by (t, nodes).
void save_hypergraph(const TemporalHypergraph& g, const std::filesystem::path& path);
TemporalHypergraph load_hypergraph(const std::filesystem::path& path);

}  // namespace hyperbrain::graph
