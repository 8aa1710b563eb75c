#include "hyperbrain/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "hyperbrain/error.hpp"

namespace hyperbrain::graph {

namespace {

constexpr int kMaxDecomposedSubsets = 20;

bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

// Lexicographically first `limit` size-k subsets of `clique`.
void append_subsets(const NodeSet& clique, int k, int limit, std::vector<NodeSet>& out) {
  const int n = static_cast<int>(clique.size());
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  for (int emitted = 0; emitted < limit; ++emitted) {
    NodeSet subset(k);
    for (int i = 0; i < k; ++i) subset[i] = clique[idx[i]];
    out.push_back(std::move(subset));
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

struct BronKerbosch {
  const std::vector<std::vector<bool>>& adj;
  std::vector<NodeSet> cliques;

  void run(NodeSet& r, std::vector<int> p, std::vector<int> x) {
    if (p.empty()) {
      if (x.empty()) {
        NodeSet c = r;
        std::sort(c.begin(), c.end());
        cliques.push_back(std::move(c));
      }
      return;
    }
    // Tomita pivot: the vertex of P u X with most neighbours in P.
    int pivot = -1;
    long best = -1;
    for (const auto* set : {&p, &x}) {
      for (int u : *set) {
        long deg = 0;
        for (int v : p) deg += adj[u][v];
        if (deg > best) {
          best = deg;
          pivot = u;
        }
      }
    }
    std::vector<int> candidates;
    for (int v : p)
      if (!adj[pivot][v]) candidates.push_back(v);

    for (int v : candidates) {
      std::vector<int> p_next, x_next;
      for (int w : p)
        if (adj[v][w]) p_next.push_back(w);
      for (int w : x)
        if (adj[v][w]) x_next.push_back(w);
      r.push_back(v);
      run(r, std::move(p_next), std::move(x_next));
      r.pop_back();
      p.erase(std::find(p.begin(), p.end(), v));
      x.push_back(v);
    }
  }
};

}  // namespace

TemporalHypergraph::TemporalHypergraph(int n_nodes, int n_windows, std::vector<Hyperedge> edges)
    : n_nodes_(n_nodes), n_windows_(n_windows), edges_(std::move(edges)) {
  if (n_nodes < 0 || n_windows < 0) throw DataError("negative hypergraph dimensions");
  for (const auto& e : edges_) {
    if (e.nodes.size() < 2) throw DataError("hyperedge with fewer than 2 nodes");
    if (e.t < 0 || e.t >= n_windows) {
      throw DataError("hyperedge timestamp " + std::to_string(e.t) + " outside [0, " +
                      std::to_string(n_windows) + ")");
    }
    for (std::size_t i = 0; i < e.nodes.size(); ++i) {
      if (e.nodes[i] < 0 || e.nodes[i] >= n_nodes) {
        throw DataError("node id " + std::to_string(e.nodes[i]) + " outside [0, " +
                        std::to_string(n_nodes) + ")");
      }
      if (i > 0 && e.nodes[i] <= e.nodes[i - 1]) throw DataError("hyperedge nodes not sorted/unique");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  node_index_.assign(n_nodes_, {});
  for (int id = 0; id < static_cast<int>(edges_.size()); ++id)
    for (int v : edges_[id].nodes) node_index_[v].push_back({id, edges_[id].t});
}

const Hyperedge& TemporalHypergraph::edge(int id) const {
  if (id < 0 || id >= static_cast<int>(edges_.size())) throw IndexError("edge id " + std::to_string(id));
  return edges_[id];
}

std::span<const IndexEntry> TemporalHypergraph::incident(int node) const {
  if (node < 0 || node >= n_nodes_) throw IndexError("node id " + std::to_string(node));
  return node_index_[node];
}

std::span<const IndexEntry> TemporalHypergraph::incident_until(int node, int t_max) const {
  const auto all = incident(node);
  const auto end = std::upper_bound(all.begin(), all.end(), t_max,
                                    [](int t, const IndexEntry& e) { return t < e.t; });
  return all.first(static_cast<std::size_t>(end - all.begin()));
}

void WindowConfig::validate(int n_timepoints) const {
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (window_length < stride) throw ConfigError("window_length must be >= stride");
  if (window_length > n_timepoints) {
    throw ConfigError("window_length " + std::to_string(window_length) + " exceeds T=" +
                      std::to_string(n_timepoints));
  }
  if (window_length < 2) throw ConfigError("window_length must be >= 2 for correlations");
  if (!(percentile > 0.0 && percentile < 100.0)) throw ConfigError("percentile must be in (0, 100)");
  if (max_hyperedge_size < 2) throw ConfigError("max_hyperedge_size must be >= 2");
}

int window_count(int n_timepoints, int window_length, int stride) {
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (window_length > n_timepoints) throw ConfigError("window length exceeds series length");
  return (n_timepoints - window_length) / stride + 1;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("pearson needs equal lengths >= 2");
  if (is_constant(x) || is_constant(y)) throw DegenerateSignal("constant vector");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw DegenerateSignal("zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ingest::Matrix correlation_matrix(const ingest::Matrix& window) {
  const auto r = window.rows();
  ingest::Matrix centered = window.colwise() - window.rowwise().mean();
  std::vector<bool> degenerate(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto row = window.row(i);
    degenerate[i] = (row.array() == row(0)).all();
    const double norm = centered.row(i).norm();
    if (degenerate[i] || norm <= 0.0) {
      degenerate[i] = true;
    } else {
      centered.row(i) /= norm;
    }
  }
  ingest::Matrix corr(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = i; j < r; ++j) {
      double c = std::numeric_limits<double>::quiet_NaN();
      if (!degenerate[i] && !degenerate[j]) c = std::clamp(centered.row(i).dot(centered.row(j)), -1.0, 1.0);
      corr(i, j) = corr(j, i) = c;
    }
  }
  return corr;
}

std::optional<double> positive_percentile(std::span<const double> values, double percentile) {
  std::vector<double> positive;
  for (double v : values)
    if (v > 0.0) positive.push_back(v);
  if (positive.empty()) return std::nullopt;
  std::sort(positive.begin(), positive.end());
  const auto n = positive.size();
  auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n) / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return positive[rank - 1];
}

std::vector<std::vector<bool>> strong_tie_graph(const ingest::Matrix& corr, double percentile) {
  const auto r = static_cast<int>(corr.rows());
  std::vector<std::optional<double>> threshold(r);
  std::vector<double> others;
  for (int v = 0; v < r; ++v) {
    others.clear();
    for (int u = 0; u < r; ++u)
      if (u != v && !std::isnan(corr(v, u))) others.push_back(corr(v, u));
    threshold[v] = positive_percentile(others, percentile);
  }
  std::vector<std::vector<bool>> adj(r, std::vector<bool>(r, false));
  for (int u = 0; u < r; ++u) {
    for (int v = u + 1; v < r; ++v) {
      const double c = corr(u, v);
      if (!threshold[u] || !threshold[v] || std::isnan(c)) continue;
      if (c > 0.0 && c >= *threshold[u] && c >= *threshold[v]) adj[u][v] = adj[v][u] = true;
    }
  }
  return adj;
}

std::vector<NodeSet> maximal_cliques(const std::vector<std::vector<bool>>& adjacency) {
  BronKerbosch bk{adjacency, {}};
  std::vector<int> p(adjacency.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<int>(i);
  NodeSet r;
  bk.run(r, std::move(p), {});
  std::sort(bk.cliques.begin(), bk.cliques.end());
  return std::move(bk.cliques);
}

std::vector<Hyperedge> build_window_hypergraph(const ingest::Matrix& window, const WindowConfig& cfg, int t) {
  if (window.rows() < 2) throw ContractError("window needs at least 2 ROIs");
  const auto adj = strong_tie_graph(correlation_matrix(window), cfg.percentile);
  std::vector<NodeSet> sets;
  for (auto& clique : maximal_cliques(adj)) {
    const int size = static_cast<int>(clique.size());
    if (size < 2) continue;
    if (size <= cfg.max_hyperedge_size) {
      sets.push_back(std::move(clique));
    } else {
      append_subsets(clique, cfg.max_hyperedge_size, kMaxDecomposedSubsets, sets);
    }
  }
  std::sort(sets.begin(), sets.end());
  sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
  std::vector<Hyperedge> edges;
  edges.reserve(sets.size());
  for (auto& s : sets) edges.push_back({std::move(s), t});
  return edges;
}

TemporalHypergraph build_temporal_hypergraph(const ingest::SignalMatrix& signals, const WindowConfig& cfg) {
  ingest::validate(signals);
  cfg.validate(signals.n_timepoints());
  const int m = window_count(signals.n_timepoints(), cfg.window_length, cfg.stride);
  std::vector<Hyperedge> edges;
  for (int p = 0; p < m; ++p) {
    const ingest::Matrix window = signals.values.middleCols(p * cfg.stride, cfg.window_length);
    auto window_edges = build_window_hypergraph(window, cfg, p);
    std::move(window_edges.begin(), window_edges.end(), std::back_inserter(edges));
  }
  return TemporalHypergraph(signals.n_rois(), m, std::move(edges));
}

std::vector<IndexEntry> temporal_neighbors(const TemporalHypergraph& g, int edge_id, int t_max) {
  const auto& e = g.edge(edge_id);
  std::vector<IndexEntry> out;
  for (int v : e.nodes)
    for (const auto& entry : g.incident_until(v, t_max))
      if (entry.edge != edge_id) out.push_back(entry);
  std::sort(out.begin(), out.end(), [](const IndexEntry& a, const IndexEntry& b) {
    return a.t != b.t ? a.t < b.t : a.edge < b.edge;
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void save_hypergraph(const TemporalHypergraph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << nlohmann::json{{"n_nodes", g.n_nodes()}, {"n_windows", g.n_windows()}}.dump() << '\n';
  for (const auto& e : g.edges()) out << nlohmann::json{{"nodes", e.nodes}, {"t", e.t}}.dump() << '\n';
}

TemporalHypergraph load_hypergraph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty hypergraph file");
  try {
    const auto header = nlohmann::json::parse(line);
    const int n_nodes = header.at("n_nodes").get<int>();
    const int n_windows = header.at("n_windows").get<int>();
    std::vector<Hyperedge> edges;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      edges.push_back({j.at("nodes").get<NodeSet>(), j.at("t").get<int>()});
    }
    return TemporalHypergraph(n_nodes, n_windows, std::move(edges));
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path.string() + ": " + ex.what());
  }
}

}  // namespace hyperbrain::graph
