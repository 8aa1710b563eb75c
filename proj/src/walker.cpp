#include "hyperbrain/walker.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "hyperbrain/error.hpp"

namespace hyperbrain::walk {

namespace {

std::span<const graph::IndexEntry> most_recent(std::span<const graph::IndexEntry> sorted, int limit) {
  if (static_cast<int>(sorted.size()) <= limit) return sorted;
  return sorted.last(static_cast<std::size_t>(limit));
}

// Id of the query pair inside g, or -1 when the query is not a graph edge.
int find_edge(const graph::TemporalHypergraph& g, const graph::NodeSet& nodes, int t) {
  for (const auto& entry : g.incident_until(nodes.front(), t)) {
    if (entry.t == t && g.edge(entry.edge).nodes == nodes) return entry.edge;
  }
  return -1;
}

}  // namespace

void WalkConfig::validate() const {
  if (walk_length < 2) throw ConfigError("walk_length must be >= 2");
  if (walks_per_node < 1) throw ConfigError("walks_per_node must be >= 1");
  if (!(time_bias >= 0.0) || !std::isfinite(time_bias)) throw ConfigError("time_bias must be finite and >= 0");
  if (max_candidates < 1) throw ConfigError("max_candidates must be >= 1");
}

std::vector<double> step_probabilities(std::span<const graph::IndexEntry> candidates, int t_prev, double theta) {
  if (candidates.empty()) throw NoNeighbor("no candidate hyperedges");
  double max_logit = -std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    if (c.t > t_prev) throw ContractError("candidate timestamp after previous step");
    max_logit = std::max(max_logit, theta * (c.t - t_prev));
  }
  std::vector<double> p(candidates.size());
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    p[i] = std::exp(theta * (candidates[i].t - t_prev) - max_logit);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

std::size_t draw_index(std::span<const double> probabilities, Rng& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    cumulative += probabilities[i];
    if (u < cumulative) return i;
  }
  return probabilities.size() - 1;
}

BrainWalk sample_walk(const graph::TemporalHypergraph& g, const graph::NodeSet& root_edge, int root_t,
                      int anchor_node, const WalkConfig& cfg, Rng& rng) {
  graph::NodeSet root = root_edge;
  std::sort(root.begin(), root.end());
  if (!std::binary_search(root.begin(), root.end(), anchor_node))
    throw ContractError("anchor node " + std::to_string(anchor_node) + " not in root edge");

  const int length = cfg.walk_length;
  BrainWalk walk;
  walk.steps.reserve(length);
  walk.steps.push_back({root, root_t});
  const int root_id = find_edge(g, root, root_t);

  std::vector<graph::IndexEntry> candidates;
  int prev_id = -1;
  int prev_t = root_t;
  for (int i = 1; i < length; ++i) {
    candidates.clear();
    if (i == 1) {
      for (const auto& e : g.incident_until(anchor_node, root_t))
        if (e.edge != root_id) candidates.push_back(e);
    } else {
      for (const auto& e : graph::temporal_neighbors(g, prev_id, prev_t))
        if (e.edge != root_id) candidates.push_back(e);
    }
    if (candidates.empty()) break;
    const auto pool = most_recent(candidates, cfg.max_candidates);
    const auto probs = step_probabilities(pool, prev_t, cfg.time_bias);
    const auto& pick = pool[draw_index(probs, rng)];
    walk.steps.push_back({g.edge(pick.edge).nodes, pick.t});
    prev_id = pick.edge;
    prev_t = pick.t;
  }
  walk.first_padded = static_cast<int>(walk.steps.size());
  while (static_cast<int>(walk.steps.size()) < length) walk.steps.push_back(walk.steps.back());
  return walk;
}

WalkSet sample_walk_set(const graph::TemporalHypergraph& g, const graph::NodeSet& query_edge, int query_t,
                        const WalkConfig& cfg) {
  graph::NodeSet query = query_edge;
  std::sort(query.begin(), query.end());
  if (query.size() < 2) throw ContractError("query hyperedge needs at least 2 nodes");
  if (std::adjacent_find(query.begin(), query.end()) != query.end())
    throw ContractError("query hyperedge has duplicate nodes");
  const auto query_hash = hash_nodes(query, static_cast<std::uint64_t>(query_t));
  WalkSet out;
  for (int u : query) {
    Rng rng(derive_seed(cfg.seed, query_hash, static_cast<std::uint64_t>(u)));
    auto& walks = out[u];
    walks.reserve(cfg.walks_per_node);
    for (int n = 0; n < cfg.walks_per_node; ++n) walks.push_back(sample_walk(g, query, query_t, u, cfg, rng));
  }
  return out;
}

void write_walks_jsonl(const WalkSet& walks, std::ostream& out) {
  for (const auto& [anchor, list] : walks) {
    for (const auto& w : list) {
      nlohmann::json steps = nlohmann::json::array();
      for (const auto& s : w.steps) steps.push_back(nlohmann::json::array({s.edge, s.t}));
      out << nlohmann::json{{"anchor", anchor}, {"steps", steps}, {"padded", w.padded()}}.dump() << '\n';
    }
  }
}

}  // namespace hyperbrain::walk
