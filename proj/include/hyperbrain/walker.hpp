#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <vector>

#include "hyperbrain/hypergraph.hpp"
#include "hyperbrain/random.hpp"

namespace hyperbrain::walk {

struct WalkStep {
  graph::NodeSet edge;
  int t = 0;
  friend bool operator==(const WalkStep&, const WalkStep&) = default;
};

/// Hyperedge sequence with non-increasing timestamps; consecutive steps
/// share a node. Positions >= first_padded repeat the last real step.
struct BrainWalk {
  std::vector<WalkStep> steps;
  int first_padded = 0;  // == steps.size() when the walk is not padded

  bool padded() const { return first_padded < static_cast<int>(steps.size()); }
  bool is_padded(int i) const { return i >= first_padded; }
  friend bool operator==(const BrainWalk&, const BrainWalk&) = default;
};

struct WalkConfig {
  int walk_length = 4;
  int walks_per_node = 16;
  double time_bias = 0.5;
  int max_candidates = 64;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Anchor node -> its walks; std::map keeps anchors in ascending order.
using WalkSet = std::map<int, std::vector<BrainWalk>>;

/// exp(theta * (t_i - t_prev)) normalised. Throws NoNeighbor when empty and
/// ContractError when a candidate lies after t_prev.
std::vector<double> step_probabilities(std::span<const graph::IndexEntry> candidates, int t_prev, double theta);

/// Index drawn from a probability vector by inverse CDF.
std::size_t draw_index(std::span<const double> probabilities, Rng& rng);

/// Walk rooted at the query pair (root_edge, root_t); the root need not be in
/// `g`. Throws ContractError unless anchor_node is in root_edge.
BrainWalk sample_walk(const graph::TemporalHypergraph& g, const graph::NodeSet& root_edge, int root_t,
                      int anchor_node, const WalkConfig& cfg, Rng& rng);

/// walks_per_node walks per query node. Each anchor draws from its own stream
/// seeded by (cfg.seed, query, anchor), so the result does not depend on the
/// order of nodes in `query_edge`.
WalkSet sample_walk_set(const graph::TemporalHypergraph& g, const graph::NodeSet& query_edge, int query_t,
                        const WalkConfig& cfg);

/// Debug dump, one JSON object per walk.
void write_walks_jsonl(const WalkSet& walks, std::ostream& out);

}  // namespace hyperbrain::walk
