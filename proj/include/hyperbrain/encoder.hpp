#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hyperbrain/hypergraph.hpp"
#include "hyperbrain/tensor.hpp"
#include "hyperbrain/walker.hpp"

namespace hyperbrain::encoder {

using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

struct ModelDims {
  int walk_length = 4;
  int d_pos = 16;
  int d_edge = 32;
  int d_time = 16;
  int mixer_blocks = 2;

  int d_model() const { return d_edge + d_time; }
  int token_hidden() const { return 2 * walk_length; }
  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

using ParameterMap = std::map<std::string, Tensor>;

/// All trainable tensors of the scoring stack, keyed by name:
///   node.*        positional-count MLP, walk_length -> d_pos
///   edge.*        SetMixer pooling node encodings, d_pos -> d_edge
///   time.omega/phase  time-encoding frequencies and phases
///   mixer.<k>.*   MLP-Mixer token/channel MLPs over walk_length x d_model
///   psi.*         SetMixer pooling member encodings, d_model -> d_model
///   head.*        score MLP, d_model -> 1
struct ScorerModel {
  ModelDims dims;
  std::uint64_t seed = 0;
  ParameterMap params;

  static ScorerModel initialize(const ModelDims& dims, std::uint64_t seed);
  static std::size_t expected_parameter_count(const ModelDims& dims);
  std::size_t parameter_count() const;
  bool all_finite() const;
};

/// Parameters placed on a tape, as variables (training) or constants.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ScorerModel& model, bool requires_grad);
  Var operator[](const std::string& name) const;
  Tape& tape() const { return *tape_; }
  /// Gradients of every parameter after tape.backward().
  ParameterMap gradients() const;

 private:
  Tape* tape_;
  std::map<std::string, Var> vars_;
};

/// Occurrences of `node` at each walk position over every walk of the set,
/// padded positions excluded.
std::vector<int> positional_counts(const walk::WalkSet& walk_set, int node, int walk_length);

/// cos(omega_j * dt + phase_j).
std::vector<double> encode_time(double dt, std::span<const double> omega, std::span<const double> phase);

/// gelu(x W1 + b1) W2 + b2 with weights `<prefix>.l1.w`, `<prefix>.l1.b`, ...
Var mlp2(const BoundParams& p, const std::string& prefix, Var x);

/// Permutation-invariant pooling of each segment of rows of `x`:
/// residual channel MLP over layer-normed rows, canonical mean per segment,
/// then an output MLP. Returns one row per segment.
Var set_mixer(const BoundParams& p, const std::string& prefix, Var x, const std::vector<std::vector<int>>& segments);

/// Single-set convenience form; throws ContractError on an empty set.
Tensor set_mixer(const ScorerModel& model, const std::string& prefix, const Tensor& x);

/// Walk encodings (one row per walk, anchors in ascending order, walks in
/// sampling order) for a walk set queried at t_query.
Var encode_walks(const BoundParams& p, const ModelDims& dims, const walk::WalkSet& walk_set, int t_query);

/// Encoding of one walk given the walk set that provides positional counts.
std::vector<double> encode_walk(const walk::BrainWalk& walk, const walk::WalkSet& walk_set, const ScorerModel& model,
                                int t_query);

/// Score logit of a query from its walk set (1 x 1).
Var score_logit(const BoundParams& p, const ModelDims& dims, const walk::WalkSet& walk_set, int t_query);

/// Anomaly probability in (0, 1); 1 means maximally anomalous.
double anomaly_score(const graph::NodeSet& query_edge, int query_t, const graph::TemporalHypergraph& g,
                     const ScorerModel& model, const walk::WalkConfig& cfg);

/// Manifest `<stem>.json` plus tensor blob `<stem>.bin`.
void save_checkpoint(const ScorerModel& model, const std::filesystem::path& manifest_path);
ScorerModel load_checkpoint(const std::filesystem::path& manifest_path);

}  // namespace hyperbrain::encoder
