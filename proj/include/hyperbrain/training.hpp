#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include "hyperbrain/encoder.hpp"
#include "hyperbrain/error.hpp"
#include "hyperbrain/hypergraph.hpp"
#include "hyperbrain/walker.hpp"

namespace hyperbrain::training {

/// Timestamp-agnostic set of every node set observed in a cohort.
class NegativeIndex {
 public:
  void add(const graph::NodeSet& nodes);
  void add_graph(const graph::TemporalHypergraph& g);
  bool contains(const graph::NodeSet& nodes) const;
  std::size_t size() const { return sets_.size(); }

  /// One JSON array per line, sorted lexicographically.
  void save(const std::filesystem::path& path) const;
  static NegativeIndex load(const std::filesystem::path& path);

 private:
  struct Hash {
    std::size_t operator()(const graph::NodeSet& v) const noexcept;
  };
  std::unordered_set<graph::NodeSet, Hash> sets_;
};

NegativeIndex build_index(const std::vector<graph::TemporalHypergraph>& subjects);

/// Keeps ceil(|e|/2) random nodes of e and fills the rest with distinct nodes
/// outside e; retries up to 100 times until the result is not in `index`.
/// Throws NegativeExhausted after 100 rejections and ConfigError when V - e
/// is too small.
graph::NodeSet sample_negative(const graph::NodeSet& e, int n_nodes, const NegativeIndex& index, Rng& rng);

inline constexpr int kNegativeAttempts = 100;
inline constexpr double kProbabilityClamp = 1e-7;

/// -mean log(1 - p_pos) - mean log(p_neg) with probabilities clamped to
/// [1e-7, 1 - 1e-7]. Positives are labelled normal (0), negatives anomalous.
double contrastive_loss(std::span<const double> pos_scores, std::span<const double> neg_scores);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const encoder::ParameterMap& params, AdamConfig cfg = {});
  void step(encoder::ParameterMap& params, const encoder::ParameterMap& grads, double lr);
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  encoder::ParameterMap m_;
  encoder::ParameterMap v_;
  long t_ = 0;
};

struct TrainConfig {
  double pretrain_fraction = 0.7;
  int epochs_pretrain = 20;
  int epochs_finetune = 10;
  double learning_rate_pretrain = 1e-3;
  double learning_rate_finetune = 1e-4;
  int batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 11;
  unsigned threads = 1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based, counted across both stages
  std::string stage;
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  encoder::ScorerModel model;
  std::vector<EpochRecord> history;
  std::vector<int> pretrain_subjects;
  std::vector<int> finetune_subjects;
  NegativeIndex index;
  long skipped_positives = 0;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, encoder::ScorerModel last_good)
      : Error("TrainingDiverged: " + what), last_good_(std::move(last_good)) {}
  const encoder::ScorerModel& last_good() const { return last_good_; }

 private:
  encoder::ScorerModel last_good_;
};

/// Seeded split of subject indices into (pretrain, finetune).
std::pair<std::vector<int>, std::vector<int>> split_subjects(std::size_t n, double pretrain_fraction,
                                                             std::uint64_t seed);

/// Loss and gradients of one mini-batch of (positive, negative) query pairs.
struct BatchQuery {
  const graph::TemporalHypergraph* graph;
  graph::NodeSet nodes;
  int t;
  bool negative;
};
double batch_gradients(const encoder::ScorerModel& model, std::span<const BatchQuery> queries,
                       const walk::WalkConfig& wcfg, unsigned threads, encoder::ParameterMap& grads);

using StageCallback = std::function<void(const std::string& stage, const encoder::ScorerModel&)>;
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Two-stage training: pretrain on a seeded subset of subjects, fine-tune on
/// the rest. Deterministic given the seeds for any thread count.
TrainResult train(const std::vector<graph::TemporalHypergraph>& subjects, encoder::ScorerModel model,
                  const TrainConfig& tcfg, const walk::WalkConfig& wcfg, const StageCallback& on_stage_end = {},
                  const EpochCallback& on_epoch = {});

void write_training_log(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace hyperbrain::training
