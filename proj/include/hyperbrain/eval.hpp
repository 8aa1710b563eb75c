#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperbrain/encoder.hpp"
#include "hyperbrain/hypergraph.hpp"
#include "hyperbrain/training.hpp"
#include "hyperbrain/walker.hpp"

namespace hyperbrain::eval {

/// Mann-Whitney AUC with ties counted 1/2; labels are 1 for the positive
/// (anomalous) class. Throws EvalError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double fpr;
  double tpr;
};
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

struct StructuralScores {
  double cn = 0.0;
  double jc = 0.0;
  double aa = 0.0;
};

/// Static simple-graph projection: u ~ v iff they co-occur in a hyperedge at
/// any timestamp. Sorted neighbour lists.
class Projection {
 public:
  explicit Projection(const graph::TemporalHypergraph& g);
  std::span<const int> neighbors(int v) const { return adj_[v]; }
  /// Mean CN / JC / AA over the unordered pairs of `query`. Higher is more
  /// normal.
  StructuralScores score(const graph::NodeSet& query) const;

 private:
  std::vector<std::vector<int>> adj_;
};

StructuralScores structural_scores(const graph::NodeSet& query_edge, const graph::TemporalHypergraph& g);

enum class Label { Normal = 0, Injected = 1 };

struct ScoredEdge {
  graph::NodeSet nodes;
  int t = 0;
  Label label = Label::Normal;
  double model_score = 0.0;
  double cn = 0.0;
  double jc = 0.0;
  double aa = 0.0;
};

struct RegionStat {
  int node = 0;
  long count_in_flagged = 0;
  long background_count = 0;
  double p_value = 1.0;
  double q_value = 1.0;  // Benjamini-Hochberg adjusted
};

struct EvalReport {
  std::string subject;
  std::vector<ScoredEdge> per_edge;
  double auc_model = 0.5;
  double auc_cn = 0.5;
  double auc_jc = 0.5;
  double auc_aa = 0.5;
  std::vector<RegionStat> region_stats;
  long negative_exhausted = 0;
};

/// P[X >= k] for X ~ Binomial(n, q).
double binomial_upper_tail(long k, long n, double q);

/// Benjamini-Hochberg adjusted p-values, same order as the input.
std::vector<double> benjamini_hochberg(std::span<const double> p_values);

/// Nodes significantly enriched among edges scoring >= threshold (one-sided
/// binomial test against their background rate, BH q < alpha), sorted by
/// count descending then node id.
std::vector<RegionStat> region_report(std::span<const ScoredEdge> per_edge, double threshold, int n_nodes,
                                      double alpha = 0.05);

/// Scores an already assembled per-edge list and fills the AUC fields.
void compute_aucs(EvalReport& report);

/// Anomaly scores of many queries; results are ordered like `queries`.
std::vector<double> score_queries(const graph::TemporalHypergraph& g, std::span<const graph::Hyperedge> queries,
                                  const encoder::ScorerModel& model, const walk::WalkConfig& wcfg, unsigned threads);

struct EvalOptions {
  double threshold = 0.5;
  std::optional<std::size_t> edge_budget;  // subsample true edges when set
  std::uint64_t seed = 5;
  unsigned threads = 1;
};

/// Injects one verified negative per true edge of g_test (same timestamp),
/// scores both classes and assembles the report. `index` must already hold
/// the training cohort's node sets; g_test's own sets are added here.
EvalReport inject_and_evaluate(const graph::TemporalHypergraph& g_test, training::NegativeIndex index,
                               const encoder::ScorerModel& model, const walk::WalkConfig& wcfg,
                               const EvalOptions& options);

/// Pools several subject reports into one (AUCs over the union of edges).
EvalReport pool_reports(std::span<const EvalReport> reports, double threshold, int n_nodes);

nlohmann::json to_json(const EvalReport& report);

std::string nodes_to_string(const graph::NodeSet& nodes);  // pipe-joined

void write_per_edge_csv(const EvalReport& report, const std::filesystem::path& path);
void write_region_csv(const std::vector<RegionStat>& stats, const std::filesystem::path& path);
void write_roc_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace hyperbrain::eval
