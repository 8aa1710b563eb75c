#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "hyperbrain/encoder.hpp"
#include "hyperbrain/hypergraph.hpp"
#include "hyperbrain/ingest.hpp"
#include "hyperbrain/training.hpp"
#include "hyperbrain/walker.hpp"

namespace hyperbrain {

struct CohortSection {
  int n_train_subjects = 10;
  int n_test_subjects = 3;
  int n_rois = 30;
  int n_timepoints = 400;
  int n_communities = 3;
  double community_strength = 0.9;
  double noise_sigma = 0.3;
  double anomaly_fraction = 0.0;
  int anomaly_window = 40;
  ingest::Format format = ingest::Format::Csv;
};

struct EvalSection {
  double threshold = 0.5;
  std::optional<std::size_t> edge_budget;
};

/// Flat experiment record. Every component seed is derived from `seed`.
struct PipelineConfig {
  std::uint64_t seed = 1;
  CohortSection cohort;
  graph::WindowConfig window;
  walk::WalkConfig walk;        // seed field is derived, not read
  encoder::ModelDims model;     // walk_length mirrors walk.walk_length
  training::TrainConfig train;  // seed and threads are derived, not read
  EvalSection eval;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  ingest::CohortSpec cohort_spec() const;
  walk::WalkConfig walk_config() const;
  encoder::ModelDims model_dims() const;
  training::TrainConfig train_config(unsigned threads) const;
  std::uint64_t model_seed() const;
  std::uint64_t eval_seed() const;
};

/// Unknown keys and ill-typed values raise ConfigError with the JSON path.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const PipelineConfig& cfg, const std::filesystem::path& path);

}  // namespace hyperbrain
