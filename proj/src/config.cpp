#include "hyperbrain/config.hpp"

#include <fstream>
#include <set>

#include "hyperbrain/error.hpp"
#include "hyperbrain/random.hpp"

namespace hyperbrain {

namespace {

enum class Stream : std::uint64_t { Cohort = 1, Walk, Model, Train, Eval };

std::uint64_t stream_seed(std::uint64_t seed, Stream s) { return derive_seed(seed, static_cast<std::uint64_t>(s)); }

// Reads fields of one JSON object, rejecting keys that were never read.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw ConfigError(path_ + "." + key + ": unknown key");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type (" + it->dump() + ")");
    }
  }

  const nlohmann::json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ConfigError(field + ": " + why);
}

}  // namespace

void PipelineConfig::validate() const {
  require(cohort.n_train_subjects >= 0, "cohort.n_train_subjects", "must be >= 0");
  require(cohort.n_test_subjects >= 0, "cohort.n_test_subjects", "must be >= 0");
  require(cohort.n_train_subjects + cohort.n_test_subjects >= 1, "cohort", "needs at least one subject");
  try {
    cohort_spec().validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("cohort: ") + e.what());
  }
  try {
    window.validate(cohort.n_timepoints);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("window: ") + e.what());
  }
  try {
    walk.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("walk: ") + e.what());
  }
  try {
    model_dims().validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  try {
    train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  require(eval.threshold > 0.0 && eval.threshold < 1.0, "eval.threshold", "must be in (0, 1)");
}

ingest::CohortSpec PipelineConfig::cohort_spec() const {
  ingest::CohortSpec spec;
  spec.n_subjects = cohort.n_train_subjects + cohort.n_test_subjects;
  spec.n_rois = cohort.n_rois;
  spec.n_timepoints = cohort.n_timepoints;
  spec.n_communities = cohort.n_communities;
  spec.community_strength = cohort.community_strength;
  spec.noise_sigma = cohort.noise_sigma;
  spec.anomaly_fraction = cohort.anomaly_fraction;
  spec.anomaly_window = cohort.anomaly_window;
  spec.seed = stream_seed(seed, Stream::Cohort);
  return spec;
}

walk::WalkConfig PipelineConfig::walk_config() const {
  auto w = walk;
  w.seed = stream_seed(seed, Stream::Walk);
  return w;
}

encoder::ModelDims PipelineConfig::model_dims() const {
  auto d = model;
  d.walk_length = walk.walk_length;
  return d;
}

training::TrainConfig PipelineConfig::train_config(unsigned threads) const {
  auto t = train;
  t.seed = stream_seed(seed, Stream::Train);
  t.threads = threads;
  return t;
}

std::uint64_t PipelineConfig::model_seed() const { return stream_seed(seed, Stream::Model); }
std::uint64_t PipelineConfig::eval_seed() const { return stream_seed(seed, Stream::Eval); }

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  Section root(j, "config");
  root.read("seed", cfg.seed);
  if (const auto* c = root.child("cohort")) {
    Section s(*c, "cohort");
    s.read("n_train_subjects", cfg.cohort.n_train_subjects);
    s.read("n_test_subjects", cfg.cohort.n_test_subjects);
    s.read("n_rois", cfg.cohort.n_rois);
    s.read("n_timepoints", cfg.cohort.n_timepoints);
    s.read("n_communities", cfg.cohort.n_communities);
    s.read("community_strength", cfg.cohort.community_strength);
    s.read("noise_sigma", cfg.cohort.noise_sigma);
    s.read("anomaly_fraction", cfg.cohort.anomaly_fraction);
    s.read("anomaly_window", cfg.cohort.anomaly_window);
    std::string format = cfg.cohort.format == ingest::Format::Csv ? "csv" : "binary";
    s.read("format", format);
    if (format == "csv") {
      cfg.cohort.format = ingest::Format::Csv;
    } else if (format == "binary") {
      cfg.cohort.format = ingest::Format::Binary;
    } else {
      throw ConfigError("cohort.format: expected \"csv\" or \"binary\"");
    }
  }
  if (const auto* c = root.child("window")) {
    Section s(*c, "window");
    s.read("window_length", cfg.window.window_length);
    s.read("stride", cfg.window.stride);
    s.read("percentile", cfg.window.percentile);
    s.read("max_hyperedge_size", cfg.window.max_hyperedge_size);
  }
  if (const auto* c = root.child("walk")) {
    Section s(*c, "walk");
    s.read("walk_length", cfg.walk.walk_length);
    s.read("walks_per_node", cfg.walk.walks_per_node);
    s.read("time_bias", cfg.walk.time_bias);
    s.read("max_candidates", cfg.walk.max_candidates);
  }
  if (const auto* c = root.child("model")) {
    Section s(*c, "model");
    s.read("d_pos", cfg.model.d_pos);
    s.read("d_edge", cfg.model.d_edge);
    s.read("d_time", cfg.model.d_time);
    s.read("mixer_blocks", cfg.model.mixer_blocks);
  }
  if (const auto* c = root.child("train")) {
    Section s(*c, "train");
    s.read("pretrain_fraction", cfg.train.pretrain_fraction);
    s.read("epochs_pretrain", cfg.train.epochs_pretrain);
    s.read("epochs_finetune", cfg.train.epochs_finetune);
    s.read("learning_rate_pretrain", cfg.train.learning_rate_pretrain);
    s.read("learning_rate_finetune", cfg.train.learning_rate_finetune);
    s.read("batch_size", cfg.train.batch_size);
    s.read("adam_beta1", cfg.train.adam.beta1);
    s.read("adam_beta2", cfg.train.adam.beta2);
    s.read("adam_eps", cfg.train.adam.eps);
  }
  if (const auto* c = root.child("eval")) {
    Section s(*c, "eval");
    s.read("threshold", cfg.eval.threshold);
    if (const auto* b = s.child("edge_budget"); b && !b->is_null()) {
      if (!b->is_number_unsigned()) throw ConfigError("eval.edge_budget: expected a nonnegative integer or null");
      cfg.eval.edge_budget = b->get<std::size_t>();
    }
  }
  cfg.model.walk_length = cfg.walk.walk_length;
  cfg.validate();
  return cfg;
}

nlohmann::json config_to_json(const PipelineConfig& cfg) {
  return {
      {"seed", cfg.seed},
      {"cohort",
       {{"n_train_subjects", cfg.cohort.n_train_subjects},
        {"n_test_subjects", cfg.cohort.n_test_subjects},
        {"n_rois", cfg.cohort.n_rois},
        {"n_timepoints", cfg.cohort.n_timepoints},
        {"n_communities", cfg.cohort.n_communities},
        {"community_strength", cfg.cohort.community_strength},
        {"noise_sigma", cfg.cohort.noise_sigma},
        {"anomaly_fraction", cfg.cohort.anomaly_fraction},
        {"anomaly_window", cfg.cohort.anomaly_window},
        {"format", cfg.cohort.format == ingest::Format::Csv ? "csv" : "binary"}}},
      {"window",
       {{"window_length", cfg.window.window_length},
        {"stride", cfg.window.stride},
        {"percentile", cfg.window.percentile},
        {"max_hyperedge_size", cfg.window.max_hyperedge_size}}},
      {"walk",
       {{"walk_length", cfg.walk.walk_length},
        {"walks_per_node", cfg.walk.walks_per_node},
        {"time_bias", cfg.walk.time_bias},
        {"max_candidates", cfg.walk.max_candidates}}},
      {"model",
       {{"d_pos", cfg.model.d_pos},
        {"d_edge", cfg.model.d_edge},
        {"d_time", cfg.model.d_time},
        {"mixer_blocks", cfg.model.mixer_blocks}}},
      {"train",
       {{"pretrain_fraction", cfg.train.pretrain_fraction},
        {"epochs_pretrain", cfg.train.epochs_pretrain},
        {"epochs_finetune", cfg.train.epochs_finetune},
        {"learning_rate_pretrain", cfg.train.learning_rate_pretrain},
        {"learning_rate_finetune", cfg.train.learning_rate_finetune},
        {"batch_size", cfg.train.batch_size},
        {"adam_beta1", cfg.train.adam.beta1},
        {"adam_beta2", cfg.train.adam.beta2},
        {"adam_eps", cfg.train.adam.eps}}},
      {"eval",
       {{"threshold", cfg.eval.threshold},
        {"edge_budget", cfg.eval.edge_budget ? nlohmann::json(*cfg.eval.edge_budget) : nlohmann::json(nullptr)}}},
  };
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(path.string() + ": " + ex.what());
  }
  return config_from_json(j);
}

void save_config(const PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << config_to_json(cfg).dump(2) << '\n';
}

}  // namespace hyperbrain
