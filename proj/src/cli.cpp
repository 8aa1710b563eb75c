#include "hyperbrain/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "hyperbrain/error.hpp"
#include "hyperbrain/eval.hpp"

namespace hyperbrain::cli {

namespace fs = std::filesystem;

namespace {

void prepare_out(const PipelineConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  save_config(cfg, out_dir / "config.json");
}

std::vector<fs::path> files_with_extension(const fs::path& dir, std::initializer_list<std::string_view> exts,
                                           bool recursive) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  const auto accept = [&](const fs::directory_entry& e) {
    if (!e.is_regular_file()) return;
    const auto ext = e.path().extension().string();
    if (std::find(exts.begin(), exts.end(), ext) != exts.end()) out.push_back(e.path());
  };
  if (recursive) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) accept(e);
  } else {
    for (const auto& e : fs::directory_iterator(dir)) accept(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<graph::TemporalHypergraph> load_graphs(const std::vector<fs::path>& files) {
  std::vector<graph::TemporalHypergraph> graphs;
  graphs.reserve(files.size());
  for (const auto& f : files) graphs.push_back(graph::load_hypergraph(f));
  return graphs;
}

std::string subject_name(int index) {
  std::ostringstream s;
  s << "subject_" << std::setw(3) << std::setfill('0') << index;
  return s.str();
}

}  // namespace

graph::NodeSet parse_nodes(const std::string& text) {
  graph::NodeSet nodes;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto bar = std::min(text.find('|', start), text.size());
    const std::string_view cell(text.data() + start, bar - start);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || v < 0)
      throw ParseError("bad node list '" + text + "'");
    nodes.push_back(v);
    start = bar + 1;
  }
  std::sort(nodes.begin(), nodes.end());
  if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end())
    throw ParseError("duplicate node in '" + text + "'");
  return nodes;
}

void cmd_generate(const PipelineConfig& cfg, const fs::path& out_dir) {
  prepare_out(cfg, out_dir);
  const auto cohort = ingest::generate_cohort(cfg.cohort_spec());
  const auto ext = cfg.cohort.format == ingest::Format::Csv ? ".csv" : ".bin";
  fs::create_directories(out_dir / "train");
  fs::create_directories(out_dir / "test");
  for (int i = 0; i < static_cast<int>(cohort.size()); ++i) {
    const bool is_train = i < cfg.cohort.n_train_subjects;
    const auto path = out_dir / (is_train ? "train" : "test") / (subject_name(i) + ext);
    ingest::save_signals(cohort[i], path, cfg.cohort.format);
  }
}

void cmd_build(const PipelineConfig& cfg, const fs::path& signals_dir, const fs::path& out_dir) {
  prepare_out(cfg, out_dir);
  const auto files = files_with_extension(signals_dir, {".csv", ".bin"}, true);
  if (files.empty()) throw DataError("no signal files under " + signals_dir.string());
  std::vector<ingest::SignalMatrix> cohort;
  for (const auto& f : files) cohort.push_back(ingest::load_signals(f, ingest::format_from_path(f)));
  ingest::validate_cohort(cohort);
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto target = out_dir / fs::relative(files[i], signals_dir);
    target.replace_extension(".jsonl");
    fs::create_directories(target.parent_path());
    graph::save_hypergraph(graph::build_temporal_hypergraph(cohort[i], cfg.window), target);
  }
}

void cmd_train(const PipelineConfig& cfg, const fs::path& graphs_dir, const fs::path& out_dir, unsigned threads,
               std::ostream& log) {
  const auto graphs = load_graphs(files_with_extension(graphs_dir, {".jsonl"}, false));
  if (graphs.size() < 2) throw DataError("training needs at least 2 hypergraphs in " + graphs_dir.string());
  prepare_out(cfg, out_dir);
  auto model = encoder::ScorerModel::initialize(cfg.model_dims(), cfg.model_seed());
  const auto on_stage = [&](const std::string& stage, const encoder::ScorerModel& m) {
    encoder::save_checkpoint(m, out_dir / ("checkpoint_" + stage + ".json"));
  };
  const auto on_epoch = [&](const training::EpochRecord& r) {
    log << "epoch " << r.epoch << " " << r.stage << " mean_loss " << r.mean_loss << " (" << r.wall_seconds << " s)\n";
    log.flush();
  };
  try {
    const auto result = training::train(graphs, std::move(model), cfg.train_config(threads), cfg.walk_config(), on_stage,
                                        on_epoch);
    encoder::save_checkpoint(result.model, out_dir / "model.json");
    result.index.save(out_dir / "negative_index.jsonl");
    training::write_training_log(result.history, out_dir / "training_log.csv");
  } catch (const training::TrainingDiverged& ex) {
    encoder::save_checkpoint(ex.last_good(), out_dir / "checkpoint_last_good.json");
    throw;
  }
}

void cmd_score(const PipelineConfig& cfg, const fs::path& checkpoint, const fs::path& graph_file,
               const fs::path& edges_file, const fs::path& out_dir, unsigned threads) {
  const auto model = encoder::load_checkpoint(checkpoint);
  const auto g = graph::load_hypergraph(graph_file);
  std::ifstream in(edges_file);
  if (!in) throw DataError("cannot open " + edges_file.string());
  std::vector<graph::Hyperedge> queries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.rfind("nodes", 0) == 0)) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(edges_file.string() + " line " + std::to_string(line_no));
    const std::string t_text = line.substr(comma + 1);
    int t = 0;
    const auto [ptr, ec] = std::from_chars(t_text.data(), t_text.data() + t_text.size(), t);
    if (ec != std::errc() || ptr != t_text.data() + t_text.size())
      throw ParseError(edges_file.string() + " line " + std::to_string(line_no) + ": bad timestamp");
    auto nodes = parse_nodes(line.substr(0, comma));
    for (int v : nodes)
      if (v >= g.n_nodes()) throw DataError("node " + std::to_string(v) + " outside the graph");
    if (nodes.size() < 2) throw DataError(edges_file.string() + " line " + std::to_string(line_no) + ": |e| < 2");
    queries.push_back({std::move(nodes), t});
  }
  prepare_out(cfg, out_dir);
  const auto scores = eval::score_queries(g, queries, model, cfg.walk_config(), threads);
  std::ofstream out(out_dir / "scores.csv");
  out.precision(17);
  out << "nodes,t,score\n";
  for (std::size_t i = 0; i < queries.size(); ++i)
    out << eval::nodes_to_string(queries[i].nodes) << ',' << queries[i].t << ',' << scores[i] << '\n';
}

void cmd_eval(const PipelineConfig& cfg, const fs::path& checkpoint, const fs::path& test_graphs_dir,
              const fs::path& index_file, const fs::path& out_dir, unsigned threads, std::ostream& log) {
  const auto model = encoder::load_checkpoint(checkpoint);
  const auto index = training::NegativeIndex::load(index_file);
  const auto files = files_with_extension(test_graphs_dir, {".jsonl"}, false);
  if (files.empty()) throw DataError("no test hypergraphs in " + test_graphs_dir.string());
  prepare_out(cfg, out_dir);

  eval::EvalOptions options;
  options.threshold = cfg.eval.threshold;
  options.edge_budget = cfg.eval.edge_budget;
  options.threads = threads;
  std::vector<eval::EvalReport> reports;
  int n_nodes = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto g = graph::load_hypergraph(files[i]);
    n_nodes = g.n_nodes();
    options.seed = derive_seed(cfg.eval_seed(), i);
    auto report = eval::inject_and_evaluate(g, index, model, cfg.walk_config(), options);
    report.subject = files[i].stem().string();
    log << report.subject << ": auc_model " << report.auc_model << " cn " << report.auc_cn << " jc " << report.auc_jc
        << " aa " << report.auc_aa << '\n';
    reports.push_back(std::move(report));
  }
  const auto pooled = eval::pool_reports(reports, cfg.eval.threshold, n_nodes);
  log << "pooled: auc_model " << pooled.auc_model << " cn " << pooled.auc_cn << " jc " << pooled.auc_jc << " aa "
      << pooled.auc_aa << '\n';

  nlohmann::json mean = {{"auc_model", 0.0}, {"auc_cn", 0.0}, {"auc_jc", 0.0}, {"auc_aa", 0.0}};
  nlohmann::json per_subject = nlohmann::json::array();
  for (const auto& r : reports) {
    mean["auc_model"] = mean["auc_model"].get<double>() + r.auc_model / reports.size();
    mean["auc_cn"] = mean["auc_cn"].get<double>() + r.auc_cn / reports.size();
    mean["auc_jc"] = mean["auc_jc"].get<double>() + r.auc_jc / reports.size();
    mean["auc_aa"] = mean["auc_aa"].get<double>() + r.auc_aa / reports.size();
    per_subject.push_back(eval::to_json(r));
  }
  nlohmann::json report = eval::to_json(pooled);
  report["per_subject_mean"] = mean;
  report["per_subject"] = per_subject;
  std::ofstream(out_dir / "report.json") << report.dump(2) << '\n';
  eval::write_per_edge_csv(pooled, out_dir / "per_edge.csv");
  eval::write_region_csv(pooled.region_stats, out_dir / "region_stats.csv");
  eval::write_roc_csv(pooled, out_dir / "roc.csv");
}

void cmd_walk_debug(const PipelineConfig& cfg, const fs::path& graph_file, const graph::NodeSet& edge, int t,
                    const fs::path& out_dir) {
  const auto g = graph::load_hypergraph(graph_file);
  for (int v : edge)
    if (v >= g.n_nodes()) throw DataError("node " + std::to_string(v) + " outside the graph");
  const auto walks = walk::sample_walk_set(g, edge, t, cfg.walk_config());
  prepare_out(cfg, out_dir);
  std::ofstream out(out_dir / "walks.jsonl");
  walk::write_walks_jsonl(walks, out);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal hypergraph anomaly detection pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out_dir;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the global seed");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory")->required();

  auto* generate = app.add_subcommand("generate", "Write a synthetic cohort");

  std::string signals_dir;
  auto* build = app.add_subcommand("build", "Build hypergraphs from signal files");
  build->add_option("--signals", signals_dir, "Directory of signal files")->required()->check(CLI::ExistingDirectory);

  std::string graphs_dir;
  auto* train = app.add_subcommand("train", "Train the scorer on healthy hypergraphs");
  train->add_option("--graphs", graphs_dir, "Directory of training hypergraphs")
      ->required()
      ->check(CLI::ExistingDirectory);

  std::string checkpoint, graph_file, edges_file;
  auto* score = app.add_subcommand("score", "Score arbitrary (nodes, t) queries");
  score->add_option("--checkpoint", checkpoint, "Checkpoint manifest")->required()->check(CLI::ExistingFile);
  score->add_option("--graph", graph_file, "Hypergraph JSONL")->required()->check(CLI::ExistingFile);
  score->add_option("--edges", edges_file, "CSV of nodes,t queries")->required()->check(CLI::ExistingFile);

  std::string test_dir, index_file;
  auto* evaluate = app.add_subcommand("eval", "Inject anomalies into test hypergraphs and report AUCs");
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint manifest")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--test-graphs", test_dir, "Directory of test hypergraphs")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--index", index_file, "Negative index (defaults to the checkpoint's directory)")
      ->check(CLI::ExistingFile);

  std::string edge_text;
  int walk_t = 0;
  auto* walk_debug = app.add_subcommand("walk-debug", "Dump the walk set of one query");
  walk_debug->add_option("--graph", graph_file, "Hypergraph JSONL")->required()->check(CLI::ExistingFile);
  walk_debug->add_option("--edge", edge_text, "Query nodes, pipe-joined")->required();
  walk_debug->add_option("--t", walk_t, "Query timestamp")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    PipelineConfig cfg = config_path.empty() ? config_from_json(nlohmann::json::object()) : load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (*generate) {
      cmd_generate(cfg, out_dir);
    } else if (*build) {
      cmd_build(cfg, signals_dir, out_dir);
    } else if (*train) {
      cmd_train(cfg, graphs_dir, out_dir, threads, out);
    } else if (*score) {
      cmd_score(cfg, checkpoint, graph_file, edges_file, out_dir, threads);
    } else if (*evaluate) {
      const fs::path index = index_file.empty() ? fs::path(checkpoint).parent_path() / "negative_index.jsonl"
                                                : fs::path(index_file);
      if (!fs::exists(index)) {
        err << "error: negative index " << index << " not found; pass --index\n";
        return 1;
      }
      cmd_eval(cfg, checkpoint, test_dir, index, out_dir, threads, out);
    } else if (*walk_debug) {
      cmd_walk_debug(cfg, graph_file, parse_nodes(edge_text), walk_t, out_dir);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::Usage ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace hyperbrain::cli
