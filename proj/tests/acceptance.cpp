// Acceptance gate: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gradcheck.hpp"
#include "hyperbrain/cli.hpp"
#include "hyperbrain/config.hpp"
#include "hyperbrain/encoder.hpp"
#include "hyperbrain/error.hpp"
#include "hyperbrain/eval.hpp"
#include "hyperbrain/ingest.hpp"
#include "hyperbrain/training.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace hyperbrain;
using graph::Hyperedge;
using graph::IndexEntry;
using graph::NodeSet;
using graph::TemporalHypergraph;
using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

const fs::path kWork = fs::temp_directory_path() / "hyperbrain_acceptance";
const std::uint64_t kSeeds[] = {1, 2, 3};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TemporalHypergraph random_graph(std::mt19937_64& rng, int n_nodes, int n_windows, int n_edges) {
  std::uniform_int_distribution<int> node(0, n_nodes - 1), time(0, n_windows - 1), size(2, 5);
  std::set<Hyperedge> edges;
  while (static_cast<int>(edges.size()) < n_edges) {
    std::set<int> s;
    const int k = size(rng);
    while (static_cast<int>(s.size()) < k) s.insert(node(rng));
    edges.insert({NodeSet(s.begin(), s.end()), time(rng)});
  }
  return TemporalHypergraph(n_nodes, n_windows, {edges.begin(), edges.end()});
}

PipelineConfig default_config(std::uint64_t seed) {
  auto cfg = config_from_json(nlohmann::json::object());
  cfg.seed = seed;
  return cfg;
}

fs::path run_dir(std::uint64_t seed) { return kWork / ("seed_" + std::to_string(seed)); }

// ---------------------------------------------------------------------------

Outcome sampler_bias() {
  // Anchor 0 appears in five edges before the root timestamp 6.
  const TemporalHypergraph g(7, 7, {{{0, 2}, 5}, {{0, 3}, 5}, {{0, 4}, 3}, {{0, 5}, 2}, {{0, 6}, 0}});
  std::vector<IndexEntry> candidates(g.incident(0).begin(), g.incident(0).end());
  std::string detail;
  bool pass = true;
  for (double theta : {0.0, std::numbers::ln2, 2.0}) {
    walk::WalkConfig cfg;
    cfg.walk_length = 2;
    cfg.time_bias = theta;
    const auto expected = walk::step_probabilities(candidates, 6, theta);
    std::vector<double> counts(g.n_edges(), 0.0);
    Rng rng(derive_seed(17, static_cast<std::uint64_t>(theta * 1000)));
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const auto w = walk::sample_walk(g, {0, 1}, 6, 0, cfg, rng);
      for (std::size_t e = 0; e < g.n_edges(); ++e)
        if (g.edge(static_cast<int>(e)).nodes == w.steps[1].edge && g.edge(static_cast<int>(e)).t == w.steps[1].t)
          counts[e] += 1;
    }
    double tv = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c)
      tv += std::abs(counts[candidates[c].edge] / n - expected[c]);
    tv /= 2;
    if (theta == 0.0)
      for (double p : expected) pass = pass && std::abs(p - 0.2) < 1e-15;
    pass = pass && tv < 0.02;
    detail += "theta=" + fmt(theta) + " TV=" + fmt(tv, 3) + " ";
  }
  return {pass, detail + "(limit 0.02)"};
}

Outcome gradient_suite() {
  std::mt19937_64 rng(2);
  auto rand = [&](std::size_t r, std::size_t c) { return oracle::random_tensor(r, c, rng); };
  auto positive = [&](std::size_t r, std::size_t c) {
    Tensor t = rand(r, c);
    for (double& v : t.data()) v = 0.5 + std::abs(v);
    return t;
  };
  using V = std::vector<Var>;
  const std::vector<std::pair<std::string, std::pair<gradcheck::Builder, std::vector<Tensor>>>> ops{
      {"matmul", {[](Tape&, const V& v) { return tensor::matmul(v[0], v[1]); }, {rand(3, 4), rand(4, 2)}}},
      {"add", {[](Tape&, const V& v) { return tensor::add(v[0], v[1]); }, {rand(3, 4), rand(3, 4)}}},
      {"add_row", {[](Tape&, const V& v) { return tensor::add_row(v[0], v[1]); }, {rand(3, 4), rand(1, 4)}}},
      {"mul", {[](Tape&, const V& v) { return tensor::mul(v[0], v[1]); }, {rand(3, 4), rand(3, 4)}}},
      {"affine", {[](Tape&, const V& v) { return tensor::affine(v[0], 0.7, -2.0); }, {rand(3, 4)}}},
      {"mean_axis0", {[](Tape&, const V& v) { return tensor::mean_axis(v[0], 0); }, {rand(3, 4)}}},
      {"mean_axis1", {[](Tape&, const V& v) { return tensor::mean_axis(v[0], 1); }, {rand(3, 4)}}},
      {"mean_all", {[](Tape&, const V& v) { return tensor::mean_all(v[0]); }, {rand(3, 4)}}},
      {"concat", {[](Tape&, const V& v) { return tensor::concat_cols(v); }, {rand(2, 3), rand(2, 1)}}},
      {"layer_norm", {[](Tape&, const V& v) { return tensor::layer_norm(v[0]); }, {rand(3, 5)}}},
      {"gelu", {[](Tape&, const V& v) { return tensor::gelu(v[0]); }, {rand(3, 4)}}},
      {"cos", {[](Tape&, const V& v) { return tensor::cos(v[0]); }, {rand(3, 4)}}},
      {"sigmoid", {[](Tape&, const V& v) { return tensor::sigmoid(v[0]); }, {rand(3, 4)}}},
      {"log", {[](Tape&, const V& v) { return tensor::log(v[0]); }, {positive(3, 4)}}},
      {"clamp", {[](Tape&, const V& v) { return tensor::clamp(v[0], -5.0, 5.0); }, {rand(3, 4)}}},
      {"gather_rows",
       {[](Tape&, const V& v) {
          const int rows[] = {1, 0, 1};
          return tensor::gather_rows(v[0], rows);
        },
        {rand(2, 3)}}},
      {"segment_mean",
       {[](Tape&, const V& v) { return tensor::segment_mean(v[0], {{0, 2}, {1, 2, 3}}, true); }, {rand(4, 3)}}},
      {"block_transpose", {[](Tape&, const V& v) { return tensor::block_transpose(v[0], 2); }, {rand(6, 2)}}},
  };
  double worst_op = 0;
  std::string worst_op_name;
  for (const auto& [name, op] : ops) {
    const double e = gradcheck::max_error(op.first, op.second);
    if (e > worst_op) {
      worst_op = e;
      worst_op_name = name;
    }
  }

  encoder::ModelDims dims;
  dims.walk_length = 3;
  dims.d_pos = 4;
  dims.d_edge = 6;
  dims.d_time = 4;
  dims.mixer_blocks = 2;
  const auto model = encoder::ScorerModel::initialize(dims, 5);
  walk::WalkConfig wcfg;
  wcfg.walk_length = 3;
  wcfg.walks_per_node = 3;
  std::mt19937_64 grng(9);
  const auto g = random_graph(grng, 10, 6, 30);
  const std::vector<training::BatchQuery> queries{{&g, g.edge(29).nodes, g.edge(29).t, false},
                                                  {&g, g.edge(17).nodes, g.edge(17).t, false},
                                                  {&g, {1, 4, 8}, 5, true},
                                                  {&g, {0, 9}, 3, true}};
  double worst_param = 0;
  std::string worst_param_name;
  for (const auto& [name, e] : gradcheck::model_errors(model, queries, wcfg)) {
    if (e > worst_param) {
      worst_param = e;
      worst_param_name = name;
    }
  }
  return {worst_op < 1e-6 && worst_param < 1e-4,
          "ops worst " + fmt(worst_op, 3) + " (" + worst_op_name + ", limit 1e-6); parameters worst " +
              fmt(worst_param, 3) + " (" + worst_param_name + ", limit 1e-4) over " +
              std::to_string(model.params.size()) + " tensors"};
}

Outcome permutation_invariance() {
  const auto cfg = default_config(1);
  const auto subject = ingest::generate_subject(cfg.cohort_spec(), 0);
  const auto g = graph::build_temporal_hypergraph(subject, cfg.window);
  const auto model = encoder::ScorerModel::initialize(cfg.model_dims(), 4);
  const auto wcfg = cfg.walk_config();
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> node(0, g.n_nodes() - 1), size(2, 6), time(0, g.n_windows() - 1);
  int score_mismatch = 0;
  for (int i = 0; i < 1000; ++i) {
    NodeSet e;
    int t = 0;
    if (i % 2 == 0) {
      const auto& edge = g.edge(static_cast<int>(rng() % g.n_edges()));
      e = edge.nodes;
      t = edge.t;
    } else {
      std::set<int> s;
      const int k = size(rng);
      while (static_cast<int>(s.size()) < k) s.insert(node(rng));
      e.assign(s.begin(), s.end());
      t = time(rng);
    }
    NodeSet perm = e;
    do std::shuffle(perm.begin(), perm.end(), rng);
    while (perm == e);
    if (encoder::anomaly_score(e, t, g, model, wcfg) != encoder::anomaly_score(perm, t, g, model, wcfg))
      ++score_mismatch;
  }

  int mixer_mismatch = 0;
  std::uniform_int_distribution<int> rows(2, 12);
  for (int i = 0; i < 1000; ++i) {
    const int n = rows(rng);
    const auto x = oracle::random_tensor(n, model.dims.d_pos, rng);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Tensor px(n, x.cols());
    for (int r = 0; r < n; ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) px(r, c) = x(order[r], c);
    const std::string prefix = i % 2 == 0 ? "edge" : "psi";
    if (prefix == "psi") {
      const auto wide = oracle::random_tensor(n, model.dims.d_model(), rng);
      Tensor pw(n, wide.cols());
      for (int r = 0; r < n; ++r)
        for (std::size_t c = 0; c < wide.cols(); ++c) pw(r, c) = wide(order[r], c);
      if (encoder::set_mixer(model, prefix, wide) != encoder::set_mixer(model, prefix, pw)) ++mixer_mismatch;
    } else if (encoder::set_mixer(model, prefix, x) != encoder::set_mixer(model, prefix, px)) {
      ++mixer_mismatch;
    }
  }
  return {score_mismatch == 0 && mixer_mismatch == 0,
          "anomaly_score mismatches " + std::to_string(score_mismatch) + "/1000, set_mixer mismatches " +
              std::to_string(mixer_mismatch) + "/1000"};
}

Outcome hyperedge_oracle() {
  std::mt19937_64 rng(55);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> r_dist(2, 10), l_dist(5, 40), f_dist(1, 4);
  std::uniform_real_distribution<double> p_dist(10.0, 99.0), mix(0.0, 1.5);
  int mismatches = 0;
  long edges = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int r = r_dist(rng), l = l_dist(rng), factors = f_dist(rng);
    std::vector<std::vector<double>> latent(factors, std::vector<double>(l));
    for (auto& f : latent)
      for (double& v : f) v = normal(rng);
    std::vector<std::vector<double>> rows(r, std::vector<double>(l));
    const double noise = mix(rng);
    for (auto& row : rows) {
      const auto& f = latent[rng() % factors];
      for (int j = 0; j < l; ++j) row[j] = f[j] + noise * normal(rng);
    }
    graph::WindowConfig cfg;
    cfg.percentile = trial % 3 == 0 ? 90.0 : p_dist(rng);
    cfg.max_hyperedge_size = 10;
    ingest::Matrix m(r, l);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < l; ++j) m(i, j) = rows[i][j];
    std::vector<NodeSet> got;
    for (const auto& e : graph::build_window_hypergraph(m, cfg, 0)) got.push_back(e.nodes);
    edges += static_cast<long>(got.size());
    if (got != oracle::window_hyperedges(rows, cfg.percentile)) ++mismatches;
  }
  return {mismatches == 0,
          std::to_string(mismatches) + "/100 windows differ from brute force (" + std::to_string(edges) + " edges)"};
}

Outcome negative_sampling() {
  const auto cfg = default_config(4);
  std::vector<TemporalHypergraph> graphs;
  auto spec = cfg.cohort_spec();
  spec.n_subjects = 4;
  for (const auto& s : ingest::generate_cohort(spec)) graphs.push_back(graph::build_temporal_hypergraph(s, cfg.window));
  const auto index = training::build_index(graphs);
  std::vector<NodeSet> sources;
  for (const auto& g : graphs)
    for (const auto& e : g.edges()) sources.push_back(e.nodes);
  // Larger synthetic sources exercise odd and even sizes beyond the cohort's mostly-pair edges.
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    std::set<int> s;
    const int k = 2 + i % 7;
    while (static_cast<int>(s.size()) < k) s.insert(static_cast<int>(rng() % 30));
    sources.emplace_back(s.begin(), s.end());
  }
  Rng draw(99);
  int bad_overlap = 0, in_index = 0, exhausted = 0, drawn = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto& e = sources[uniform_index(draw, sources.size())];
    NodeSet n;
    try {
      n = training::sample_negative(e, 30, index, draw);
    } catch (const NegativeExhausted&) {
      ++exhausted;
      continue;
    }
    ++drawn;
    std::size_t shared = 0;
    for (int v : n) shared += std::binary_search(e.begin(), e.end(), v);
    if (shared != (e.size() + 1) / 2 || n.size() != e.size()) ++bad_overlap;
    if (index.contains(n)) ++in_index;
  }
  return {bad_overlap == 0 && in_index == 0 && drawn > 0,
          std::to_string(drawn) + " draws: overlap violations " + std::to_string(bad_overlap) + ", in index " +
              std::to_string(in_index) + ", exhausted " + std::to_string(exhausted)};
}

Outcome auc_oracle() {
  std::mt19937_64 rng(77);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 300);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool coarse = trial % 2 == 0;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      s[i] = coarse ? static_cast<double>(rng() % 7) : normal(rng);
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 1;
    y[1] = 0;
    worst = std::max(worst, std::abs(eval::auc(s, y) - oracle::auc_pairs(s, y)));
  }
  return {worst < 1e-12, "max |rank - pairs| = " + fmt(worst, 3) + " over 100 instances"};
}

// ---------------------------------------------------------------------------

struct PipelineRun {
  double seconds = 0;
  nlohmann::json report;
};

PipelineRun run_pipeline(std::uint64_t seed, const fs::path& dir) {
  const auto cfg = default_config(seed);
  fs::remove_all(dir);
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream log;
  cli::cmd_generate(cfg, dir / "signals");
  cli::cmd_build(cfg, dir / "signals", dir / "graphs");
  cli::cmd_train(cfg, dir / "graphs" / "train", dir / "model", 1, log);
  cli::cmd_eval(cfg, dir / "model" / "model.json", dir / "graphs" / "test", dir / "model" / "negative_index.jsonl",
                dir / "eval", 1, log);
  PipelineRun run;
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run.report = nlohmann::json::parse(slurp(dir / "eval" / "report.json"));
  return run;
}

Outcome end_to_end_auc() {
  int passing = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto run = run_pipeline(seed, run_dir(seed));
    const double model = run.report.at("auc_model");
    const double best =
        std::max({run.report.at("auc_cn").get<double>(), run.report.at("auc_jc").get<double>(),
                  run.report.at("auc_aa").get<double>()});
    const bool ok = model >= 0.85 && model >= best && run.seconds <= 900.0;
    passing += ok;
    detail += "seed " + std::to_string(seed) + ": model " + fmt(model) + " best baseline " + fmt(best) + " " +
              fmt(run.seconds, 3) + "s" + (ok ? "" : " (miss)") + "; ";
    std::cout << "  " << detail.substr(detail.rfind("seed")) << std::endl;
  }
  return {passing >= 2, detail + std::to_string(passing) + "/3 seeds hold"};
}

Outcome region_sanity() {
  int passing = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto dir = run_dir(seed);
    if (!fs::exists(dir / "model" / "model.json")) run_pipeline(seed, dir);
    const auto cfg = default_config(seed);
    const auto model = encoder::load_checkpoint(dir / "model" / "model.json");
    auto index = training::NegativeIndex::load(dir / "model" / "negative_index.jsonl");
    const auto community = ingest::community_assignment(cfg.cohort.n_rois, cfg.cohort.n_communities);
    const int target = static_cast<int>(seed % static_cast<std::uint64_t>(cfg.cohort.n_communities));
    std::vector<int> outside;
    for (int v = 0; v < cfg.cohort.n_rois; ++v)
      if (community[v] != target) outside.push_back(v);

    std::vector<eval::ScoredEdge> per_edge;
    Rng rng(derive_seed(seed, 0x726567ULL));
    for (const auto& file : {"subject_010", "subject_011", "subject_012"}) {
      const auto g = graph::load_hypergraph(dir / "graphs" / "test" / (std::string(file) + ".jsonl"));
      index.add_graph(g);
      // Each co-activation inside the target community gains one foreign
      // member: an abnormal coupling anchored on that community's regions.
      std::vector<Hyperedge> queries(g.edges().begin(), g.edges().end());
      const std::size_t n_true = queries.size();
      for (std::size_t i = 0; i < n_true; ++i) {
        const auto& e = g.edge(static_cast<int>(i));
        if (community[e.nodes.front()] != target) continue;
        if (!std::all_of(e.nodes.begin(), e.nodes.end(), [&](int v) { return community[v] == target; })) continue;
        for (int attempt = 0; attempt < 100; ++attempt) {
          NodeSet planted = e.nodes;
          planted.push_back(outside[uniform_index(rng, outside.size())]);
          std::sort(planted.begin(), planted.end());
          if (!index.contains(planted)) {
            queries.push_back({planted, e.t});
            break;
          }
        }
      }
      const auto scores = eval::score_queries(g, queries, model, cfg.walk_config(), 1);
      for (std::size_t i = 0; i < queries.size(); ++i) {
        eval::ScoredEdge s;
        s.nodes = queries[i].nodes;
        s.t = queries[i].t;
        s.label = i < n_true ? eval::Label::Normal : eval::Label::Injected;
        s.model_score = scores[i];
        per_edge.push_back(s);
      }
    }
    const auto stats = eval::region_report(per_edge, cfg.eval.threshold, cfg.cohort.n_rois);
    int inside = 0;
    for (const auto& s : stats) inside += community[s.node] == target;
    const bool ok = !stats.empty() && inside == static_cast<int>(stats.size());
    passing += ok;
    detail += "seed " + std::to_string(seed) + ": " + std::to_string(inside) + "/" + std::to_string(stats.size()) +
              " significant regions in community " + std::to_string(target) + "; ";
  }
  return {passing >= 2, detail + std::to_string(passing) + "/3 seeds hold"};
}

Outcome reproducibility() {
  const std::uint64_t seed = kSeeds[0];
  const auto first = run_dir(seed);
  if (!fs::exists(first / "eval" / "report.json")) run_pipeline(seed, first);
  const auto second = kWork / "rerun";
  fs::remove_all(second);
  fs::create_directories(second);
  const std::string bin = std::string("\"") + HYPERBRAIN_CLI_PATH + "\"";
  const std::string s = " --seed " + std::to_string(seed) + " --threads 1";
  const std::vector<std::string> commands{
      bin + " generate" + s + " --out " + (second / "signals").string(),
      bin + " build" + s + " --signals " + (second / "signals").string() + " --out " + (second / "graphs").string(),
      bin + " train" + s + " --graphs " + (second / "graphs" / "train").string() + " --out " +
          (second / "model").string(),
      bin + " eval" + s + " --checkpoint " + (second / "model" / "model.json").string() + " --test-graphs " +
          (second / "graphs" / "test").string() + " --out " + (second / "eval").string(),
  };
  for (const auto& c : commands) {
    if (std::system((c + " > /dev/null").c_str()) != 0) return {false, "command failed: " + c};
  }

  // Both trees score the same query file through the CLI.
  for (const auto& root : {first, second}) {
    std::ofstream(root / "queries.csv") << "nodes,t\n0|1,18\n0|15,18\n4|12|25,10\n2|3,0\n";
    const auto c = bin + " score" + s + " --checkpoint " + (root / "model" / "model.json").string() + " --graph " +
                   (root / "graphs" / "test" / "subject_010.jsonl").string() + " --edges " +
                   (root / "queries.csv").string() + " --out " + (root / "score").string();
    if (std::system((c + " > /dev/null").c_str()) != 0) return {false, "command failed: " + c};
  }

  int compared = 0, differing = 0;
  std::string first_diff;
  for (const auto& sub : {"model", "eval", "score", "graphs", "signals"}) {
    for (const auto& entry : fs::recursive_directory_iterator(first / sub)) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), first);
      if (rel.filename() == "training_log.csv") continue;  // wall-clock column
      ++compared;
      if (!fs::exists(second / rel) || slurp(entry.path()) != slurp(second / rel)) {
        ++differing;
        if (first_diff.empty()) first_diff = rel.string();
      }
    }
  }
  return {compared > 0 && differing == 0,
          std::to_string(compared) + " files compared, " + std::to_string(differing) + " differ" +
              (first_diff.empty() ? "" : " (first: " + first_diff + ")")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  fs::create_directories(kWork);

  const std::vector<std::pair<int, Outcome (*)()>> criteria{
      {2, sampler_bias},     {3, gradient_suite}, {4, permutation_invariance}, {5, hyperedge_oracle},
      {6, negative_sampling}, {7, auc_oracle},    {1, end_to_end_auc},         {8, region_sanity},
      {9, reproducibility},
  };
  const char* names[] = {"",
                         "end-to-end synthetic AUC",
                         "sampler bias",
                         "gradient suite",
                         "permutation invariance",
                         "hyperedge rule oracle",
                         "negative sampling contract",
                         "AUC oracle",
                         "region report sanity",
                         "reproducibility"};
  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    if (!selected.empty() && !selected.contains(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << id << " [" << names[id] << "]: " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
