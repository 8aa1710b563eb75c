#include "hyperbrain/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>

#include "hyperbrain/error.hpp"
#include "hyperbrain/parallel.hpp"
#include "hyperbrain/random.hpp"

namespace hyperbrain::eval {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw EvalError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += mid_rank;
        ++n_pos;
      } else if (labels[order[k]] != 0) {
        throw EvalError("labels must be 0 or 1");
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw EvalError("AUC needs both classes");
  const double np = static_cast<double>(n_pos);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  std::vector<RocPoint> points{{0.0, 0.0}};
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) (labels[order[j]] == 1 ? tp : fp) += 1.0;
    points.push_back({n_neg > 0 ? fp / n_neg : 0.0, n_pos > 0 ? tp / n_pos : 0.0});
    i = j;
  }
  return points;
}

Projection::Projection(const graph::TemporalHypergraph& g) : adj_(g.n_nodes()) {
  for (const auto& e : g.edges())
    for (int u : e.nodes)
      for (int v : e.nodes)
        if (u != v) adj_[u].push_back(v);
  for (auto& list : adj_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
}

StructuralScores Projection::score(const graph::NodeSet& nodes) const {
  graph::NodeSet query = nodes;
  std::sort(query.begin(), query.end());
  StructuralScores total;
  long pairs = 0;
  std::vector<int> common;
  for (std::size_t i = 0; i < query.size(); ++i) {
    for (std::size_t j = i + 1; j < query.size(); ++j) {
      const auto& a = adj_.at(query[i]);
      const auto& b = adj_.at(query[j]);
      common.clear();
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
      const double inter = static_cast<double>(common.size());
      const double uni = static_cast<double>(a.size() + b.size()) - inter;
      total.cn += inter;
      total.jc += uni > 0.0 ? inter / uni : 0.0;
      for (int w : common) {
        const auto degree = adj_[w].size();
        if (degree > 1) total.aa += 1.0 / std::log(static_cast<double>(degree));
      }
      ++pairs;
    }
  }
  if (pairs > 0) {
    total.cn /= pairs;
    total.jc /= pairs;
    total.aa /= pairs;
  }
  return total;
}

StructuralScores structural_scores(const graph::NodeSet& query_edge, const graph::TemporalHypergraph& g) {
  if (query_edge.size() < 2) throw ContractError("structural scores need |e| >= 2");
  return Projection(g).score(query_edge);
}

double binomial_upper_tail(long k, long n, double q) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (q <= 0.0) return 0.0;
  if (q >= 1.0) return 1.0;
  const boost::math::binomial_distribution<double> dist(static_cast<double>(n), q);
  return std::clamp(boost::math::cdf(boost::math::complement(dist, static_cast<double>(k - 1))), 0.0, 1.0);
}

std::vector<double> benjamini_hochberg(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> q(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const double adjusted = p_values[order[r]] * static_cast<double>(m) / static_cast<double>(r + 1);
    running = std::min(running, adjusted);
    q[order[r]] = std::min(running, 1.0);
  }
  return q;
}

std::vector<RegionStat> region_report(std::span<const ScoredEdge> per_edge, double threshold, int n_nodes,
                                      double alpha) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("region threshold must be in (0, 1)");
  std::vector<long> background(n_nodes, 0), flagged(n_nodes, 0);
  long slots = 0, flagged_slots = 0;
  for (const auto& e : per_edge) {
    const bool is_flagged = e.model_score >= threshold;
    for (int v : e.nodes) {
      if (v < 0 || v >= n_nodes) throw IndexError("node " + std::to_string(v) + " outside the region range");
      ++background[v];
      if (is_flagged) ++flagged[v];
    }
    slots += static_cast<long>(e.nodes.size());
    if (is_flagged) flagged_slots += static_cast<long>(e.nodes.size());
  }
  if (flagged_slots == 0) return {};

  std::vector<double> p(n_nodes, 1.0);
  for (int v = 0; v < n_nodes; ++v) {
    const double rate = static_cast<double>(background[v]) / static_cast<double>(slots);
    p[v] = binomial_upper_tail(flagged[v], flagged_slots, rate);
  }
  const auto q = benjamini_hochberg(p);
  std::vector<RegionStat> out;
  for (int v = 0; v < n_nodes; ++v)
    if (q[v] < alpha) out.push_back({v, flagged[v], background[v], p[v], q[v]});
  std::sort(out.begin(), out.end(), [](const RegionStat& a, const RegionStat& b) {
    return a.count_in_flagged != b.count_in_flagged ? a.count_in_flagged > b.count_in_flagged : a.node < b.node;
  });
  return out;
}

void compute_aucs(EvalReport& report) {
  std::vector<int> labels;
  std::vector<double> model, cn, jc, aa;
  for (const auto& e : report.per_edge) {
    labels.push_back(static_cast<int>(e.label));
    model.push_back(e.model_score);
    cn.push_back(-e.cn);
    jc.push_back(-e.jc);
    aa.push_back(-e.aa);
  }
  report.auc_model = auc(model, labels);
  report.auc_cn = auc(cn, labels);
  report.auc_jc = auc(jc, labels);
  report.auc_aa = auc(aa, labels);
}

std::vector<double> score_queries(const graph::TemporalHypergraph& g, std::span<const graph::Hyperedge> queries,
                                  const encoder::ScorerModel& model, const walk::WalkConfig& wcfg, unsigned threads) {
  std::vector<double> scores(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    scores[i] = encoder::anomaly_score(queries[i].nodes, queries[i].t, g, model, wcfg);
  });
  return scores;
}

EvalReport inject_and_evaluate(const graph::TemporalHypergraph& g_test, training::NegativeIndex index,
                               const encoder::ScorerModel& model, const walk::WalkConfig& wcfg,
                               const EvalOptions& options) {
  index.add_graph(g_test);
  std::vector<int> chosen(g_test.n_edges());
  std::iota(chosen.begin(), chosen.end(), 0);
  if (options.edge_budget && *options.edge_budget < chosen.size()) {
    Rng rng(derive_seed(options.seed, 0x627564676574ULL));
    for (std::size_t i = 0; i < *options.edge_budget; ++i)
      std::swap(chosen[i], chosen[i + uniform_index(rng, chosen.size() - i)]);
    chosen.resize(*options.edge_budget);
    std::sort(chosen.begin(), chosen.end());
  }

  EvalReport report;
  std::vector<graph::Hyperedge> queries;
  std::vector<Label> labels;
  for (int id : chosen) {
    const auto& e = g_test.edge(id);
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(id)));
    graph::NodeSet negative;
    try {
      negative = training::sample_negative(e.nodes, g_test.n_nodes(), index, rng);
    } catch (const NegativeExhausted&) {
      ++report.negative_exhausted;
      queries.push_back(e);
      labels.push_back(Label::Normal);
      continue;
    }
    queries.push_back(e);
    labels.push_back(Label::Normal);
    queries.push_back({std::move(negative), e.t});
    labels.push_back(Label::Injected);
  }

  const auto scores = score_queries(g_test, queries, model, wcfg, options.threads);
  const Projection projection(g_test);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto s = projection.score(queries[i].nodes);
    report.per_edge.push_back({queries[i].nodes, queries[i].t, labels[i], scores[i], s.cn, s.jc, s.aa});
  }
  compute_aucs(report);
  report.region_stats = region_report(report.per_edge, options.threshold, g_test.n_nodes());
  return report;
}

EvalReport pool_reports(std::span<const EvalReport> reports, double threshold, int n_nodes) {
  EvalReport pooled;
  pooled.subject = "pooled";
  for (const auto& r : reports) {
    pooled.per_edge.insert(pooled.per_edge.end(), r.per_edge.begin(), r.per_edge.end());
    pooled.negative_exhausted += r.negative_exhausted;
  }
  compute_aucs(pooled);
  pooled.region_stats = region_report(pooled.per_edge, threshold, n_nodes);
  return pooled;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : report.per_edge) {
    edges.push_back({{"nodes", e.nodes},
                     {"t", e.t},
                     {"label", e.label == Label::Injected ? "injected" : "normal"},
                     {"model_score", e.model_score},
                     {"cn", e.cn},
                     {"jc", e.jc},
                     {"aa", e.aa}});
  }
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : report.region_stats) {
    regions.push_back({{"node", r.node},
                       {"count_in_flagged", r.count_in_flagged},
                       {"background_count", r.background_count},
                       {"p_value", r.p_value},
                       {"q_value", r.q_value}});
  }
  return {{"subject", report.subject},     {"auc_model", report.auc_model},
          {"auc_cn", report.auc_cn},       {"auc_jc", report.auc_jc},
          {"auc_aa", report.auc_aa},       {"negative_exhausted", report.negative_exhausted},
          {"region_stats", regions},       {"per_edge", edges}};
}

std::string nodes_to_string(const graph::NodeSet& nodes) {
  std::string out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i > 0) out += '|';
    out += std::to_string(nodes[i]);
  }
  return out;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  return out;
}

}  // namespace

void write_per_edge_csv(const EvalReport& report, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "nodes,t,label,model_score,cn,jc,aa\n";
  for (const auto& e : report.per_edge) {
    out << nodes_to_string(e.nodes) << ',' << e.t << ',' << (e.label == Label::Injected ? "injected" : "normal")
        << ',' << e.model_score << ',' << e.cn << ',' << e.jc << ',' << e.aa << '\n';
  }
}

void write_region_csv(const std::vector<RegionStat>& stats, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "node,count_in_flagged,background_count,p_value,q_value\n";
  for (const auto& r : stats)
    out << r.node << ',' << r.count_in_flagged << ',' << r.background_count << ',' << r.p_value << ',' << r.q_value
        << '\n';
}

void write_roc_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& e : report.per_edge) {
    scores.push_back(e.model_score);
    labels.push_back(static_cast<int>(e.label));
  }
  auto out = open_csv(path);
  out << "fpr,tpr\n";
  for (const auto& p : roc_curve(scores, labels)) out << p.fpr << ',' << p.tpr << '\n';
}

}  // namespace hyperbrain::eval
