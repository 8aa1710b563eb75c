#include "hyperbrain/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "hyperbrain/parallel.hpp"
#include "hyperbrain/random.hpp"

namespace hyperbrain::training {

using encoder::ParameterMap;

std::size_t NegativeIndex::Hash::operator()(const graph::NodeSet& v) const noexcept { return hash_nodes(v, 0); }

void NegativeIndex::add(const graph::NodeSet& nodes) {
  graph::NodeSet sorted = nodes;
  std::sort(sorted.begin(), sorted.end());
  sets_.insert(std::move(sorted));
}

void NegativeIndex::add_graph(const graph::TemporalHypergraph& g) {
  for (const auto& e : g.edges()) sets_.insert(e.nodes);
}

bool NegativeIndex::contains(const graph::NodeSet& nodes) const {
  if (std::is_sorted(nodes.begin(), nodes.end())) return sets_.contains(nodes);
  graph::NodeSet sorted = nodes;
  std::sort(sorted.begin(), sorted.end());
  return sets_.contains(sorted);
}

void NegativeIndex::save(const std::filesystem::path& path) const {
  std::vector<graph::NodeSet> sorted(sets_.begin(), sets_.end());
  std::sort(sorted.begin(), sorted.end());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& s : sorted) out << nlohmann::json(s).dump() << '\n';
}

NegativeIndex NegativeIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open negative index " + path.string());
  NegativeIndex index;
  std::string line;
  try {
    while (std::getline(in, line))
      if (!line.empty()) index.add(nlohmann::json::parse(line).get<graph::NodeSet>());
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path.string() + ": " + ex.what());
  }
  return index;
}

NegativeIndex build_index(const std::vector<graph::TemporalHypergraph>& subjects) {
  NegativeIndex index;
  for (const auto& g : subjects) index.add_graph(g);
  return index;
}

graph::NodeSet sample_negative(const graph::NodeSet& e, int n_nodes, const NegativeIndex& index, Rng& rng) {
  graph::NodeSet members = e;
  std::sort(members.begin(), members.end());
  const int k = static_cast<int>(members.size());
  if (k < 2) throw ContractError("negative sampling needs |e| >= 2");
  const int keep = (k + 1) / 2;
  const int replace = k / 2;

  std::vector<int> outside;
  for (int v = 0; v < n_nodes; ++v)
    if (!std::binary_search(members.begin(), members.end(), v)) outside.push_back(v);
  if (static_cast<int>(outside.size()) < replace) {
    throw ConfigError("cannot substitute " + std::to_string(replace) + " nodes from " + std::to_string(outside.size()) +
                      " outside the hyperedge");
  }

  for (int attempt = 0; attempt < kNegativeAttempts; ++attempt) {
    // Partial Fisher-Yates on both pools.
    for (int i = 0; i < keep; ++i) std::swap(members[i], members[i + uniform_index(rng, k - i)]);
    for (int i = 0; i < replace; ++i)
      std::swap(outside[i], outside[i + uniform_index(rng, outside.size() - i)]);
    graph::NodeSet candidate(members.begin(), members.begin() + keep);
    candidate.insert(candidate.end(), outside.begin(), outside.begin() + replace);
    std::sort(candidate.begin(), candidate.end());
    if (!index.contains(candidate)) return candidate;
  }
  throw NegativeExhausted("no unseen negative after " + std::to_string(kNegativeAttempts) + " attempts");
}

double contrastive_loss(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty()) throw ContractError("contrastive_loss needs nonempty inputs");
  const auto clamp = [](double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); };
  double pos = 0.0, neg = 0.0;
  for (double p : pos_scores) pos -= std::log(1.0 - clamp(p));
  for (double p : neg_scores) neg -= std::log(clamp(p));
  return pos / static_cast<double>(pos_scores.size()) + neg / static_cast<double>(neg_scores.size());
}

Adam::Adam(const ParameterMap& params, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& [name, t] : params) {
    m_.emplace(name, tensor::Tensor(t.rows(), t.cols()));
    v_.emplace(name, tensor::Tensor(t.rows(), t.cols()));
  }
}

void Adam::step(ParameterMap& params, const ParameterMap& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    const auto git = grads.find(name);
    if (git == grads.end()) continue;
    auto pv = p.data();
    const auto gv = git->second.data();
    auto mv = m_.at(name).data();
    auto vv = v_.at(name).data();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      mv[i] = cfg_.beta1 * mv[i] + (1.0 - cfg_.beta1) * gv[i];
      vv[i] = cfg_.beta2 * vv[i] + (1.0 - cfg_.beta2) * gv[i] * gv[i];
      pv[i] -= lr * (mv[i] / c1) / (std::sqrt(vv[i] / c2) + cfg_.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (!(pretrain_fraction > 0.0 && pretrain_fraction < 1.0)) throw ConfigError("pretrain_fraction must be in (0, 1)");
  if (epochs_pretrain < 0 || epochs_finetune < 0) throw ConfigError("epoch counts must be >= 0");
  if (!(learning_rate_pretrain > 0.0) || !(learning_rate_finetune > 0.0))
    throw ConfigError("learning rates must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

std::pair<std::vector<int>, std::vector<int>> split_subjects(std::size_t n, double pretrain_fraction,
                                                             std::uint64_t seed) {
  const auto n_pre = static_cast<std::size_t>(std::llround(pretrain_fraction * static_cast<double>(n)));
  if (n_pre == 0 || n_pre >= n) {
    throw ConfigError("pretrain_fraction " + std::to_string(pretrain_fraction) + " puts all " + std::to_string(n) +
                      " subjects in one split");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x73706c6974ULL));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
  std::vector<int> pre(order.begin(), order.begin() + static_cast<long>(n_pre));
  std::vector<int> fine(order.begin() + static_cast<long>(n_pre), order.end());
  std::sort(pre.begin(), pre.end());
  std::sort(fine.begin(), fine.end());
  return {pre, fine};
}

double batch_gradients(const encoder::ScorerModel& model, std::span<const BatchQuery> queries,
                       const walk::WalkConfig& wcfg, unsigned threads, ParameterMap& grads) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& q : queries) (q.negative ? n_neg : n_pos)++;
  std::vector<ParameterMap> per_query(queries.size());
  std::vector<double> loss(queries.size(), 0.0);
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    const auto& q = queries[i];
    const auto walks = walk::sample_walk_set(*q.graph, q.nodes, q.t, wcfg);
    tensor::Tape tape;
    const encoder::BoundParams p(tape, model, true);
    const auto prob = tensor::sigmoid(encoder::score_logit(p, model.dims, walks, q.t));
    // Normal positives contribute -log(1 - p), anomalous negatives -log(p).
    const auto target = q.negative ? prob : tensor::affine(prob, -1.0, 1.0);
    const auto clamped = tensor::clamp(target, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double weight = 1.0 / static_cast<double>(q.negative ? n_neg : n_pos);
    const auto term = tensor::affine(tensor::log(clamped), -weight, 0.0);
    tape.backward(term);
    loss[i] = term.value().item();
    per_query[i] = p.gradients();
  });

  grads.clear();
  double total = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    total += loss[i];
    for (auto& [name, g] : per_query[i]) {
      auto [it, inserted] = grads.try_emplace(name, std::move(g));
      if (!inserted) it->second.mat() += per_query[i].at(name).mat();
    }
  }
  return total;
}

TrainResult train(const std::vector<graph::TemporalHypergraph>& subjects, encoder::ScorerModel model,
                  const TrainConfig& tcfg, const walk::WalkConfig& wcfg, const StageCallback& on_stage_end,
                  const EpochCallback& on_epoch) {
  tcfg.validate();
  wcfg.validate();
  if (subjects.size() < 2) throw ConfigError("training needs at least 2 subjects");
  if (wcfg.walk_length != model.dims.walk_length) throw ConfigError("walk_length differs between walker and model");
  const int n_nodes = subjects.front().n_nodes();
  for (const auto& g : subjects)
    if (g.n_nodes() != n_nodes) throw DataError("training subjects disagree on the node count");

  TrainResult result;
  result.index = build_index(subjects);
  std::tie(result.pretrain_subjects, result.finetune_subjects) =
      split_subjects(subjects.size(), tcfg.pretrain_fraction, tcfg.seed);

  Adam adam(model.params, tcfg.adam);
  int epoch_counter = 0;

  const auto run_stage = [&](const std::string& stage, int stage_id, const std::vector<int>& members, int epochs,
                             double lr) {
    std::vector<std::pair<int, int>> items;  // (subject, edge id)
    for (int s : members)
      for (int e = 0; e < static_cast<int>(subjects[s].n_edges()); ++e) items.emplace_back(s, e);

    for (int epoch = 0; epoch < epochs; ++epoch) {
      const auto start = std::chrono::steady_clock::now();
      const encoder::ScorerModel last_good = model;
      const auto epoch_seed = derive_seed(tcfg.seed, static_cast<std::uint64_t>(stage_id), static_cast<std::uint64_t>(epoch));
      Rng shuffle_rng(epoch_seed);
      for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[uniform_index(shuffle_rng, i)]);
      walk::WalkConfig epoch_walks = wcfg;
      epoch_walks.seed = derive_seed(wcfg.seed, static_cast<std::uint64_t>(stage_id), static_cast<std::uint64_t>(epoch));

      double loss_sum = 0.0;
      int batches = 0;
      std::vector<BatchQuery> queries;
      ParameterMap grads;
      for (std::size_t begin = 0; begin < items.size(); begin += static_cast<std::size_t>(tcfg.batch_size)) {
        const auto end = std::min(items.size(), begin + static_cast<std::size_t>(tcfg.batch_size));
        queries.clear();
        for (std::size_t i = begin; i < end; ++i) {
          const auto& g = subjects[items[i].first];
          const auto& positive = g.edge(items[i].second);
          Rng neg_rng(derive_seed(epoch_seed, 0x6e6567ULL, i));
          graph::NodeSet negative;
          try {
            negative = sample_negative(positive.nodes, n_nodes, result.index, neg_rng);
          } catch (const NegativeExhausted&) {
            ++result.skipped_positives;
            continue;
          }
          if (result.index.contains(negative)) throw ContractError("negative present in the index");
          queries.push_back({&g, positive.nodes, positive.t, false});
          queries.push_back({&g, std::move(negative), positive.t, true});
        }
        if (queries.empty()) continue;
        const double loss = batch_gradients(model, queries, epoch_walks, tcfg.threads, grads);
        if (!std::isfinite(loss)) {
          throw TrainingDiverged(stage + " epoch " + std::to_string(epoch + 1) + " produced a non-finite loss",
                                 last_good);
        }
        adam.step(model.params, grads, lr);
        loss_sum += loss;
        ++batches;
      }
      if (!model.all_finite()) throw TrainingDiverged("non-finite parameters after " + stage, last_good);

      EpochRecord record;
      record.epoch = ++epoch_counter;
      record.stage = stage;
      record.mean_loss = batches > 0 ? loss_sum / batches : 0.0;
      record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.history.push_back(record);
      if (on_epoch) on_epoch(record);
    }
    if (on_stage_end) on_stage_end(stage, model);
  };

  run_stage("pretrain", 1, result.pretrain_subjects, tcfg.epochs_pretrain, tcfg.learning_rate_pretrain);
  run_stage("finetune", 2, result.finetune_subjects, tcfg.epochs_finetune, tcfg.learning_rate_finetune);
  result.model = std::move(model);
  return result;
}

void write_training_log(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,stage,mean_loss,wall_seconds\n";
  out.precision(17);
  for (const auto& r : history) out << r.epoch << ',' << r.stage << ',' << r.mean_loss << ',' << r.wall_seconds << '\n';
}

}  // namespace hyperbrain::training
