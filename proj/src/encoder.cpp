#include "hyperbrain/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "hyperbrain/error.hpp"
#include "hyperbrain/random.hpp"

namespace hyperbrain::encoder {

namespace {

struct VectorHash {
  std::size_t operator()(const graph::NodeSet& v) const noexcept { return hash_nodes(v, 0); }
};

void add_linear(ParameterMap& params, const std::string& name, int in, int out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor w(in, out);
  for (double& v : w.data()) v = (2.0 * uniform01(rng) - 1.0) * bound;
  params.emplace(name + ".w", std::move(w));
  params.emplace(name + ".b", Tensor(1, out));
}

void add_mlp2(ParameterMap& params, const std::string& prefix, int in, int hidden, int out, Rng& rng) {
  add_linear(params, prefix + ".l1", in, hidden, rng);
  add_linear(params, prefix + ".l2", hidden, out, rng);
}

void add_set_mixer(ParameterMap& params, const std::string& prefix, int in, int out, Rng& rng) {
  add_mlp2(params, prefix + ".ch", in, in, in, rng);
  add_mlp2(params, prefix + ".out", in, out, out, rng);
}

std::size_t linear_count(std::size_t in, std::size_t out) { return in * out + out; }
std::size_t mlp2_count(std::size_t in, std::size_t hidden, std::size_t out) {
  return linear_count(in, hidden) + linear_count(hidden, out);
}
std::size_t set_mixer_count(std::size_t in, std::size_t out) { return mlp2_count(in, in, in) + mlp2_count(in, out, out); }

// Flattened token layout shared by encode_walks: walk w, position i -> row
// w * walk_length + i.
struct WalkLayout {
  std::vector<const walk::BrainWalk*> walks;
  std::vector<int> anchor_of_walk;
};

WalkLayout layout(const walk::WalkSet& walk_set) {
  WalkLayout out;
  int anchor_slot = 0;
  for (const auto& [anchor, list] : walk_set) {
    for (const auto& w : list) {
      out.walks.push_back(&w);
      out.anchor_of_walk.push_back(anchor_slot);
    }
    ++anchor_slot;
  }
  return out;
}

Var encode_walk_rows(const BoundParams& p, const ModelDims& dims, const std::vector<const walk::BrainWalk*>& walks,
                     const walk::WalkSet& walk_set, int t_query) {
  Tape& tape = p.tape();
  const int length = dims.walk_length;
  const auto n_walks = walks.size();
  if (n_walks == 0) throw ContractError("no walks to encode");

  // Nodes and distinct hyperedges on non-padded positions.
  std::vector<int> nodes;
  for (const auto* w : walks) {
    if (static_cast<int>(w->steps.size()) != length)
      throw ContractError("walk length " + std::to_string(w->steps.size()) + " does not match model");
    for (int i = 0; i < w->first_padded; ++i)
      nodes.insert(nodes.end(), w->steps[i].edge.begin(), w->steps[i].edge.end());
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  double total_walks = 0.0;
  for (const auto& [anchor, list] : walk_set) total_walks += static_cast<double>(list.size());
  if (total_walks == 0.0) total_walks = 1.0;

  Tensor counts(std::max<std::size_t>(nodes.size(), 1), length);
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const auto c = positional_counts(walk_set, nodes[r], length);
    for (int i = 0; i < length; ++i) counts(r, i) = c[i] / total_walks;
  }
  const Var node_enc = mlp2(p, "node", tape.constant(std::move(counts)));

  std::unordered_map<graph::NodeSet, int, VectorHash> edge_row;
  std::vector<int> member_rows;
  std::vector<std::vector<int>> segments;
  std::vector<int> token_edge(n_walks * length, 0);
  Tensor dt(n_walks * length, 1);
  Tensor mask(n_walks * length, dims.d_model());
  std::vector<std::vector<int>> walk_segments(n_walks);
  for (std::size_t w = 0; w < n_walks; ++w) {
    for (int i = 0; i < walks[w]->first_padded; ++i) {
      const auto& step = walks[w]->steps[i];
      auto [it, inserted] = edge_row.try_emplace(step.edge, static_cast<int>(segments.size()));
      if (inserted) {
        std::vector<int> seg;
        for (int v : step.edge) {
          seg.push_back(static_cast<int>(member_rows.size()));
          member_rows.push_back(static_cast<int>(std::lower_bound(nodes.begin(), nodes.end(), v) - nodes.begin()));
        }
        segments.push_back(std::move(seg));
      }
      const auto row = w * length + i;
      token_edge[row] = it->second;
      dt(row, 0) = static_cast<double>(t_query - step.t);
      for (auto& m : mask.row_span(row)) m = 1.0;
      walk_segments[w].push_back(static_cast<int>(row));
    }
  }

  Var tokens;
  if (segments.empty()) {
    tokens = tape.constant(Tensor(n_walks * length, dims.d_model()));
  } else {
    const Var members = tensor::gather_rows(node_enc, member_rows);
    const Var edge_enc = set_mixer(p, "edge", members, segments);
    const Var edge_tokens = tensor::gather_rows(edge_enc, token_edge);
    const Var phase = tensor::add_row(tensor::matmul(tape.constant(std::move(dt)), p["time.omega"]), p["time.phase"]);
    const Var time_tokens = tensor::cos(phase);
    const Var parts[] = {edge_tokens, time_tokens};
    tokens = tensor::mul(tensor::concat_cols(parts), tape.constant(std::move(mask)));
  }

  Var x = tokens;
  for (int k = 0; k < dims.mixer_blocks; ++k) {
    const std::string prefix = "mixer." + std::to_string(k);
    const Var across = tensor::block_transpose(tensor::layer_norm(x), n_walks);
    const Var mixed = tensor::block_transpose(mlp2(p, prefix + ".tok", across), n_walks);
    x = tensor::add(x, mixed);
    x = tensor::add(x, mlp2(p, prefix + ".ch", tensor::layer_norm(x)));
  }
  return tensor::segment_mean(x, walk_segments, false);
}

}  // namespace

void ModelDims::validate() const {
  if (walk_length < 2) throw ConfigError("walk_length must be >= 2");
  if (d_pos < 1 || d_edge < 1 || d_time < 1) throw ConfigError("encoder widths must be >= 1");
  if (mixer_blocks < 0) throw ConfigError("mixer_blocks must be >= 0");
}

ScorerModel ScorerModel::initialize(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  ScorerModel model;
  model.dims = dims;
  model.seed = seed;
  Rng rng(derive_seed(seed, 0x6d6f64656cULL));
  auto& params = model.params;
  const int d = dims.d_model();
  add_mlp2(params, "node", dims.walk_length, dims.d_pos, dims.d_pos, rng);
  add_set_mixer(params, "edge", dims.d_pos, dims.d_edge, rng);
  Tensor omega(1, dims.d_time), phase(1, dims.d_time);
  for (int j = 0; j < dims.d_time; ++j)
    omega(0, j) = std::pow(10.0, -2.0 * j / std::max(1, dims.d_time - 1));
  params.emplace("time.omega", std::move(omega));
  params.emplace("time.phase", std::move(phase));
  for (int k = 0; k < dims.mixer_blocks; ++k) {
    const std::string prefix = "mixer." + std::to_string(k);
    add_mlp2(params, prefix + ".tok", dims.walk_length, dims.token_hidden(), dims.walk_length, rng);
    add_mlp2(params, prefix + ".ch", d, d, d, rng);
  }
  add_set_mixer(params, "psi", d, d, rng);
  add_mlp2(params, "head", d, d, 1, rng);
  return model;
}

std::size_t ScorerModel::expected_parameter_count(const ModelDims& dims) {
  const std::size_t d = dims.d_model();
  const std::size_t l = dims.walk_length;
  std::size_t n = mlp2_count(l, dims.d_pos, dims.d_pos);
  n += set_mixer_count(dims.d_pos, dims.d_edge);
  n += 2 * static_cast<std::size_t>(dims.d_time);
  n += dims.mixer_blocks * (mlp2_count(l, dims.token_hidden(), l) + mlp2_count(d, d, d));
  n += set_mixer_count(d, d);
  n += mlp2_count(d, d, 1);
  return n;
}

std::size_t ScorerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

bool ScorerModel::all_finite() const {
  return std::all_of(params.begin(), params.end(), [](const auto& kv) { return kv.second.all_finite(); });
}

BoundParams::BoundParams(Tape& tape, const ScorerModel& model, bool requires_grad) : tape_(&tape) {
  for (const auto& [name, t] : model.params)
    vars_.emplace(name, requires_grad ? tape.variable(t) : tape.constant(t));
}

Var BoundParams::operator[](const std::string& name) const {
  const auto it = vars_.find(name);
  if (it == vars_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

ParameterMap BoundParams::gradients() const {
  ParameterMap out;
  for (const auto& [name, v] : vars_) {
    const Tensor& g = tape_->grad(v.id);
    out.emplace(name, g.size() == v.value().size() ? g : Tensor(v.rows(), v.cols()));
  }
  return out;
}

std::vector<int> positional_counts(const walk::WalkSet& walk_set, int node, int walk_length) {
  std::vector<int> counts(walk_length, 0);
  for (const auto& [anchor, list] : walk_set) {
    for (const auto& w : list) {
      const int real = std::min<int>(w.first_padded, walk_length);
      for (int i = 0; i < real; ++i)
        counts[i] += std::find(w.steps[i].edge.begin(), w.steps[i].edge.end(), node) != w.steps[i].edge.end() ? 1 : 0;
    }
  }
  return counts;
}

std::vector<double> encode_time(double dt, std::span<const double> omega, std::span<const double> phase) {
  if (omega.size() != phase.size()) throw ShapeError("encode_time: omega and phase widths differ");
  std::vector<double> out(omega.size());
  for (std::size_t j = 0; j < omega.size(); ++j) out[j] = std::cos(omega[j] * dt + phase[j]);
  return out;
}

Var mlp2(const BoundParams& p, const std::string& prefix, Var x) {
  const Var h = tensor::gelu(tensor::add_row(tensor::matmul(x, p[prefix + ".l1.w"]), p[prefix + ".l1.b"]));
  return tensor::add_row(tensor::matmul(h, p[prefix + ".l2.w"]), p[prefix + ".l2.b"]);
}

Var set_mixer(const BoundParams& p, const std::string& prefix, Var x, const std::vector<std::vector<int>>& segments) {
  for (const auto& s : segments)
    if (s.empty()) throw ContractError("set_mixer over an empty set");
  const Var mixed = tensor::add(x, mlp2(p, prefix + ".ch", tensor::layer_norm(x)));
  const Var pooled = tensor::segment_mean(mixed, segments, true);
  return mlp2(p, prefix + ".out", pooled);
}

Tensor set_mixer(const ScorerModel& model, const std::string& prefix, const Tensor& x) {
  if (x.rows() == 0) throw ContractError("set_mixer over an empty set");
  Tape tape;
  const BoundParams p(tape, model, false);
  std::vector<int> all(x.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return set_mixer(p, prefix, tape.constant(x), {all}).value();
}

Var encode_walks(const BoundParams& p, const ModelDims& dims, const walk::WalkSet& walk_set, int t_query) {
  return encode_walk_rows(p, dims, layout(walk_set).walks, walk_set, t_query);
}

std::vector<double> encode_walk(const walk::BrainWalk& walk, const walk::WalkSet& walk_set, const ScorerModel& model,
                                int t_query) {
  Tape tape;
  const BoundParams p(tape, model, false);
  const Var enc = encode_walk_rows(p, model.dims, {&walk}, walk_set, t_query);
  const auto row = enc.value().row_span(0);
  return {row.begin(), row.end()};
}

Var score_logit(const BoundParams& p, const ModelDims& dims, const walk::WalkSet& walk_set, int t_query) {
  const auto lay = layout(walk_set);
  const Var walk_enc = encode_walk_rows(p, dims, lay.walks, walk_set, t_query);
  std::vector<std::vector<int>> per_anchor(walk_set.size());
  for (std::size_t w = 0; w < lay.walks.size(); ++w) per_anchor[lay.anchor_of_walk[w]].push_back(static_cast<int>(w));
  const Var anchor_enc = tensor::segment_mean(walk_enc, per_anchor, false);
  std::vector<int> members(walk_set.size());
  for (std::size_t i = 0; i < members.size(); ++i) members[i] = static_cast<int>(i);
  const Var z = set_mixer(p, "psi", anchor_enc, {members});
  return mlp2(p, "head", tensor::gelu(z));
}

double anomaly_score(const graph::NodeSet& query_edge, int query_t, const graph::TemporalHypergraph& g,
                     const ScorerModel& model, const walk::WalkConfig& cfg) {
  if (cfg.walk_length != model.dims.walk_length)
    throw ConfigError("walk config length " + std::to_string(cfg.walk_length) + " differs from model length " +
                      std::to_string(model.dims.walk_length));
  const auto walks = walk::sample_walk_set(g, query_edge, query_t, cfg);
  Tape tape;
  const BoundParams p(tape, model, false);
  return tensor::sigmoid(score_logit(p, model.dims, walks, query_t)).value().item();
}

}  // namespace hyperbrain::encoder
