#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "hyperbrain/error.hpp"
#include "hyperbrain/hypergraph.hpp"
#include "hyperbrain/ingest.hpp"
#include "oracles.hpp"

using namespace hyperbrain;
using namespace hyperbrain::graph;
using ingest::Matrix;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

std::vector<NodeSet> node_sets(const std::vector<Hyperedge>& edges) {
  std::vector<NodeSet> out;
  for (const auto& e : edges) out.push_back(e.nodes);
  return out;
}

std::vector<std::vector<double>> random_window(std::mt19937_64& rng, int r, int l) {
  // A few shared latent factors make cliques of size > 2 likely.
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 2);
  std::vector<std::vector<double>> latent(3, std::vector<double>(l));
  for (auto& f : latent)
    for (double& v : f) v = n(rng);
  std::vector<std::vector<double>> rows(r, std::vector<double>(l));
  for (auto& row : rows) {
    const int f = pick(rng);
    for (int j = 0; j < l; ++j) row[j] = latent[f][j] + 0.8 * n(rng);
  }
  return rows;
}

}  // namespace

TEST_CASE("window_count") {
  CHECK(window_count(100, 30, 10) == 8);
  CHECK(window_count(30, 30, 7) == 1);
  CHECK(window_count(17, 5, 3) == 5);
  CHECK_THROWS_AS(window_count(10, 11, 1), ConfigError);
  CHECK_THROWS_AS(window_count(10, 5, 0), ConfigError);
}

TEST_CASE("pearson") {
  const std::vector<double> x{1, 2, 3};
  CHECK(pearson(x, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(x, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(pearson(x, std::vector<double>{1, 3, 2}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(pearson(x, std::vector<double>{4, 4, 4}), DegenerateSignal);
  CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), ContractError);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(25), b(25);
    for (int i = 0; i < 25; ++i) {
      a[i] = n(rng);
      b[i] = 0.5 * a[i] + n(rng);
    }
    CHECK(pearson(a, b) == doctest::Approx(*oracle::pearson(a, b)).epsilon(1e-13));
  }
}

TEST_CASE("identical triple plus independent node gives one hyperedge") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> shared(40), other(40);
  for (int i = 0; i < 40; ++i) {
    shared[i] = n(rng);
    other[i] = n(rng);
  }
  const std::vector<std::vector<double>> rows{shared, shared, shared, other};
  const auto edges = build_window_hypergraph(from_rows(rows), WindowConfig{}, 3);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].nodes == NodeSet{0, 1, 2});
  CHECK(edges[0].t == 3);
  CHECK(node_sets(edges) == oracle::window_hyperedges(rows, 90.0));
}

TEST_CASE("anti-correlated pair emits nothing, a strong pair emits itself") {
  const auto anti = from_rows({{1, 2, 3, 4}, {4, 3, 2, 1}});
  CHECK(build_window_hypergraph(anti, WindowConfig{}, 0).empty());

  std::vector<double> x{0.1, -0.4, 1.2, 0.7, -1.1, 0.3};
  std::vector<double> y{0.3, -0.2, 1.0, 1.1, -1.3, -0.2};
  REQUIRE(pearson(x, y) > 0.8);
  const auto edges = build_window_hypergraph(from_rows({x, y}), WindowConfig{}, 0);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].nodes == NodeSet{0, 1});
}

TEST_CASE("constant rows join no tie") {
  const auto m = from_rows({{1, 2, 3, 5}, {2, 4, 6, 9}, {7, 7, 7, 7}});
  const auto edges = build_window_hypergraph(m, WindowConfig{}, 0);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].nodes == NodeSet{0, 1});
}

TEST_CASE("nearest-rank percentile over positive values") {
  const std::vector<double> v{-0.5, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  CHECK(*positive_percentile(v, 90.0) == 0.9);
  CHECK(*positive_percentile(v, 50.0) == 0.5);
  CHECK(*positive_percentile(std::vector<double>{0.3}, 90.0) == 0.3);
  CHECK_FALSE(positive_percentile(std::vector<double>{-0.3, 0.0}, 90.0).has_value());
}

TEST_CASE("maximal cliques against brute force on random windows") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const int r = 2 + trial % 9;
    const auto rows = random_window(rng, r, 30);
    for (double p : {50.0, 75.0, 90.0}) {
      WindowConfig cfg;
      cfg.percentile = p;
      cfg.max_hyperedge_size = 10;
      CHECK(node_sets(build_window_hypergraph(from_rows(rows), cfg, 0)) == oracle::window_hyperedges(rows, p));
    }
  }
}

TEST_CASE("every pair inside an emitted edge satisfies the strong-tie predicate") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = from_rows(random_window(rng, 10, 30));
    const auto corr = correlation_matrix(m);
    WindowConfig cfg;
    cfg.percentile = 60;
    for (const auto& e : build_window_hypergraph(m, cfg, 0)) {
      for (std::size_t i = 0; i < e.nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < e.nodes.size(); ++j) {
          const int u = e.nodes[i], v = e.nodes[j];
          auto threshold = [&](int a) {
            std::vector<double> others;
            for (int b = 0; b < 10; ++b)
              if (b != a) others.push_back(corr(a, b));
            return *positive_percentile(others, cfg.percentile);
          };
          CHECK(corr(u, v) > 0);
          CHECK(corr(u, v) >= threshold(u));
          CHECK(corr(u, v) >= threshold(v));
        }
      }
    }
  }
}

TEST_CASE("raising the percentile never adds a strong tie") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto corr = correlation_matrix(from_rows(random_window(rng, 9, 25)));
    const auto low = strong_tie_graph(corr, 50.0);
    const auto high = strong_tie_graph(corr, 90.0);
    for (int u = 0; u < 9; ++u)
      for (int v = 0; v < 9; ++v)
        if (high[u][v]) CHECK(low[u][v]);
  }
}

TEST_CASE("oversized cliques decompose into the first 20 lexicographic subsets") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> shared(20);
  for (double& v : shared) v = n(rng);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 10; ++i) {
    auto row = shared;
    for (double& v : row) v += 1e-3 * n(rng);
    rows.push_back(row);
  }
  WindowConfig cfg;
  cfg.percentile = 10.0;
  cfg.max_hyperedge_size = 8;
  const auto edges = build_window_hypergraph(from_rows(rows), cfg, 0);
  // The single 10-clique has C(10,8) = 45 subsets; only the first 20 survive.
  std::vector<NodeSet> expected;
  for (int a = 0; a < 10; ++a)
    for (int b = a + 1; b < 10; ++b) {
      NodeSet s;
      for (int v = 0; v < 10; ++v)
        if (v != a && v != b) s.push_back(v);
      expected.push_back(s);
    }
  std::sort(expected.begin(), expected.end());
  expected.resize(20);
  CHECK(node_sets(edges) == expected);
}

TEST_CASE("temporal hypergraph construction") {
  ingest::CohortSpec spec;
  spec.n_subjects = 1;
  spec.n_rois = 10;
  spec.n_timepoints = 40;
  spec.n_communities = 2;
  const auto s = ingest::generate_cohort(spec).front();

  WindowConfig single;
  single.window_length = 40;
  const auto g1 = build_temporal_hypergraph(s, single);
  CHECK(g1.n_windows() == 1);
  for (const auto& e : g1.edges()) CHECK(e.t == 0);

  spec.n_timepoints = 400;
  const auto s2 = ingest::generate_cohort(spec).front();
  const auto g = build_temporal_hypergraph(s2, WindowConfig{});
  CHECK(g.n_windows() == 19);
  const auto community = ingest::community_assignment(10, 2);
  int pure_windows = 0;
  for (int t = 0; t < g.n_windows(); ++t) {
    bool pure = true;
    for (const auto& e : g.edges()) {
      if (e.t != t) continue;
      for (int v : e.nodes) pure = pure && community[v] == community[e.nodes[0]];
    }
    pure_windows += pure;
  }
  CHECK(pure_windows >= 0.95 * g.n_windows());

  for (int v = 0; v < g.n_nodes(); ++v) {
    int prev_t = -1;
    for (const auto& entry : g.incident(v)) {
      const auto& e = g.edge(entry.edge);
      CHECK(std::binary_search(e.nodes.begin(), e.nodes.end(), v));
      CHECK(entry.t >= prev_t);
      prev_t = entry.t;
    }
  }
  std::size_t slots = 0, listed = 0;
  for (const auto& e : g.edges()) slots += e.nodes.size();
  for (int v = 0; v < g.n_nodes(); ++v) listed += g.incident(v).size();
  CHECK(slots == listed);
}

TEST_CASE("empty hypergraph is valid") {
  const TemporalHypergraph g(5, 3, {});
  CHECK(g.n_edges() == 0);
  for (int v = 0; v < 5; ++v) CHECK(g.incident(v).empty());
  CHECK_THROWS_AS(g.edge(0), IndexError);
}

TEST_CASE("hypergraph constructor rejects invalid edges") {
  CHECK_THROWS(TemporalHypergraph(3, 2, {{{0, 5}, 0}}));
  CHECK_THROWS(TemporalHypergraph(3, 2, {{{1, 0}, 0}}));
  CHECK_THROWS(TemporalHypergraph(3, 2, {{{1}, 0}}));
  CHECK_THROWS(TemporalHypergraph(3, 2, {{{0, 1}, 2}}));
}

TEST_CASE("temporal_neighbors small example") {
  // Sorted by (t, nodes): B={1,2}@0 -> 0, C={3,4}@0 -> 1, A={0,1}@1 -> 2.
  const TemporalHypergraph g(5, 2, {{{0, 1}, 1}, {{1, 2}, 0}, {{3, 4}, 0}});
  REQUIRE(g.edge(2).nodes == NodeSet{0, 1});
  const auto n = temporal_neighbors(g, 2, 1);
  REQUIRE(n.size() == 1);
  CHECK(n[0].edge == 0);
  CHECK(temporal_neighbors(g, 2, -1).empty());
  CHECK_THROWS_AS(temporal_neighbors(g, 7, 1), IndexError);
}

TEST_CASE("temporal_neighbors equals a brute-force scan") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> node(0, 19), time(0, 9), size(2, 4);
  std::vector<Hyperedge> edges;
  std::set<Hyperedge> seen;
  while (edges.size() < 200) {
    std::set<int> s;
    const int k = size(rng);
    while (static_cast<int>(s.size()) < k) s.insert(node(rng));
    Hyperedge e{NodeSet(s.begin(), s.end()), time(rng)};
    if (seen.insert(e).second) edges.push_back(e);
  }
  const TemporalHypergraph g(20, 10, edges);
  for (int id = 0; id < 200; ++id) {
    for (int t_max : {0, 4, 9}) {
      std::vector<IndexEntry> expected;
      const auto& q = g.edge(id);
      for (int other = 0; other < 200; ++other) {
        const auto& e = g.edge(other);
        if (other == id || e.t > t_max) continue;
        bool shares = false;
        for (int v : e.nodes) shares = shares || std::binary_search(q.nodes.begin(), q.nodes.end(), v);
        if (shares) expected.push_back({other, e.t});
      }
      std::sort(expected.begin(), expected.end(),
                [](const IndexEntry& a, const IndexEntry& b) { return std::pair(a.t, a.edge) < std::pair(b.t, b.edge); });
      CHECK(temporal_neighbors(g, id, t_max) == expected);
    }
  }
}

TEST_CASE("hypergraph JSONL round trip") {
  const TemporalHypergraph g(6, 3, {{{0, 1, 2}, 2}, {{3, 4}, 0}, {{0, 5}, 1}, {{3, 4}, 1}});
  const auto path = std::filesystem::temp_directory_path() / "hyperbrain_graph_roundtrip.jsonl";
  save_hypergraph(g, path);
  const auto back = load_hypergraph(path);
  CHECK(back.n_nodes() == 6);
  CHECK(back.n_windows() == 3);
  CHECK(back.edges() == g.edges());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == R"({"n_nodes":6,"n_windows":3})");
}
