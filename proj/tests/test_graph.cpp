#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sgc/graph.hpp"

#include <cmath>
#include <map>
#include <set>

using namespace sgc;

namespace {

ClickLog log_from_records(std::vector<ClickRecord> records, std::uint32_t n_queries) {
  ClickLog log;
  for (std::uint32_t q = 0; q < n_queries; ++q) {
    log.query_texts.push_back("q" + std::to_string(q));
    log.query_index.emplace(log.query_texts.back(), q);
  }
  log.query_tokens.resize(n_queries);
  log.query_freq.assign(n_queries, 0);
  for (const auto& r : records) log.query_freq[r.query] += r.count;
  log.records = std::move(records);
  return log;
}

}  // namespace

TEST_CASE("build_graph populates both directions with weight-sorted lists") {
  const auto g = build_graph(log_from_records({{0, 0, 3}, {0, 1, 1}}, 1));
  CHECK(g.num_queries == 1);
  CHECK(g.num_items == 2);
  const auto n_q0 = g.query_to_item.neighbor_span(0);
  const auto w_q0 = g.query_to_item.weight_span(0);
  REQUIRE(n_q0.size() == 2);
  CHECK(n_q0[0] == 0);
  CHECK(w_q0[0] == 3.0f);
  CHECK(n_q0[1] == 1);
  CHECK(w_q0[1] == 1.0f);
  CHECK(g.item_to_query.neighbor_span(0).size() == 1);
  CHECK(g.item_to_query.weight_span(0)[0] == 3.0f);
  CHECK(g.item_to_query.weight_span(1)[0] == 1.0f);
}

TEST_CASE("build_graph single record and tie ordering") {
  const auto single = build_graph(log_from_records({{0, 0, 5}}, 1));
  CHECK(single.query_to_item.neighbor_span(0).size() == 1);
  CHECK(single.item_to_query.neighbor_span(0).size() == 1);

  const auto tied = build_graph(log_from_records({{0, 7, 2}, {0, 3, 2}}, 1));
  const auto n = tied.query_to_item.neighbor_span(0);
  REQUIRE(n.size() == 2);
  CHECK(n[0] == 3);
  CHECK(n[1] == 7);

  CHECK_THROWS_AS(build_graph(ClickLog{}), std::invalid_argument);
}

TEST_CASE("graph symmetry against a brute-force edge map") {
  std::vector<ClickRecord> records;
  Rng rng(123);
  for (int i = 0; i < 200; ++i)
    records.push_back({static_cast<std::uint32_t>(rng.next_below(17)),
                       static_cast<std::uint32_t>(rng.next_below(13)),
                       rng.next_below(9) + 1});
  // aggregate duplicates the brute-force way
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> edges;
  for (const auto& r : records) edges[{r.query, r.item}] += r.count;
  std::vector<ClickRecord> unique_records;
  for (const auto& [qi, c] : edges) unique_records.push_back({qi.first, qi.second, c});

  const auto g = build_graph(log_from_records(unique_records, 17));
  std::uint64_t seen = 0;
  for (std::uint32_t q = 0; q < g.num_queries; ++q) {
    const auto ns = g.query_to_item.neighbor_span(q);
    const auto ws = g.query_to_item.weight_span(q);
    for (std::size_t j = 0; j < ns.size(); ++j) {
      REQUIRE(edges.count({q, ns[j]}) == 1);
      CHECK(static_cast<float>(edges.at({q, ns[j]})) == ws[j]);
      // reverse direction holds the same weight
      const auto rev_ns = g.item_to_query.neighbor_span(ns[j]);
      const auto rev_ws = g.item_to_query.weight_span(ns[j]);
      bool found = false;
      for (std::size_t r = 0; r < rev_ns.size(); ++r)
        if (rev_ns[r] == q && rev_ws[r] == ws[j]) found = true;
      CHECK(found);
      ++seen;
    }
  }
  CHECK(seen == edges.size());
}

TEST_CASE("prune_neighbors keeps the heaviest entries with the id tie rule") {
  SUBCASE("60 weighted neighbors keep the top 50") {
    std::vector<ClickRecord> records;
    for (std::uint32_t i = 0; i < 60; ++i) records.push_back({0, i, i + 1});  // weights 1..60
    const auto g = build_graph(log_from_records(records, 1));
    const auto pruned = prune_neighbors(g, 50);
    const auto ws = pruned.query_to_item.weight_span(0);
    REQUIRE(ws.size() == 50);
    CHECK(ws.front() == 60.0f);
    CHECK(ws.back() == 11.0f);
    // original untouched
    CHECK(g.query_to_item.neighbor_span(0).size() == 60);
  }
  SUBCASE("under the cap is a no-op") {
    std::vector<ClickRecord> records;
    for (std::uint32_t i = 0; i < 10; ++i) records.push_back({0, i, 5});
    const auto g = build_graph(log_from_records(records, 1));
    const auto pruned = prune_neighbors(g, 50);
    CHECK(pruned.query_to_item.neighbors == g.query_to_item.neighbors);
  }
  SUBCASE("equal weights keep ascending indices") {
    std::vector<ClickRecord> records;
    for (std::uint32_t i = 0; i < 60; ++i) records.push_back({0, i, 7});
    const auto pruned = prune_neighbors(build_graph(log_from_records(records, 1)), 50);
    const auto ns = pruned.query_to_item.neighbor_span(0);
    REQUIRE(ns.size() == 50);
    for (std::uint32_t i = 0; i < 50; ++i) CHECK(ns[i] == i);
  }
  SUBCASE("idempotence") {
    std::vector<ClickRecord> records;
    Rng rng(5);
    for (std::uint32_t i = 0; i < 80; ++i) records.push_back({0, i, rng.next_below(20) + 1});
    const auto g = build_graph(log_from_records(records, 1));
    const auto once = prune_neighbors(g, 50);
    const auto twice = prune_neighbors(once, 50);
    CHECK(once.query_to_item.neighbors == twice.query_to_item.neighbors);
    CHECK(once.query_to_item.weights == twice.query_to_item.weights);
    CHECK(once.item_to_query.neighbors == twice.item_to_query.neighbors);
  }
}

TEST_CASE("sample_neighbors draws proportionally to weight") {
  // N = {a: w=3, b: w=1}
  const auto g = build_graph(log_from_records({{0, 0, 3}, {0, 1, 1}}, 1));
  Rng rng(42);
  int picked_a = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const auto s = sample_neighbors(g, query_node(0), 1, rng);
    REQUIRE(s.size() == 1);
    picked_a += s[0] == 0;
  }
  const double p = static_cast<double>(picked_a) / trials;
  CHECK(std::abs(p - 0.75) < 0.02);
}

TEST_CASE("sample_neighbors returns whole small lists and honors the mask") {
  const auto g = build_graph(log_from_records({{0, 0, 3}, {0, 1, 1}}, 1));
  Rng rng(1);
  CHECK(sample_neighbors(g, query_node(0), 5, rng) == std::vector<std::uint32_t>{0, 1});
  CHECK(sample_neighbors(g, query_node(0), 5, rng, MaskEdge{0, 0}) ==
        std::vector<std::uint32_t>{1});
  // item side: the mask removes the query
  CHECK(sample_neighbors(g, item_node(0), 5, rng, MaskEdge{0, 0}).empty());
  CHECK_THROWS_AS(sample_neighbors(g, query_node(0), 0, rng), std::invalid_argument);
}

TEST_CASE("first-draw distribution matches weights within 3 standard errors") {
  const auto g =
      build_graph(log_from_records({{0, 0, 5}, {0, 1, 3}, {0, 2, 2}}, 1));
  const double total = 10.0;
  const int trials = 10000;
  Rng rng(2024);
  std::map<std::uint32_t, int> counts;
  for (int t = 0; t < trials; ++t) {
    const auto s = sample_neighbors(g, query_node(0), 1, rng);
    REQUIRE(s.size() == 1);
    ++counts[s[0]];
  }
  const double weights[] = {5.0, 3.0, 2.0};
  for (std::uint32_t i = 0; i < 3; ++i) {
    const double p = weights[i] / total;
    const double se = std::sqrt(p * (1 - p) / trials);
    CHECK(std::abs(counts[i] / static_cast<double>(trials) - p) < 3 * se);
  }
}

TEST_CASE("sampling never leaves the neighbor list, with or without mask") {
  std::vector<ClickRecord> records;
  Rng build_rng(9);
  for (int i = 0; i < 60; ++i)
    records.push_back({static_cast<std::uint32_t>(build_rng.next_below(6)),
                       static_cast<std::uint32_t>(build_rng.next_below(8)),
                       build_rng.next_below(5) + 1});
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> agg;
  for (const auto& r : records) agg[{r.query, r.item}] += r.count;
  std::vector<ClickRecord> unique_records;
  for (const auto& [qi, c] : agg) unique_records.push_back({qi.first, qi.second, c});
  const auto g = build_graph(log_from_records(unique_records, 6));

  Rng rng(77);
  for (std::uint32_t q = 0; q < g.num_queries; ++q) {
    const auto ns = g.query_to_item.neighbor_span(q);
    const std::set<std::uint32_t> allowed(ns.begin(), ns.end());
    const MaskEdge mask{q, ns.empty() ? 0 : ns[0]};
    for (int t = 0; t < 50; ++t) {
      for (std::uint32_t n : sample_neighbors(g, query_node(q), 3, rng))
        CHECK(allowed.count(n) == 1);
      for (std::uint32_t n : sample_neighbors(g, query_node(q), 3, rng, mask))
        CHECK(n != mask.item);
    }
  }
}

TEST_CASE("deterministic_neighbors is top-k by weight") {
  const auto g = build_graph(log_from_records({{0, 0, 5}, {0, 1, 4}, {0, 2, 3}}, 1));
  CHECK(deterministic_neighbors(g, query_node(0), 2) == std::vector<std::uint32_t>{0, 1});
  CHECK(deterministic_neighbors(g, query_node(0), 9) == std::vector<std::uint32_t>{0, 1, 2});
  CHECK_THROWS_AS(deterministic_neighbors(g, query_node(0), 0), std::invalid_argument);
  // node with no edges
  const auto g2 = build_graph(log_from_records({{0, 0, 1}}, 2));
  CHECK(deterministic_neighbors(g2, query_node(1), 3).empty());
}

TEST_CASE("sample_tree structure") {
  const auto g = build_graph(log_from_records(
      {{0, 0, 3}, {0, 1, 2}, {1, 0, 1}, {1, 2, 4}, {2, 2, 2}}, 3));

  SUBCASE("depth 0 is the single target") {
    Rng rng(3);
    const auto tree = sample_tree(g, query_node(0), 0, 10, rng);
    CHECK(tree.nodes.size() == 1);
    CHECK(tree.depth == 0);
    CHECK(tree.target() == query_node(0));
  }
  SUBCASE("sides alternate by level") {
    Rng rng(3);
    const auto tree = sample_tree(g, query_node(0), 2, 10, rng);
    for (std::uint32_t n = 0; n < tree.nodes.size(); ++n) {
      const int level = tree.level_of(n);
      CHECK(tree.nodes[n].ref.side == (level % 2 == 0 ? Side::Query : Side::Item));
    }
  }
  SUBCASE("mask removes the pair edge at every level") {
    const MaskEdge mask{0, 0};
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      Rng rng(seed);
      const auto tree = sample_tree(g, query_node(0), 2, 10, rng, mask);
      for (std::uint32_t n = 0; n < tree.nodes.size(); ++n) {
        const auto& node = tree.nodes[n];
        if (node.parent < 0) continue;
        const auto& parent = tree.nodes[static_cast<std::uint32_t>(node.parent)];
        const bool is_masked_edge =
            (parent.ref == query_node(mask.query) && node.ref == item_node(mask.item)) ||
            (parent.ref == item_node(mask.item) && node.ref == query_node(mask.query));
        CHECK_FALSE(is_masked_edge);
      }
    }
  }
  SUBCASE("deterministic tree children ranges are consistent") {
    const auto tree = deterministic_tree(g, item_node(2), 2, 1);
    for (std::uint32_t n = 0; n < tree.nodes.size(); ++n) {
      const auto& node = tree.nodes[n];
      for (std::uint32_t c = node.child_begin; c < node.child_end; ++c)
        CHECK(tree.nodes[c].parent == static_cast<std::int32_t>(n));
    }
  }
}

TEST_CASE("graph file round trip") {
  std::vector<ClickRecord> records;
  Rng rng(31);
  for (int i = 0; i < 100; ++i)
    records.push_back({static_cast<std::uint32_t>(rng.next_below(9)),
                       static_cast<std::uint32_t>(rng.next_below(11)),
                       rng.next_below(50) + 1});
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> agg;
  for (const auto& r : records) agg[{r.query, r.item}] += r.count;
  std::vector<ClickRecord> unique_records;
  for (const auto& [qi, c] : agg) unique_records.push_back({qi.first, qi.second, c});
  const auto g = build_graph(log_from_records(unique_records, 9));

  const auto path = std::filesystem::temp_directory_path() / "sgc_graph_test.sgcg";
  save_graph(g, path);
  const auto loaded = load_graph(path);
  CHECK(loaded.num_queries == g.num_queries);
  CHECK(loaded.num_items == g.num_items);
  CHECK(loaded.query_to_item.offsets == g.query_to_item.offsets);
  CHECK(loaded.query_to_item.neighbors == g.query_to_item.neighbors);
  CHECK(loaded.query_to_item.weights == g.query_to_item.weights);
  CHECK(loaded.item_to_query.neighbors == g.item_to_query.neighbors);
}
