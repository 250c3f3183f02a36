#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sgc/model.hpp"

#include <cmath>

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

template <class S>
Mat<S> table_from_rows(std::vector<std::vector<S>> rows) {
  Mat<S> table(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) table(r, c) = rows[r][c];
  return table;
}

}  // namespace

TEST_CASE("base_embedding averages token rows") {
  const auto table = table_from_rows<double>({{0, 0}, {1, 0}, {0, 1}});
  const std::vector<std::uint32_t> two{1, 2};
  const Vec<double> h = base_embedding<double>(two, table);
  CHECK(h[0] == 0.5);
  CHECK(h[1] == 0.5);

  const std::vector<std::uint32_t> one{2};
  CHECK((base_embedding<double>(one, table) - table.row(2).transpose()).norm() == 0.0);

  const std::vector<std::uint32_t> none;
  CHECK(base_embedding<double>(none, table).isZero(0.0));
}

TEST_CASE("attention_weights") {
  SUBCASE("identical neighbors give uniform weights") {
    Vec<double> h_v(2);
    h_v << 0.3, -0.1;
    Cols<double> nb(2, 3);
    nb << 1.0, 1.0, 1.0, 0.5, 0.5, 0.5;
    Vec<double> w = Vec<double>::Random(4);
    const auto alpha = attention_weights(h_v, nb, w, 0.2);
    for (int i = 0; i < 3; ++i) CHECK(alpha[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }
  SUBCASE("zero attention vector gives uniform weights") {
    Vec<double> h_v = Vec<double>::Random(3);
    Cols<double> nb = Cols<double>::Random(3, 4);
    const Vec<double> zero_w = Vec<double>::Zero(6);
    const auto alpha = attention_weights(h_v, nb, zero_w, 0.2);
    for (int i = 0; i < 4; ++i) CHECK(alpha[i] == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("two-neighbor example against an independent softmax") {
    Vec<double> h_v(2);
    h_v << 0.0, 0.0;
    Cols<double> nb(2, 2);
    nb << 1.0, -1.0, 0.0, 0.0;
    Vec<double> w(4);
    w << 0.0, 0.0, 1.0, 0.0;
    const auto alpha = attention_weights(h_v, nb, w, 0.2);
    // logits: LeakyReLU(1) = 1, LeakyReLU(-1) = -0.2
    const double e1 = std::exp(1.0), e2 = std::exp(-0.2);
    CHECK(alpha[0] == doctest::Approx(e1 / (e1 + e2)).epsilon(1e-12));
    CHECK(alpha[1] == doctest::Approx(e2 / (e1 + e2)).epsilon(1e-12));
    CHECK(alpha[0] == doctest::Approx(0.7685).epsilon(1e-4));
    CHECK(alpha[1] == doctest::Approx(0.2315).epsilon(1e-4));
  }
}

TEST_CASE("softmax normalization and shift invariance") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_below(8));
    Vec<double> logits(n);
    for (int i = 0; i < n; ++i) logits[i] = rng.next_uniform(-30, 30);
    const auto p = softmax(logits);
    CHECK(std::abs(p.sum() - 1.0) <= 1e-6);

    Vec<double> shifted = logits;
    shifted.array() += rng.next_uniform(-100, 100);
    const auto q = softmax(shifted);
    for (int i = 0; i < n; ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
  }
}

TEST_CASE("aggregate is the weighted neighbor sum") {
  Cols<double> nb(2, 2);
  nb << 2.0, 0.0, 0.0, 2.0;
  Vec<double> alpha(2);
  alpha << 0.5, 0.5;
  const Vec<double> h = aggregate(nb, alpha);
  CHECK(h[0] == 1.0);
  CHECK(h[1] == 1.0);

  Vec<double> one(1);
  one << 1.0;
  Cols<double> single = nb.leftCols(1);
  CHECK((aggregate(single, one) - single.col(0)).norm() == 0.0);

  // linear in the neighbor vectors
  Cols<double> doubled = 2.0 * nb;
  CHECK((aggregate(doubled, alpha) - 2.0 * aggregate(nb, alpha)).norm() == 0.0);
}

TEST_CASE("mean_weights") {
  CHECK(mean_weights<double>(1)[0] == 1.0);
  CHECK(mean_weights<double>(1).size() == 1);
  const auto quarter = mean_weights<double>(4);
  for (int i = 0; i < 4; ++i) CHECK(quarter[i] == 0.25);
  const auto half = mean_weights<double>(2);
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);
  CHECK_THROWS_AS(mean_weights<double>(0), std::invalid_argument);
}

TEST_CASE("forward") {
  // q0 -- i0 (w 2), q0 -- i1 (w 1); tokens: q0 -> {1}, i0 -> {2}, i1 -> {3}
  const auto log = log_from_records({{0, 0, 2}, {0, 1, 1}}, 1);
  const auto graph = build_graph(log);
  std::vector<std::vector<std::uint32_t>> qt{{1}};
  std::vector<std::vector<std::uint32_t>> it{{2}, {3}};
  const CorpusTokens texts{&qt, &it};

  ModelParams<double> params;
  params.dim = 2;
  params.variant = Variant::Mean;
  params.token_embeddings = table_from_rows<double>({{0, 0}, {1, 2}, {3, 4}, {5, 6}});

  SUBCASE("L=0 equals the base embedding exactly") {
    params.layers = 0;
    const auto tree = deterministic_tree(graph, query_node(0), 0, 10);
    const auto trace = forward(tree, params, texts);
    const auto h0 =
        base_embedding<double>(std::span<const std::uint32_t>(qt[0]), params.token_embeddings);
    CHECK((trace.target_embedding - h0).norm() == 0.0);
  }
  SUBCASE("L=1 single neighbor adds that neighbor's base embedding") {
    params.layers = 1;
    const auto tree = deterministic_tree(graph, query_node(0), 1, 1);  // only i0
    const auto trace = forward(tree, params, texts);
    Vec<double> expected(2);
    expected << 1 + 3, 2 + 4;
    CHECK((trace.target_embedding - expected).norm() == 0.0);
  }
  SUBCASE("attention with w = 0 reduces to the mean variant") {
    params.layers = 1;
    const auto tree = deterministic_tree(graph, query_node(0), 1, 10);
    ModelParams<double> attn = params;
    attn.variant = Variant::Attention;
    attn.attention = {Vec<double>::Zero(4)};
    const auto mean_z = forward(tree, params, texts).target_embedding;
    const auto attn_z = forward(tree, attn, texts).target_embedding;
    CHECK((mean_z - attn_z).lpNorm<Eigen::Infinity>() <= 1e-12);
    // h^1 = (h(i0) + h(i1)) / 2, z = h0 + h1
    Vec<double> expected(2);
    expected << 1 + 0.5 * (3 + 5), 2 + 0.5 * (4 + 6);
    CHECK((mean_z - expected).norm() == 0.0);
  }
  SUBCASE("depth mismatch is a contract violation") {
    params.layers = 2;
    const auto tree = deterministic_tree(graph, query_node(0), 1, 10);
    CHECK_THROWS_AS(forward(tree, params, texts), std::invalid_argument);
  }
  SUBCASE("isolated node degrades to its base embedding") {
    params.layers = 2;
    const auto log2 = log_from_records({{0, 0, 1}}, 2);  // q1 has no edges
    const auto graph2 = build_graph(log2);
    std::vector<std::vector<std::uint32_t>> qt2{{1}, {2}};
    std::vector<std::vector<std::uint32_t>> it2{{3}};
    const CorpusTokens texts2{&qt2, &it2};
    const auto tree = deterministic_tree(graph2, query_node(1), 2, 10);
    const auto trace = forward(tree, params, texts2);
    const auto h0 = base_embedding<double>(std::span<const std::uint32_t>(qt2[1]),
                                           params.token_embeddings);
    CHECK((trace.target_embedding - h0).norm() == 0.0);
  }
}

TEST_CASE("per-parent attention weights in a trace sum to one") {
  SyntheticConfig cfg;
  cfg.n_clusters = 3;
  cfg.n_queries = 12;
  cfg.n_items = 9;
  cfg.n_clicks = 300;
  auto data = generate_synthetic(cfg);
  const Vocab vocab = build_vocab([&] {
    std::vector<std::string> t = data.catalog.titles;
    t.insert(t.end(), data.log.query_texts.begin(), data.log.query_texts.end());
    return t;
  }(), 1);
  tokenize_catalog(data.catalog, vocab);
  tokenize_log(data.log, vocab);
  const auto graph = build_graph(data.log);
  const CorpusTokens texts{&data.log.query_tokens, &data.catalog.title_tokens};

  auto params = init_params<double>(vocab.size(), 4, 2, Variant::Attention, 99);
  Rng rng(5);
  const auto tree = sample_tree(graph, query_node(0), 2, 3, rng);
  const auto trace = forward(tree, params, texts);
  for (const auto& per_layer : trace.alphas)
    for (const auto& alpha : per_layer)
      if (alpha.size() > 0) CHECK(std::abs(alpha.sum() - 1.0) <= 1e-6);
}

TEST_CASE("mask variant: z_q is independent of tokens reachable only through the masked edge") {
  // q0's only link to i0 is the (q0, i0) edge; i0 carries unique token 4.
  const auto log = log_from_records({{0, 0, 5}, {0, 1, 3}, {1, 1, 2}}, 2);
  const auto graph = build_graph(log);
  std::vector<std::vector<std::uint32_t>> qt{{1}, {2}};
  std::vector<std::vector<std::uint32_t>> it{{4}, {3}};
  const CorpusTokens texts{&qt, &it};

  ModelParams<double> params;
  params.dim = 2;
  params.layers = 1;
  params.variant = Variant::Mask;
  params.attention = {Vec<double>::Ones(4)};
  params.token_embeddings =
      table_from_rows<double>({{0, 0}, {1, 2}, {3, 4}, {5, 6}, {7, 8}});

  const MaskEdge mask{0, 0};
  const auto tree = deterministic_tree(graph, query_node(0), 1, 10, mask);
  const auto before = forward(tree, params, texts).target_embedding;

  ModelParams<double> perturbed = params;
  perturbed.token_embeddings.row(4).array() += 17.5;  // i0's unique token
  const auto after = forward(tree, perturbed, texts).target_embedding;
  CHECK((before - after).norm() == 0.0);
}

TEST_CASE("score is the inner product") {
  Vec<float> a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  CHECK(score(a, b) == 0.0f);
  Vec<float> z(2);
  z << 3, 4;
  CHECK(score(z, z) == 25.0f);
  Vec<float> c(2), d(2);
  c << 1, 2;
  d << 2, 1;
  CHECK(score(c, d) == 4.0f);
  Vec<float> e(3);
  CHECK_THROWS_AS(score(z, e), std::invalid_argument);
}
