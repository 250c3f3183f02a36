#include "sgc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace sgc {

Mat<float> embed_all_items(const ModelParams<float>& params, const BipartiteGraph& graph,
                           const EvalData& data, int fanout) {
  const auto n = data.catalog->size();
  const CorpusTokens texts = data.tokens();
  Mat<float> out(n, params.dim);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto tree = deterministic_tree(graph, item_node(i), params.layers, fanout);
    out.row(i) = forward(tree, params, texts).target_embedding.transpose();
  }
  return out;
}

Vec<float> embed_query_node(const ModelParams<float>& params, const BipartiteGraph& graph,
                            const EvalData& data, std::uint32_t query, int fanout) {
  const CorpusTokens texts = data.tokens();
  auto tree = deterministic_tree(graph, query_node(query), params.layers, fanout);
  return forward(tree, params, texts).target_embedding;
}

namespace {

// Uniform without replacement from [0, n_items) minus the positive. Falls
// back to every other item when the catalog is too small.
std::vector<std::uint32_t> sample_pool(std::uint32_t n_items, std::uint32_t positive,
                                       int pool_size, Rng& rng) {
  std::vector<std::uint32_t> pool;
  if (n_items <= static_cast<std::uint32_t>(pool_size) + 1) {
    pool.reserve(n_items - 1);
    for (std::uint32_t i = 0; i < n_items; ++i)
      if (i != positive) pool.push_back(i);
    return pool;
  }
  pool.reserve(pool_size);
  std::vector<bool> taken(n_items, false);
  taken[positive] = true;
  while (pool.size() < static_cast<std::size_t>(pool_size)) {
    const auto i = static_cast<std::uint32_t>(rng.next_below(n_items));
    if (taken[i]) continue;
    taken[i] = true;
    pool.push_back(i);
  }
  return pool;
}

std::vector<PairOutcome> score_pairs_impl(const ModelParams<float>& params,
                                          const BipartiteGraph& graph, const EvalData& data,
                                          std::span<const EvalPair> pairs, int pool_size,
                                          int fanout, std::uint64_t pool_seed) {
  const Mat<float> item_z = embed_all_items(params, graph, data, fanout);
  std::unordered_map<std::uint32_t, Vec<float>> query_cache;

  std::vector<PairOutcome> outcomes;
  outcomes.reserve(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pair = pairs[p];
    auto it = query_cache.find(pair.query);
    if (it == query_cache.end())
      it = query_cache.emplace(pair.query,
                               embed_query_node(params, graph, data, pair.query, fanout))
               .first;
    const Vec<float>& z_q = it->second;
    const float s_pos = z_q.dot(item_z.row(pair.item).transpose());

    Rng pool_rng(mix_seed(pool_seed, p));
    const auto pool = sample_pool(data.catalog->size(), pair.item, pool_size, pool_rng);

    PairOutcome o;
    o.query = pair.query;
    o.pool = static_cast<std::uint32_t>(pool.size());
    for (std::uint32_t neg : pool) {
      const float s_neg = z_q.dot(item_z.row(neg).transpose());
      if (s_neg > s_pos)
        ++o.greater;
      else if (s_neg == s_pos)
        ++o.ties;
    }
    outcomes.push_back(o);
  }
  return outcomes;
}

}  // namespace

std::vector<PairOutcome> score_eval_pairs(const ModelParams<float>& params,
                                          const BipartiteGraph& graph, const EvalData& data,
                                          std::span<const EvalPair> pairs,
                                          const EvalConfig& cfg) {
  return score_pairs_impl(params, graph, data, pairs, cfg.pool_size, cfg.fanout, cfg.pool_seed);
}

std::vector<double> topk_accuracy(const ModelParams<float>& params, const BipartiteGraph& graph,
                                  const EvalData& data, std::span<const EvalPair> pairs,
                                  int pool_size, std::span<const int> k_list,
                                  std::uint64_t pool_seed, int fanout) {
  for (int k : k_list)
    if (pool_size < k) throw std::invalid_argument("pool_size must be >= max(k_list)");
  const auto outcomes = score_pairs_impl(params, graph, data, pairs, pool_size, fanout, pool_seed);
  std::vector<double> fractions;
  fractions.reserve(k_list.size());
  for (int k : k_list) {
    std::uint64_t hits = 0;
    for (const auto& o : outcomes) hits += o.rank() <= static_cast<std::uint32_t>(k);
    fractions.push_back(outcomes.empty() ? 0.0
                                         : static_cast<double>(hits) / outcomes.size());
  }
  return fractions;
}

double pairwise_auc(const std::vector<std::pair<float, std::vector<float>>>& pools) {
  std::uint64_t wins2 = 0, total = 0;
  for (const auto& [pos, negs] : pools) {
    for (float neg : negs) {
      if (pos > neg)
        wins2 += 2;
      else if (pos == neg)
        wins2 += 1;
    }
    total += negs.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(wins2) / (2.0 * static_cast<double>(total));
}

double auc(const ModelParams<float>& params, const BipartiteGraph& graph, const EvalData& data,
           std::span<const EvalPair> pairs, int negatives_per_pos, std::uint64_t pool_seed,
           int fanout) {
  const auto outcomes =
      score_pairs_impl(params, graph, data, pairs, negatives_per_pos, fanout, pool_seed);
  std::uint64_t wins2 = 0, total = 0;
  for (const auto& o : outcomes) {
    wins2 += 2ull * (o.pool - o.greater - o.ties) + o.ties;
    total += o.pool;
  }
  return total == 0 ? 0.0 : static_cast<double>(wins2) / (2.0 * static_cast<double>(total));
}

std::vector<Bucket> bucket_queries(const ClickLog& train_log) {
  const auto n = train_log.num_queries();
  std::vector<std::uint32_t> order;
  order.reserve(n);
  std::uint64_t total = 0;
  for (std::uint32_t q = 0; q < n; ++q) {
    if (train_log.query_freq[q] > 0) order.push_back(q);
    total += train_log.query_freq[q];
  }
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (train_log.query_freq[a] != train_log.query_freq[b])
      return train_log.query_freq[a] > train_log.query_freq[b];
    return a < b;
  });

  std::vector<Bucket> buckets(n, Bucket::Tail);
  std::uint64_t cum = 0;
  Bucket current = Bucket::Head;
  for (std::uint32_t q : order) {
    buckets[q] = current;
    cum += train_log.query_freq[q];
    // Integer form of cum >= total/3 and cum >= 2*total/3.
    if (current == Bucket::Head && 3 * cum >= total)
      current = Bucket::Torso;
    else if (current == Bucket::Torso && 3 * cum >= 2 * total)
      current = Bucket::Tail;
  }
  return buckets;
}

double error_reduction_rate(double base_top1_pct, double new_top1_pct) {
  if (base_top1_pct < 0.0 || base_top1_pct >= 100.0)
    throw std::invalid_argument("base top-1 must lie in [0, 100)");
  return 100.0 * (new_top1_pct - base_top1_pct) / (100.0 - base_top1_pct);
}

namespace {

struct Tally {
  std::uint64_t pairs = 0;
  std::uint64_t top1 = 0;
  std::uint64_t top10 = 0;
  std::uint64_t auc_wins2 = 0;
  std::uint64_t auc_total = 0;
  std::array<BucketStats, 3> buckets{};
};

Tally tally_outcomes(const std::vector<PairOutcome>& outcomes,
                     const std::vector<Bucket>& query_buckets) {
  Tally t;
  for (const auto& o : outcomes) {
    ++t.pairs;
    const bool hit1 = o.rank() <= 1;
    t.top1 += hit1;
    t.top10 += o.rank() <= 10;
    t.auc_wins2 += 2ull * (o.pool - o.greater - o.ties) + o.ties;
    t.auc_total += o.pool;
    const Bucket b =
        o.query < query_buckets.size() ? query_buckets[o.query] : Bucket::Tail;
    auto& bs = t.buckets[static_cast<int>(b)];
    ++bs.pairs;
    bs.top1_hits += hit1;
  }
  for (auto& bs : t.buckets) bs.top1 = bs.pairs ? static_cast<double>(bs.top1_hits) / bs.pairs : 0.0;
  return t;
}

}  // namespace

EvalReport evaluate(const ModelParams<float>& params, const ModelParams<float>* baseline,
                    const BipartiteGraph& graph, const ClickLog& train_log,
                    const Catalog& catalog, std::span<const EvalPair> pairs,
                    const EvalConfig& cfg) {
  if (pairs.empty()) throw std::invalid_argument("evaluate: empty eval set");
  const EvalData data{&train_log, &catalog};
  const auto query_buckets = bucket_queries(train_log);

  const auto outcomes = score_eval_pairs(params, graph, data, pairs, cfg);
  const Tally t = tally_outcomes(outcomes, query_buckets);

  EvalReport report;
  report.pairs = t.pairs;
  report.top1 = static_cast<double>(t.top1) / t.pairs;
  report.top10 = static_cast<double>(t.top10) / t.pairs;
  report.auc = t.auc_total ? static_cast<double>(t.auc_wins2) / (2.0 * t.auc_total) : 0.0;
  report.buckets = t.buckets;

  if (baseline) {
    const auto base_outcomes = score_eval_pairs(*baseline, graph, data, pairs, cfg);
    const Tally bt = tally_outcomes(base_outcomes, query_buckets);
    report.has_baseline = true;
    report.base_top1 = static_cast<double>(bt.top1) / bt.pairs;
    report.base_top10 = static_cast<double>(bt.top10) / bt.pairs;
    report.base_auc = bt.auc_total ? static_cast<double>(bt.auc_wins2) / (2.0 * bt.auc_total)
                                   : 0.0;
    if (report.base_top1 < 1.0)
      report.err_reduction = error_reduction_rate(100.0 * report.base_top1, 100.0 * report.top1);
    for (int b = 0; b < 3; ++b) {
      report.base_bucket_top1[b] = bt.buckets[b].top1;
      if (bt.buckets[b].pairs > 0 && bt.buckets[b].top1 < 1.0)
        report.bucket_err_reduction[b] = error_reduction_rate(100.0 * bt.buckets[b].top1,
                                                              100.0 * report.buckets[b].top1);
    }
  }
  return report;
}

std::string render_report(const EvalReport& report) {
  std::ostringstream out;
  char buf[160];
  auto line = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof(buf), fmt, args...);
    out << buf;
  };

  out << "metric\tvalue\n";
  line("top1\t%.6f\n", report.top1);
  line("top10\t%.6f\n", report.top10);
  line("auc\t%.6f\n", report.auc);
  if (report.sec_per_step) line("sec_per_step\t%.6f\n", *report.sec_per_step);
  out << "\n";

  if (report.has_baseline)
    out << "bucket\tpairs\ttop1\tbase_top1\terr_reduction_pct\n";
  else
    out << "bucket\tpairs\ttop1\n";
  for (int b = 0; b < 3; ++b) {
    const auto& bs = report.buckets[b];
    if (report.has_baseline) {
      line("%s\t%llu\t%.6f\t%.6f\t", to_string(static_cast<Bucket>(b)),
           static_cast<unsigned long long>(bs.pairs), bs.top1, report.base_bucket_top1[b]);
      if (report.bucket_err_reduction[b])
        line("%.6f\n", *report.bucket_err_reduction[b]);
      else
        out << "n/a\n";
    } else {
      line("%s\t%llu\t%.6f\n", to_string(static_cast<Bucket>(b)),
           static_cast<unsigned long long>(bs.pairs), bs.top1);
    }
  }
  out << "\n";

  line("pairs=%llu\n", static_cast<unsigned long long>(report.pairs));
  line("top1=%.6f\n", report.top1);
  line("top10=%.6f\n", report.top10);
  line("auc=%.6f\n", report.auc);
  if (report.sec_per_step) line("sec_per_step=%.6f\n", *report.sec_per_step);
  for (int b = 0; b < 3; ++b) {
    const char* name = to_string(static_cast<Bucket>(b));
    line("%s_pairs=%llu\n", name, static_cast<unsigned long long>(report.buckets[b].pairs));
    line("%s_top1=%.6f\n", name, report.buckets[b].top1);
  }
  if (report.has_baseline) {
    line("base_top1=%.6f\n", report.base_top1);
    line("base_top10=%.6f\n", report.base_top10);
    line("base_auc=%.6f\n", report.base_auc);
    if (report.err_reduction) line("err_reduction=%.6f\n", *report.err_reduction);
    for (int b = 0; b < 3; ++b) {
      const char* name = to_string(static_cast<Bucket>(b));
      line("%s_base_top1=%.6f\n", name, report.base_bucket_top1[b]);
      if (report.bucket_err_reduction[b])
        line("%s_err_reduction=%.6f\n", name, *report.bucket_err_reduction[b]);
    }
  }
  return out.str();
}

std::optional<double> mean_sec_per_step(const std::filesystem::path& metrics_log) {
  std::ifstream in(metrics_log);
  if (!in) return std::nullopt;
  double sum = 0.0;
  std::uint64_t n = 0;
  std::string linebuf;
  while (std::getline(in, linebuf)) {
    int epoch = 0;
    long long step = 0;
    double loss = 0.0, sec = 0.0;
    if (std::sscanf(linebuf.c_str(), "%d\t%lld\t%lf\t%lf", &epoch, &step, &loss, &sec) == 4) {
      sum += sec;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace sgc
