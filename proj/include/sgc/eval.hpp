#pragma once

#include "sgc/model.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sgc {

enum class Bucket : std::uint8_t { Head = 0, Torso = 1, Tail = 2 };

inline const char* to_string(Bucket b) {
  switch (b) {
    case Bucket::Head: return "head";
    case Bucket::Torso: return "torso";
    case Bucket::Tail: return "tail";
  }
  return "?";
}

// Everything an offline evaluation reads: tokens for both towers plus the
// catalog size for negative pools.
struct EvalData {
  const ClickLog* log = nullptr;      // query table aligned with the graph
  const Catalog* catalog = nullptr;

  CorpusTokens tokens() const { return {&log->query_tokens, &catalog->title_tokens}; }
};

struct EvalConfig {
  int pool_size = 100;
  int negatives_per_pos = 100;
  int fanout = 10;
  // Fixed by default so every model ranks against identical negative pools.
  std::uint64_t pool_seed = 0x0ff1cee5ULL;
};

// Counts for one eval pair against its negative pool.
struct PairOutcome {
  std::uint32_t query = 0;
  std::uint32_t pool = 0;
  std::uint32_t greater = 0;  // negatives strictly above the positive
  std::uint32_t ties = 0;

  // Mid-rank convention: ties contribute half, rounded down.
  std::uint32_t rank() const { return 1 + greater + ties / 2; }
};

// Deterministic item-side embeddings for every catalog item (top-weight
// neighborhoods, no masking). Items without click edges fall back to their
// base embedding.
Mat<float> embed_all_items(const ModelParams<float>& params, const BipartiteGraph& graph,
                           const EvalData& data, int fanout);

// Embedding of a known query node over the graph.
Vec<float> embed_query_node(const ModelParams<float>& params, const BipartiteGraph& graph,
                            const EvalData& data, std::uint32_t query, int fanout);

// Scores each pair's positive against a per-pair uniform pool (counter-based
// seed, so results do not depend on evaluation order).
std::vector<PairOutcome> score_eval_pairs(const ModelParams<float>& params,
                                          const BipartiteGraph& graph, const EvalData& data,
                                          std::span<const EvalPair> pairs,
                                          const EvalConfig& cfg);

// Fractions aligned with k_list: share of pairs whose mid-tie rank is <= k.
std::vector<double> topk_accuracy(const ModelParams<float>& params, const BipartiteGraph& graph,
                                  const EvalData& data, std::span<const EvalPair> pairs,
                                  int pool_size, std::span<const int> k_list,
                                  std::uint64_t pool_seed, int fanout = 10);

// AUC over all (positive, sampled negative) score pairs:
// [#(pos > neg) + 0.5 #(pos == neg)] / total.
double auc(const ModelParams<float>& params, const BipartiteGraph& graph, const EvalData& data,
           std::span<const EvalPair> pairs, int negatives_per_pos, std::uint64_t pool_seed,
           int fanout = 10);

// The same formula over explicit score pools; the eval op reduces to this.
double pairwise_auc(const std::vector<std::pair<float, std::vector<float>>>& pools);

// Frequency strata from the training log: queries sorted by frequency
// descending (ties by index), head = minimal prefix reaching 1/3 of the
// click volume, torso the next prefix reaching 2/3, tail the rest. Queries
// with no training clicks are tail.
std::vector<Bucket> bucket_queries(const ClickLog& train_log);

// 100 * (new - base) / (100 - base), inputs in percent. base must be < 100.
double error_reduction_rate(double base_top1_pct, double new_top1_pct);

struct BucketStats {
  std::uint64_t pairs = 0;
  std::uint64_t top1_hits = 0;
  double top1 = 0.0;
};

struct EvalReport {
  double top1 = 0.0;
  double top10 = 0.0;
  double auc = 0.0;
  std::uint64_t pairs = 0;
  std::optional<double> sec_per_step;
  std::array<BucketStats, 3> buckets;

  bool has_baseline = false;
  double base_top1 = 0.0;
  double base_top10 = 0.0;
  double base_auc = 0.0;
  std::array<double, 3> base_bucket_top1{};
  std::optional<double> err_reduction;                  // overall, percent
  std::array<std::optional<double>, 3> bucket_err_reduction{};
};

// Full offline report; when a baseline is given both models see identical
// negative pools and per-bucket error reduction rates are included.
EvalReport evaluate(const ModelParams<float>& params, const ModelParams<float>* baseline,
                    const BipartiteGraph& graph, const ClickLog& train_log,
                    const Catalog& catalog, std::span<const EvalPair> pairs,
                    const EvalConfig& cfg);

// Text table plus a machine-readable key=value block.
std::string render_report(const EvalReport& report);

// Mean of the sec_per_step column of a training metrics log.
std::optional<double> mean_sec_per_step(const std::filesystem::path& metrics_log);

}  // namespace sgc
