#pragma once

#include "sgc/vocab.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sgc {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Item table: dense indices in file order, external ids unique.
struct Catalog {
  std::vector<std::string> external_ids;
  std::vector<std::string> titles;
  std::vector<std::vector<std::uint32_t>> title_tokens;  // filled by tokenize_catalog
  std::unordered_map<std::string, std::uint32_t> index_of;

  std::uint32_t size() const { return static_cast<std::uint32_t>(external_ids.size()); }
};

struct ClickRecord {
  std::uint32_t query = 0;
  std::uint32_t item = 0;
  std::uint64_t count = 0;

  friend bool operator==(const ClickRecord&, const ClickRecord&) = default;
};

// Aggregated click log: at most one record per (query, item) pair, plus the
// distinct-query table. After a train/eval split the query table is kept
// whole so indices stay aligned; frequencies reflect the surviving records.
struct ClickLog {
  std::vector<std::string> query_texts;
  std::vector<std::vector<std::uint32_t>> query_tokens;  // filled by tokenize_log
  std::vector<std::uint64_t> query_freq;
  std::unordered_map<std::string, std::uint32_t> query_index;
  std::vector<ClickRecord> records;
  std::uint64_t dropped_rows = 0;  // rows referencing unknown items

  std::uint32_t num_queries() const { return static_cast<std::uint32_t>(query_texts.size()); }
};

struct EvalPair {
  std::uint32_t query = 0;
  std::uint32_t item = 0;

  friend bool operator==(const EvalPair&, const EvalPair&) = default;
};

struct TrainEvalSplit {
  ClickLog train;
  std::vector<EvalPair> eval_pairs;
};

// Tab-separated `external_id<TAB>title`; duplicate ids and malformed rows
// raise ParseError naming the line.
Catalog parse_catalog(const std::filesystem::path& path);

// Tab-separated `query_text<TAB>external_item_id<TAB>count`. Rows naming
// unknown items are dropped and counted; duplicate (query, item) rows are
// summed. count must parse as a positive integer.
ClickLog parse_clicks(const std::filesystem::path& path, const Catalog& catalog,
                      const Vocab& vocab);

// First column of a clicks file, one entry per row; used to build the vocab
// before parse_clicks needs it.
std::vector<std::string> read_click_query_texts(const std::filesystem::path& path);

void tokenize_catalog(Catalog& catalog, const Vocab& vocab);
void tokenize_log(ClickLog& log, const Vocab& vocab);

void write_catalog(const Catalog& catalog, const std::filesystem::path& path);
void write_clicks(const ClickLog& log, const Catalog& catalog, const std::filesystem::path& path);

struct SyntheticConfig {
  std::uint32_t n_clusters = 20;
  std::uint32_t n_queries = 2000;
  std::uint32_t n_items = 1000;
  std::uint64_t n_clicks = 100000;
  double zipf_s = 1.1;
  double noise_eps = 0.1;
  std::uint64_t seed = 42;
};

struct SyntheticData {
  Catalog catalog;
  ClickLog log;
};

// Clustered two-token corpus with Zipf query popularity: each click picks a
// query by Zipf rank, then an item uniformly from the query's cluster with
// probability 1 - noise_eps, otherwise uniformly from the whole catalog.
SyntheticData generate_synthetic(const SyntheticConfig& cfg);

// Shuffles records with the seeded stream and holds out
// floor(eval_fraction * n) of them as eval positives (one event each); the
// rest form the training log in their original order.
TrainEvalSplit split_train_eval(const ClickLog& log, double eval_fraction, std::uint64_t seed);

// Cluster id used by the synthetic generator (round-robin assignment).
inline std::uint32_t synthetic_cluster(std::uint32_t index, std::uint32_t n_clusters) {
  return index % n_clusters;
}

}  // namespace sgc
