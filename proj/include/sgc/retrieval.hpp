#pragma once

#include "sgc/eval.hpp"
#include "sgc/model.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace sgc {

using Fingerprint = std::array<std::uint8_t, 32>;

// Precomputed item embeddings for brute-force inner-product retrieval.
struct ItemIndex {
  Mat<float> embeddings;  // one row per catalog item
  std::vector<std::string> external_ids;
  Fingerprint fingerprint{};

  std::uint32_t size() const { return static_cast<std::uint32_t>(embeddings.rows()); }
  int dim() const { return static_cast<int>(embeddings.cols()); }
};

struct SearchResult {
  std::string external_id;
  float score = 0.0f;
};

// SHA-256 over the concatenated file contents; identifies the checkpoint
// and graph an index was built from.
Fingerprint fingerprint_files(const std::vector<std::filesystem::path>& paths);

// Deterministic item embeddings (top-weight neighborhoods, no masking).
ItemIndex build_index(const ModelParams<float>& params, const BipartiteGraph& graph,
                      const Catalog& catalog, const ClickLog& log, const Vocab& vocab,
                      int fanout, const Fingerprint& fingerprint);

// Embeds the query (known query node -> graph neighborhoods, unseen text ->
// token-bag embedding) and scans the whole index. Results sorted by score
// descending, ties by external id ascending.
std::vector<SearchResult> search(const ItemIndex& index, const ModelParams<float>& params,
                                 const BipartiteGraph& graph, const ClickLog& log,
                                 const Catalog& catalog, const Vocab& vocab,
                                 const std::string& query_text, int topk, int fanout);

// Binary index file, magic "SGCI".
void save_index(const ItemIndex& index, const std::filesystem::path& path);
ItemIndex load_index(const std::filesystem::path& path);

}  // namespace sgc
