#include "sgc/retrieval.hpp"

#include "sgc/binio.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <numeric>

namespace sgc {

Fingerprint fingerprint_files(const std::vector<std::filesystem::path>& paths) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("cannot initialize SHA-256");
  }
  std::vector<char> buf(1 << 16);
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      EVP_MD_CTX_free(ctx);
      throw IoError("cannot open " + path.string());
    }
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      if (in.gcount() > 0)
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  Fingerprint out{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, out.data(), &len);
  EVP_MD_CTX_free(ctx);
  return out;
}

ItemIndex build_index(const ModelParams<float>& params, const BipartiteGraph& graph,
                      const Catalog& catalog, const ClickLog& log, const Vocab& vocab,
                      int fanout, const Fingerprint& fingerprint) {
  if (params.vocab_size() != vocab.size())
    throw std::invalid_argument("checkpoint vocab size does not match the provided vocab");
  for (const auto& tokens : catalog.title_tokens)
    for (std::uint32_t t : tokens)
      if (t >= params.vocab_size())
        throw std::invalid_argument("catalog token id exceeds the checkpoint vocab");

  ItemIndex index;
  const EvalData data{&log, &catalog};
  index.embeddings = embed_all_items(params, graph, data, fanout);
  index.external_ids = catalog.external_ids;
  index.fingerprint = fingerprint;
  return index;
}

std::vector<SearchResult> search(const ItemIndex& index, const ModelParams<float>& params,
                                 const BipartiteGraph& graph, const ClickLog& log,
                                 const Catalog& catalog, const Vocab& vocab,
                                 const std::string& query_text, int topk, int fanout) {
  if (topk < 1) throw std::invalid_argument("topk must be >= 1");
  if (index.dim() != params.dim)
    throw std::invalid_argument("index dimension does not match the checkpoint");

  // Known queries get graph neighborhoods; unseen text falls back to the
  // pure token-bag embedding.
  Vec<float> z_q;
  auto known = log.query_index.find(query_text);
  if (known == log.query_index.end()) {
    std::string normalized;
    for (const auto& tok : split_tokens(query_text)) {
      if (!normalized.empty()) normalized += ' ';
      normalized += tok;
    }
    known = log.query_index.find(normalized);
  }
  if (known != log.query_index.end()) {
    const EvalData data{&log, &catalog};
    z_q = embed_query_node(params, graph, data, known->second, fanout);
  } else {
    const auto tokens = tokenize(query_text, vocab);
    if (tokens.empty()) throw std::runtime_error("unembeddable query: no tokens");
    z_q = base_embedding<float>(tokens, params.token_embeddings);
  }

  Vec<float> scores = index.embeddings * z_q;
  std::vector<std::uint32_t> order(index.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return index.external_ids[a] < index.external_ids[b];
  });

  const auto n = std::min<std::size_t>(static_cast<std::size_t>(topk), order.size());
  std::vector<SearchResult> results;
  results.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    results.push_back({index.external_ids[order[i]], scores[order[i]]});
  return results;
}

namespace {

constexpr char kIndexMagic[5] = "SGCI";
constexpr std::uint32_t kIndexVersion = 1;

}  // namespace

void save_index(const ItemIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_magic(out, kIndexMagic);
  write_u32(out, kIndexVersion);
  write_u32(out, index.size());
  write_u32(out, static_cast<std::uint32_t>(index.dim()));
  for (std::uint32_t r = 0; r < index.size(); ++r)
    for (int c = 0; c < index.dim(); ++c) write_f32(out, index.embeddings(r, c));
  for (const auto& id : index.external_ids) write_string(out, id);
  out.write(reinterpret_cast<const char*>(index.fingerprint.data()),
            static_cast<std::streamsize>(index.fingerprint.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

ItemIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  expect_magic(in, kIndexMagic, "index");
  const auto version = read_u32(in);
  if (version != kIndexVersion)
    throw IoError("index format version " + std::to_string(version) + " is not supported");
  ItemIndex index;
  const auto n = read_u32(in);
  const auto d = read_u32(in);
  index.embeddings.resize(n, d);
  for (std::uint32_t r = 0; r < n; ++r)
    for (std::uint32_t c = 0; c < d; ++c) index.embeddings(r, c) = read_f32(in);
  index.external_ids.reserve(n);
  for (std::uint32_t r = 0; r < n; ++r) index.external_ids.push_back(read_string(in));
  in.read(reinterpret_cast<char*>(index.fingerprint.data()),
          static_cast<std::streamsize>(index.fingerprint.size()));
  if (in.gcount() != static_cast<std::streamsize>(index.fingerprint.size()))
    throw IoError("unexpected end of file");
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("index has trailing bytes");
  return index;
}

}  // namespace sgc
