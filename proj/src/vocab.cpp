#include "sgc/vocab.hpp"

#include <algorithm>
#include <cctype>

namespace sgc {

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) {
        out.push_back(std::move(current));
        current.clear();
      }
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<std::uint32_t> tokenize(std::string_view text, const Vocab& vocab) {
  std::vector<std::uint32_t> ids;
  for (const auto& tok : split_tokens(text)) ids.push_back(vocab.id_of(tok));
  return ids;
}

Vocab build_vocab(const std::vector<std::string>& texts, std::uint64_t min_count) {
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& text : texts)
    for (auto& tok : split_tokens(text)) ++freq[std::move(tok)];

  std::vector<std::pair<std::string, std::uint64_t>> kept;
  kept.reserve(freq.size());
  for (auto& [tok, n] : freq)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab vocab;
  vocab.tokens.reserve(kept.size() + 1);
  vocab.counts.reserve(kept.size() + 1);
  vocab.tokens.emplace_back();  // OOV slot
  vocab.counts.push_back(0);
  for (auto& [tok, n] : kept) {
    vocab.ids.emplace(tok, vocab.size());
    vocab.tokens.push_back(std::move(tok));
    vocab.counts.push_back(n);
  }
  return vocab;
}

}  // namespace sgc
