#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sgc {

inline constexpr std::uint32_t kOovId = 0;

// Dense token table. Id 0 is reserved for out-of-vocabulary tokens and has
// no surface form; real tokens occupy [1, size()).
struct Vocab {
  std::vector<std::string> tokens;        // tokens[0] is the empty OOV slot
  std::vector<std::uint64_t> counts;      // corpus count per id, counts[0] = 0
  std::unordered_map<std::string, std::uint32_t> ids;

  std::uint32_t size() const { return static_cast<std::uint32_t>(tokens.size()); }

  std::uint32_t id_of(const std::string& token) const {
    auto it = ids.find(token);
    return it == ids.end() ? kOovId : it->second;
  }
};

// Lowercase + split on runs of whitespace.
std::vector<std::string> split_tokens(std::string_view text);

// Map text to token ids; unknown tokens become kOovId, empty text -> empty.
std::vector<std::uint32_t> tokenize(std::string_view text, const Vocab& vocab);

// Ids assigned by descending corpus count, ties broken by token ascending,
// starting at 1. Tokens under min_count are left to the OOV id.
Vocab build_vocab(const std::vector<std::string>& texts, std::uint64_t min_count = 1);

}  // namespace sgc
