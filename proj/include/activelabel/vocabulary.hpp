#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "activelabel/error.hpp"
#include "activelabel/tokenizer.hpp"

namespace activelabel {

using TokenId = std::int32_t;

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  /// `tokens` excludes the two specials; they are prepended.
  explicit Vocabulary(const std::vector<std::string>& tokens) {
    add(std::string(kPadToken));
    add(std::string(kUnkToken));
    for (const auto& t : tokens) {
      if (index_.count(t))
        throw Error(ErrorCode::FormatError, "duplicate vocabulary token '" + t + "'");
      add(t);
    }
  }

  std::size_t size() const { return tokens_.size(); }

  TokenId index(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  /// All tokens in index order, specials included.
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(const TokenSequence& seq) const {
    std::vector<TokenId> ids;
    ids.reserve(seq.size());
    for (const auto& t : seq.tokens) ids.push_back(index(t));
    return ids;
  }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void add(std::string token) {
    index_.emplace(token, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(std::move(token));
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Keeps tokens seen at least `min_count` times, ordered by descending count
/// and then lexicographically.
inline Vocabulary build_vocabulary(std::span<const TokenSequence> corpus, std::size_t min_count = 1) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot build a vocabulary from no documents");
  if (min_count < 1) throw Error(ErrorCode::ConfigError, "min_count must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : corpus)
    for (const auto& t : seq.tokens) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, count] : counts)
    if (count >= min_count && token != Vocabulary::kPadToken && token != Vocabulary::kUnkToken)
      kept.emplace_back(token, count);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [token, count] : kept) tokens.push_back(std::move(token));
  return Vocabulary(tokens);
}

}  // namespace activelabel
