#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wis {

using TokenId = std::uint32_t;
using Tokens = std::vector<TokenId>;

inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kUnk = 2;
inline constexpr std::size_t kNumReserved = 3;

/// Bijective token-string <-> id map. Ids 0..2 are BOS, EOS and UNK; the
/// remaining ids are surface tokens in descending corpus frequency.
class Vocabulary {
 public:
  Vocabulary();

  /// Builds from surface tokens (reserved entries are prepended).
  /// Throws ConfigError on duplicates or on tokens that collide with the
  /// reserved spellings.
  static Vocabulary from_surface_tokens(std::vector<std::string> surface);

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return entries_.size(); }
  const std::string& token_of(TokenId id) const;
  /// Id of `token`, or UNK when the token is not in the vocabulary.
  TokenId id_of(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;
  bool is_reserved(TokenId id) const noexcept { return id < kNumReserved; }
  const std::vector<std::string>& entries() const noexcept { return entries_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, TokenId> index_;
};

/// A token sequence whose first `prompt_len` ids are the prompt.
struct TokenSeq {
  Tokens ids;
  std::size_t prompt_len = 0;

  std::size_t generated_len() const noexcept { return ids.size() - prompt_len; }
  std::span<const TokenId> prompt() const noexcept { return {ids.data(), prompt_len}; }
  std::span<const TokenId> generated() const noexcept {
    return {ids.data() + prompt_len, generated_len()};
  }
};

struct Document {
  std::string text;
  std::optional<std::string> reference;
};

using Corpus = std::vector<Document>;

/// Reads JSONL records {"text": ..., "reference": ...}. A "prompt" key is
/// accepted in place of "text" so bench prompt files load directly.
Corpus read_corpus_jsonl(const std::filesystem::path& path);

/// Lowercases, splits on whitespace, and emits every ASCII punctuation
/// character as its own word.
std::vector<std::string> split_words(std::string_view text);

Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size);

Tokens tokenize(std::string_view text, const Vocabulary& vocab);

/// Space-joins surface tokens, skipping BOS/EOS/UNK. Throws
/// std::out_of_range("id out of range") on invalid ids.
std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

}  // namespace wis
