#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "wis/text.hpp"

namespace wis {

/// Natural-log scores, one per vocabulary id.
using LogitsVector = std::vector<double>;

/// Next-token scorer over a fixed vocabulary.
class LogitsProvider {
 public:
  virtual ~LogitsProvider() = default;
  virtual std::size_t vocab_size() const = 0;
  /// Logits for the token following `prefix`. Always vocab_size() long.
  virtual LogitsVector logits(std::span<const TokenId> prefix) const = 0;
};

/// Add-k smoothed n-gram model. Training pads every document with
/// (order - 1) BOS tokens and terminates it with EOS; queries pad short
/// prefixes the same way.
class NGramLM final : public LogitsProvider {
 public:
  static NGramLM train(const Corpus& corpus, const Vocabulary& vocab, std::size_t order, double k);

  /// Reads the JSON model file. A relative "vocab_file" resolves against
  /// the model file's directory.
  static NGramLM load(const std::filesystem::path& path);
  /// Writes the JSON model file plus the vocabulary file it references.
  void save(const std::filesystem::path& path, const std::filesystem::path& vocab_path) const;

  std::size_t vocab_size() const override { return vocab_.size(); }
  LogitsVector logits(std::span<const TokenId> prefix) const override;

  std::size_t order() const noexcept { return order_; }
  double k() const noexcept { return k_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }

  /// Raw count of `token` after `context` (context length must be order - 1).
  std::size_t count(std::span<const TokenId> context, TokenId token) const;
  std::size_t num_contexts() const noexcept { return table_.size(); }

 private:
  struct ContextHash {
    std::size_t operator()(const Tokens& ctx) const noexcept;
  };
  struct Continuations {
    std::vector<std::pair<TokenId, std::size_t>> counts;  // sorted by token id
    std::size_t total = 0;
  };

  NGramLM(Vocabulary vocab, std::size_t order, double k);
  Tokens context_of(std::span<const TokenId> prefix) const;

  Vocabulary vocab_;
  std::size_t order_;
  double k_;
  std::unordered_map<Tokens, Continuations, ContextHash> table_;
};

/// Index of the largest value; ties go to the lowest index.
TokenId argmax_token(std::span<const double> logits);

LogitsVector log_softmax(std::span<const double> logits);
std::vector<double> softmax(std::span<const double> logits);

/// Result of a logit transform for one beam at one step. `marks`, when
/// non-empty, holds one flag per vocabulary id; the flag of the chosen token
/// is recorded in the generation trace.
struct StepLogits {
  LogitsVector logits;
  std::vector<bool> marks;
};

/// Hook applied to the provider's logits before normalisation. Receives the
/// beam's full current sequence (prompt plus generated tokens).
using LogitTransform = std::function<StepLogits(LogitsVector logits, std::span<const TokenId> prefix)>;

LogitTransform identity_transform();

struct GenerationOptions {
  std::size_t max_new_tokens = 100;
  std::size_t beam_width = 2;
  /// EOS is not selectable before this many tokens have been generated.
  std::size_t min_new_tokens = 0;
  std::optional<TokenId> eos = kEos;
  /// Ids that are never generated. They are pinned to a large negative
  /// logit before the transform runs.
  std::vector<TokenId> suppress;
  /// When > 0, a token that would repeat an n-gram of this size already
  /// present in the beam's sequence is not selectable (0 disables).
  std::size_t no_repeat_ngram = 0;
};

/// Suppression list used for text generation: BOS and UNK are never emitted.
std::vector<TokenId> default_suppressed_ids();

struct Generation {
  TokenSeq seq;           // prompt + generated tokens, EOS excluded
  double score = 0.0;     // sum of transformed log-probabilities
  bool ended_with_eos = false;
  std::vector<bool> marks;  // per generated token, when the transform emits marks
};

/// Deterministic beam search over transformed logits. At every step the
/// candidates (beam score + log-prob) are ranked by score, then lower token
/// id, then lower beam index; the top beam_width survive. Beams that pick
/// EOS are finished and retire. No length normalisation. Returns the
/// highest-scoring finished beam (earliest finished on ties).
Generation beam_generate(const LogitsProvider& provider, const LogitTransform& transform,
                         std::span<const TokenId> prompt, const GenerationOptions& options);

}  // namespace wis
