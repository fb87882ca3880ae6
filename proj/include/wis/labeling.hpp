#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wis/scoring.hpp"
#include "wis/text.hpp"

namespace wis {

/// Produces paraphrases of a text.
class ParaphraseOracle {
 public:
  virtual ~ParaphraseOracle() = default;
  /// Exactly n paraphrases; deterministic in (text, n, seed).
  virtual std::vector<std::string> paraphrase(std::string_view text, std::size_t n, std::uint64_t seed) const = 0;
};

using SynonymTable = std::map<std::string, std::vector<std::string>>;

SynonymTable load_synonyms(const std::filesystem::path& path);

bool is_stopword(std::string_view word);

struct RuleParaphraserOptions {
  double synonym_p = 0.5;
  double stopword_dropout_p = 0.2;
  double swap_p = 0.1;
};

/// Word-level rewriting: synonym substitution from a table, stopword
/// dropout, then adjacent-pair swaps. Output is in normalised form
/// (lowercase, punctuation split, single spaces).
class RuleParaphraser final : public ParaphraseOracle {
 public:
  explicit RuleParaphraser(SynonymTable synonyms, RuleParaphraserOptions options = {});
  std::vector<std::string> paraphrase(std::string_view text, std::size_t n, std::uint64_t seed) const override;

 private:
  SynonymTable synonyms_;
  RuleParaphraserOptions options_;
};

std::vector<std::string> paraphrase_n(const ParaphraseOracle& oracle, std::string_view text, std::size_t n,
                                      std::uint64_t seed);

/// n_t = number of paraphrases containing s_t at least once.
std::vector<std::size_t> count_appearances(std::span<const TokenId> s, std::span<const Tokens> paraphrases);

struct LabeledRecord {
  Tokens tokens;
  std::vector<std::size_t> counts;  // one per token, each in [0, N]
};

/// Token sequences with paraphrase-appearance counts. Labels derive from
/// the counts: 1(n_t > 0) for classification, n_t / N for regression.
struct LabeledCorpus {
  ScorerKind kind = ScorerKind::kRegression;
  std::size_t paraphrase_count = 1;
  std::vector<LabeledRecord> records;

  double label(const LabeledRecord& record, std::size_t t) const;
  std::size_t num_tokens() const;
};

struct LabeledDatasets {
  LabeledCorpus classification;
  LabeledCorpus regression;
};

LabeledDatasets build_datasets(const Corpus& corpus, const Vocabulary& vocab, const ParaphraseOracle& oracle,
                               std::size_t n, std::uint64_t seed);

/// One JSON object per record: {"tokens": [...], "counts": [...], "N": n}.
void write_labeled_jsonl(const LabeledCorpus& corpus, const Vocabulary& vocab, const std::filesystem::path& path);
LabeledCorpus read_labeled_jsonl(const std::filesystem::path& path, const Vocabulary& vocab, ScorerKind kind);

// ---------------------------------------------------------------------------
// Training

/// Dense design matrix with one row per labeled token.
struct TrainingData {
  std::size_t dimension = 0;
  std::vector<double> features;  // rows x dimension
  std::vector<double> labels;

  std::size_t rows() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * dimension, dimension}; }
};

TrainingData make_training_data(const LabeledCorpus& corpus, const FeatureExtractor& extractor);

/// Parameters are the weights followed by the bias. Regression uses
/// 0.5 * (sigmoid(z) - y)^2, classification the logistic loss; both are
/// averaged over rows.
double glm_loss(ScorerKind kind, std::span<const double> params, const TrainingData& data);
std::vector<double> glm_gradient(ScorerKind kind, std::span<const double> params, const TrainingData& data);

struct TrainOptions {
  std::size_t epochs = 300;
  double learning_rate = 1.0;
  std::size_t window = 16;
  std::size_t embedding_dim = 64;
  std::uint64_t seed = 0;
};

/// Full-batch gradient descent from small seeded initial weights. When
/// `loss_history` is given it receives the loss before every epoch and
/// after the last one.
ScorerModel train_scorer(const LabeledCorpus& dataset, ScorerKind kind, std::size_t vocab_size,
                         const TrainOptions& options, std::vector<double>* loss_history = nullptr);

}  // namespace wis
