#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wis/text.hpp"

namespace wis {

/// phi: token sequence -> R^d.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(std::span<const TokenId> seq) const = 0;
};

/// Smoothed inverse document frequency, ln((1 + D) / (1 + df)) + 1, for
/// every id in [0, vocab_size).
std::vector<double> compute_idf(std::span<const Tokens> documents, std::size_t vocab_size);

/// Each token maps to a keyed pseudorandom vector with entries +-1/sqrt(d);
/// a sequence maps to the IDF-weighted mean of its token vectors (the zero
/// vector when empty).
class HashedEmbedding final : public EmbeddingProvider {
 public:
  static constexpr std::uint64_t kDefaultKey = 0x5eed'e3b0'd1ce'0001ULL;

  HashedEmbedding(std::vector<double> idf, std::size_t dim = 256, std::uint64_t key = kDefaultKey);

  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(std::span<const TokenId> seq) const override;

  std::span<const double> token_vector(TokenId id) const;
  double idf(TokenId id) const { return idf_.at(id); }
  const std::vector<double>& idf_table() const noexcept { return idf_; }
  std::uint64_t key() const noexcept { return key_; }

 private:
  std::vector<double> idf_;
  std::size_t dim_;
  std::uint64_t key_;
  std::vector<double> vectors_;  // vocab_size x dim, row-major
};

/// f(prefix, candidate) in [0, 1].
class ImportanceScorer {
 public:
  virtual ~ImportanceScorer() = default;
  virtual double score(std::span<const TokenId> prefix, TokenId candidate) const = 0;
};

enum class CosineMode {
  kDissimilarity,  // 1 - cos: large when the candidate moves the embedding
  kRawCosine,      // cos itself, clamped to [0, 1]
};

/// 1 - cos(phi(prefix), phi(prefix + candidate)), clamped to [0, 1]. A
/// zero-norm embedding (e.g. empty prefix) counts as cos = 0.
double perturbation_score(const EmbeddingProvider& phi, std::span<const TokenId> prefix, TokenId candidate,
                          CosineMode mode = CosineMode::kDissimilarity);

class PerturbationScorer final : public ImportanceScorer {
 public:
  explicit PerturbationScorer(const EmbeddingProvider& phi, CosineMode mode = CosineMode::kDissimilarity)
      : phi_(phi), mode_(mode) {}
  double score(std::span<const TokenId> prefix, TokenId candidate) const override {
    return perturbation_score(phi_, prefix, candidate, mode_);
  }

 private:
  const EmbeddingProvider& phi_;
  CosineMode mode_;
};

/// Restricts the scoring prefix to its last w tokens.
class WindowedScorer final : public ImportanceScorer {
 public:
  WindowedScorer(const ImportanceScorer& inner, std::size_t window);
  double score(std::span<const TokenId> prefix, TokenId candidate) const override;
  std::size_t window() const noexcept { return window_; }

 private:
  const ImportanceScorer& inner_;
  std::size_t window_;
};

/// f([s_{t-w}, ..., s_{t-1}], s_t) for 1-based position t of `seq`.
double windowed_score(const ImportanceScorer& f, std::span<const TokenId> seq, std::size_t t, std::size_t w);

/// f(prefix, candidate) >= r0.
bool important(const ImportanceScorer& f, std::span<const TokenId> prefix, TokenId candidate, double r0);

// ---------------------------------------------------------------------------
// Model-based scoring

enum class ScorerKind { kRegression, kClassification };

ScorerKind parse_scorer_kind(const std::string& name);
std::string to_string(ScorerKind kind);

/// Per-position features: hashed embedding of the candidate, IDF-weighted
/// mean embedding of the last `window` prefix tokens, normalised candidate
/// IDF, and relative position (min(prefix length, window) + 1) / (window + 1).
struct FeatureSpec {
  std::size_t embedding_dim = 64;
  std::size_t window = 16;
  std::uint64_t embedding_key = HashedEmbedding::kDefaultKey;
  std::vector<double> idf;

  std::size_t dimension() const noexcept { return 2 * embedding_dim + 2; }
};

class FeatureExtractor {
 public:
  explicit FeatureExtractor(const FeatureSpec& spec);
  std::size_t dimension() const noexcept { return dimension_; }
  /// Writes dimension() values into `out`.
  void extract(std::span<const TokenId> prefix, TokenId candidate, std::span<double> out) const;
  std::vector<double> extract(std::span<const TokenId> prefix, TokenId candidate) const;

 private:
  HashedEmbedding embedding_;
  std::size_t window_;
  std::size_t dimension_;
  double max_idf_;
};

/// Generalised linear scorer: sigmoid(w . x + b) for both kinds.
struct ScorerModel {
  ScorerKind kind = ScorerKind::kRegression;
  FeatureSpec features;
  std::vector<double> weights;
  double bias = 0.0;
  double r0_default = 0.9;

  bool trained() const noexcept { return !weights.empty(); }

  static ScorerModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

nlohmann::json model_to_json(const ScorerModel& model);
ScorerModel model_from_json(const nlohmann::json& j);

double default_r0(ScorerKind kind);

double sigmoid(double x);

/// Throws std::logic_error("untrained model") when the model has no weights.
double model_score(const ScorerModel& model, std::span<const TokenId> prefix, TokenId candidate);

class ModelScorer final : public ImportanceScorer {
 public:
  explicit ModelScorer(ScorerModel model);
  double score(std::span<const TokenId> prefix, TokenId candidate) const override;
  const ScorerModel& model() const noexcept { return model_; }

 private:
  ScorerModel model_;
  FeatureExtractor extractor_;
};

}  // namespace wis
