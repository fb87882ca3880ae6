#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wis/detect.hpp"
#include "wis/lm.hpp"
#include "wis/scoring.hpp"
#include "wis/text.hpp"
#include "wis/watermark.hpp"

namespace wis {

struct Rouge1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Clipped unigram overlap. Throws std::invalid_argument on an empty
/// reference; an empty candidate scores zero.
Rouge1 rouge1(std::span<const TokenId> candidate, std::span<const TokenId> reference);

/// Fraction of sequences whose z-score exceeds `threshold`.
double detection_rate(std::span<const TokenSeq> texts, const WatermarkParams& params,
                      double threshold = kDefaultZThreshold);

enum class Method { kBaseline, kWisPerturbation, kWisRegression, kWisClassification };

Method parse_method(const std::string& name);
std::string to_string(Method method);

struct SweepConfig {
  std::vector<double> gammas{0.25};
  std::vector<double> deltas{1.5, 2.0, 2.5, 3.0, 4.0};
  std::vector<Method> methods{Method::kBaseline};
  std::map<Method, double> r0;  // missing entries fall back to method defaults
  std::size_t window = 16;
  std::uint64_t key = 0;
  std::size_t context_width = kFullPrefix;
  std::size_t max_len = 100;
  std::size_t min_len = 100;
  std::size_t beam_width = 2;
  std::size_t no_repeat_ngram = 0;
  double threshold = kDefaultZThreshold;

  double r0_for(Method method) const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct BenchPrompt {
  Tokens prompt;
  std::optional<Tokens> reference;
};

std::vector<BenchPrompt> make_bench_prompts(const Corpus& corpus, const Vocabulary& vocab,
                                            std::size_t limit = 0);

/// Models and scorers a sweep draws on. Scorers are only needed for the
/// WIS methods the config lists.
struct BenchResources {
  const LogitsProvider* lm = nullptr;
  const EmbeddingProvider* embedding = nullptr;
  const ScorerModel* regression = nullptr;
  const ScorerModel* classification = nullptr;
};

struct SweepRow {
  double gamma = 0.0;
  double delta = 0.0;
  Method method = Method::kBaseline;
  double detection_rate = 0.0;
  double rouge1_ref = 0.0;   // F1 against dataset references
  double rouge1_self = 0.0;  // F1 against the unwatermarked generation
  double mean_z = 0.0;
  std::size_t n_samples = 0;
};

/// Runs every (gamma, method, delta) cell in config order: one generation
/// per prompt, detected and scored against the reference and against the
/// unwatermarked generation of the same prompt.
std::vector<SweepRow> run_sweep(const SweepConfig& config, const BenchResources& resources,
                                std::span<const BenchPrompt> prompts);

/// Detection and quality for one cell, with the unwatermarked generations
/// supplied by the caller (one per prompt).
SweepRow run_cell(const SweepConfig& config, const BenchResources& resources, std::span<const BenchPrompt> prompts,
                  std::span<const TokenSeq> unwatermarked, double gamma, double delta, Method method);

std::vector<TokenSeq> unwatermarked_generations(const SweepConfig& config, const LogitsProvider& lm,
                                                std::span<const BenchPrompt> prompts);

void write_csv(std::ostream& out, std::span<const SweepRow> rows);
nlohmann::json summary_json(const SweepConfig& config, std::span<const SweepRow> rows);

}  // namespace wis
