#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wis/lm.hpp"
#include "wis/scoring.hpp"
#include "wis/text.hpp"

namespace wis {

enum class WatermarkMode { kBaseline, kWis };

/// Hash the whole prefix instead of its last h tokens.
inline constexpr std::size_t kFullPrefix = std::numeric_limits<std::size_t>::max();

struct WatermarkParams {
  std::uint64_t key = 0;
  double gamma = 0.25;
  double delta = 2.0;
  std::size_t context_width = kFullPrefix;
  WatermarkMode mode = WatermarkMode::kBaseline;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

std::uint64_t parse_key_hex(const std::string& hex);
std::string key_to_hex(std::uint64_t key);
WatermarkMode parse_mode(const std::string& name);
std::string to_string(WatermarkMode mode);

/// {key_hex, gamma, delta, context_width, mode}; a full-prefix context
/// width serialises as "full".
nlohmann::json params_to_json(const WatermarkParams& params);
WatermarkParams params_from_json(const nlohmann::json& j);

/// The tokens that seed the greenlist for the token following `prefix`:
/// the last h tokens, left-padded with BOS. With kFullPrefix it is BOS
/// followed by the whole prefix.
Tokens greenlist_context(std::span<const TokenId> prefix, std::size_t context_width);

/// Keyed PRF in [0, 1): SplitMix64 chained over key, context ids and the
/// candidate id, scaled by 2^-64.
double green_score(std::uint64_t key, std::span<const TokenId> context, TokenId candidate);

/// green_score < gamma, where the context is greenlist_context(prefix, h).
bool is_green(const WatermarkParams& params, std::span<const TokenId> prefix, TokenId candidate);

/// Greenlist membership of every id in [0, vocab_size) after `prefix`.
std::vector<bool> green_mask(const WatermarkParams& params, std::span<const TokenId> prefix,
                             std::size_t vocab_size);

/// Adds delta to every green candidate. `prefix` is the sequence generated
/// so far (prompt included).
LogitsVector apply_baseline_boost(std::span<const double> logits, const WatermarkParams& params,
                                  std::span<const TokenId> prefix);

using ImportanceFn = std::function<double(std::span<const TokenId> prefix, TokenId candidate)>;

/// Baseline boost, plus delta on the unwatermarked argmax when it is red and
/// importance_of(prefix, argmax) >= r0. No position is boosted twice, and
/// importance_of runs at most once per call.
LogitsVector apply_wis_boost(std::span<const double> logits, const WatermarkParams& params,
                             std::span<const TokenId> prefix, const ImportanceFn& importance_of,
                             double r0);

/// An importance scorer with its decision threshold.
struct ImportanceGate {
  const ImportanceScorer* scorer = nullptr;
  double r0 = 0.02;
};

/// Transform for beam_generate. Marks carry the step's greenlist.
LogitTransform watermark_transform(const WatermarkParams& params,
                                   std::optional<ImportanceGate> gate = std::nullopt);

/// Beam search with the watermark transform selected by params.mode.
/// Generation::marks holds the green verdict of every generated token.
Generation generate_watermarked(const LogitsProvider& provider, const WatermarkParams& params,
                                std::optional<ImportanceGate> gate, std::span<const TokenId> prompt,
                                const GenerationOptions& options);

}  // namespace wis
