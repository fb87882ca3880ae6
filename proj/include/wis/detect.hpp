#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wis/text.hpp"
#include "wis/watermark.hpp"

namespace wis {

inline constexpr double kDefaultZThreshold = 4.0;

struct DetectionResult {
  std::size_t token_count = 0;
  std::size_t green_count = 0;
  double z = 0.0;
  double threshold = kDefaultZThreshold;
  bool watermarked = false;
  std::vector<bool> green;  // verdict per scored position
};

/// Green verdict of every token after the prompt, each seeded by the same
/// context rule the generator uses.
std::vector<bool> green_verdicts(const TokenSeq& seq, const WatermarkParams& params);

/// Throws std::invalid_argument("nothing to score") when no token follows
/// the prompt.
std::size_t count_green(const TokenSeq& seq, const WatermarkParams& params);

/// (green - gamma T) / sqrt(T gamma (1 - gamma)).
double z_score(std::size_t green_count, std::size_t token_count, double gamma);

DetectionResult detect_tokens(const TokenSeq& seq, const WatermarkParams& params,
                              double threshold = kDefaultZThreshold);

/// Tokenizes and scores `text`. With a prompt, the prompt tokens serve as
/// greenlist context only; without one, every token of `text` is scored.
DetectionResult detect(std::string_view text, const Vocabulary& vocab, const WatermarkParams& params,
                       double threshold = kDefaultZThreshold,
                       std::optional<std::string_view> prompt = std::nullopt);

/// {token_count, green_count, z, threshold, verdict}
nlohmann::json to_json(const DetectionResult& result);

}  // namespace wis
