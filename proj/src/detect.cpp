#include "wis/detect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "wis/error.hpp"

namespace wis {

std::vector<bool> green_verdicts(const TokenSeq& seq, const WatermarkParams& params) {
  if (seq.prompt_len > seq.ids.size()) throw std::invalid_argument("prompt longer than sequence");
  std::vector<bool> out;
  out.reserve(seq.generated_len());
  const std::span<const TokenId> all(seq.ids);
  for (std::size_t pos = seq.prompt_len; pos < all.size(); ++pos) {
    out.push_back(is_green(params, all.first(pos), all[pos]));
  }
  return out;
}

std::size_t count_green(const TokenSeq& seq, const WatermarkParams& params) {
  if (seq.prompt_len >= seq.ids.size()) throw std::invalid_argument("nothing to score");
  const auto verdicts = green_verdicts(seq, params);
  return static_cast<std::size_t>(std::count(verdicts.begin(), verdicts.end(), true));
}

double z_score(std::size_t green_count, std::size_t token_count, double gamma) {
  if (token_count < 1) throw std::invalid_argument("nothing to score");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in (0, 1)");
  const double t = static_cast<double>(token_count);
  return (static_cast<double>(green_count) - gamma * t) / std::sqrt(t * gamma * (1.0 - gamma));
}

DetectionResult detect_tokens(const TokenSeq& seq, const WatermarkParams& params, double threshold) {
  if (seq.prompt_len >= seq.ids.size()) throw std::invalid_argument("nothing to score");
  DetectionResult r;
  r.green = green_verdicts(seq, params);
  r.token_count = r.green.size();
  r.green_count = static_cast<std::size_t>(std::count(r.green.begin(), r.green.end(), true));
  r.z = z_score(r.green_count, r.token_count, params.gamma);
  r.threshold = threshold;
  r.watermarked = r.z > threshold;
  return r;
}

DetectionResult detect(std::string_view text, const Vocabulary& vocab, const WatermarkParams& params,
                       double threshold, std::optional<std::string_view> prompt) {
  TokenSeq seq;
  if (prompt) seq.ids = tokenize(*prompt, vocab);
  seq.prompt_len = seq.ids.size();
  const auto body = tokenize(text, vocab);
  seq.ids.insert(seq.ids.end(), body.begin(), body.end());
  if (seq.ids.size() < 2 || body.empty()) throw std::invalid_argument("text too short to score");
  return detect_tokens(seq, params, threshold);
}

nlohmann::json to_json(const DetectionResult& result) {
  return {{"token_count", result.token_count},
          {"green_count", result.green_count},
          {"z", result.z},
          {"threshold", result.threshold},
          {"verdict", result.watermarked ? "watermarked" : "not-watermarked"}};
}

}  // namespace wis
