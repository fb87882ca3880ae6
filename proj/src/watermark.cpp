#include "wis/watermark.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "wis/error.hpp"
#include "wis/hash.hpp"

namespace wis {
namespace {

std::uint64_t context_state(std::uint64_t key, std::span<const TokenId> context) {
  std::uint64_t h = mix64(key);
  for (TokenId id : context) h = absorb(h, id);
  // Length separator: contexts of different widths never share a state.
  return absorb(h, 0xC0'7E'47ULL + context.size());
}

double candidate_score(std::uint64_t state, TokenId candidate) {
  return unit_interval(absorb(state, candidate));
}

}  // namespace

void WatermarkParams::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in (0, 1)");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be finite and >= 0");
  if (context_width < 1) throw ConfigError("context_width must be >= 1");
}

std::uint64_t parse_key_hex(const std::string& hex) {
  std::string digits = hex;
  if (digits.rfind("0x", 0) == 0 || digits.rfind("0X", 0) == 0) digits = digits.substr(2);
  if (digits.empty() || digits.size() > 16 ||
      digits.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
    throw ConfigError("key must be 1-16 hex digits, got '" + hex + "'");
  }
  return std::stoull(digits, nullptr, 16);
}

std::string key_to_hex(std::uint64_t key) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, key);
  return buf;
}

WatermarkMode parse_mode(const std::string& name) {
  if (name == "baseline") return WatermarkMode::kBaseline;
  if (name == "wis") return WatermarkMode::kWis;
  throw ConfigError("mode must be baseline or wis, got '" + name + "'");
}

std::string to_string(WatermarkMode mode) { return mode == WatermarkMode::kBaseline ? "baseline" : "wis"; }

nlohmann::json params_to_json(const WatermarkParams& params) {
  nlohmann::json width = params.context_width == kFullPrefix ? nlohmann::json("full")
                                                             : nlohmann::json(params.context_width);
  return {{"key_hex", key_to_hex(params.key)},
          {"gamma", params.gamma},
          {"delta", params.delta},
          {"context_width", width},
          {"mode", to_string(params.mode)}};
}

WatermarkParams params_from_json(const nlohmann::json& j) {
  WatermarkParams p;
  try {
    if (j.contains("key_hex")) p.key = parse_key_hex(j.at("key_hex").get<std::string>());
    p.gamma = j.value("gamma", p.gamma);
    p.delta = j.value("delta", p.delta);
    if (j.contains("context_width")) {
      const auto& w = j.at("context_width");
      if (w.is_string()) {
        if (w.get<std::string>() != "full") throw ConfigError("context_width must be a positive integer or \"full\"");
        p.context_width = kFullPrefix;
      } else {
        p.context_width = w.get<std::size_t>();
      }
    }
    if (j.contains("mode")) p.mode = parse_mode(j.at("mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("watermark params: ") + e.what());
  }
  p.validate();
  return p;
}

Tokens greenlist_context(std::span<const TokenId> prefix, std::size_t context_width) {
  if (context_width == kFullPrefix) {
    Tokens ctx{kBos};
    ctx.insert(ctx.end(), prefix.begin(), prefix.end());
    return ctx;
  }
  Tokens ctx(context_width, kBos);
  const std::size_t take = std::min(context_width, prefix.size());
  std::copy(prefix.end() - static_cast<std::ptrdiff_t>(take), prefix.end(),
            ctx.end() - static_cast<std::ptrdiff_t>(take));
  return ctx;
}

double green_score(std::uint64_t key, std::span<const TokenId> context, TokenId candidate) {
  return candidate_score(context_state(key, context), candidate);
}

bool is_green(const WatermarkParams& params, std::span<const TokenId> prefix, TokenId candidate) {
  return green_score(params.key, greenlist_context(prefix, params.context_width), candidate) < params.gamma;
}

std::vector<bool> green_mask(const WatermarkParams& params, std::span<const TokenId> prefix,
                             std::size_t vocab_size) {
  const auto state = context_state(params.key, greenlist_context(prefix, params.context_width));
  std::vector<bool> mask(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    mask[i] = candidate_score(state, static_cast<TokenId>(i)) < params.gamma;
  }
  return mask;
}

namespace {

StepLogits boost(std::span<const double> logits, const WatermarkParams& params, std::span<const TokenId> prefix,
                 const ImportanceFn* importance_of, double r0) {
  StepLogits out{LogitsVector(logits.begin(), logits.end()), green_mask(params, prefix, logits.size())};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (out.marks[i]) out.logits[i] += params.delta;
  }
  if (importance_of != nullptr) {
    const TokenId top = argmax_token(logits);
    if (!out.marks[top] && (*importance_of)(prefix, top) >= r0) out.logits[top] += params.delta;
  }
  return out;
}

}  // namespace

LogitsVector apply_baseline_boost(std::span<const double> logits, const WatermarkParams& params,
                                  std::span<const TokenId> prefix) {
  return boost(logits, params, prefix, nullptr, 0.0).logits;
}

LogitsVector apply_wis_boost(std::span<const double> logits, const WatermarkParams& params,
                             std::span<const TokenId> prefix, const ImportanceFn& importance_of, double r0) {
  if (!(r0 >= 0.0 && r0 <= 1.0)) throw ConfigError("r0 must be in [0, 1]");
  return boost(logits, params, prefix, &importance_of, r0).logits;
}

LogitTransform watermark_transform(const WatermarkParams& params, std::optional<ImportanceGate> gate) {
  params.validate();
  if (params.mode == WatermarkMode::kBaseline) {
    return [params](LogitsVector logits, std::span<const TokenId> prefix) {
      return boost(logits, params, prefix, nullptr, 0.0);
    };
  }
  if (!gate || gate->scorer == nullptr) throw ConfigError("wis mode requires an importance scorer");
  if (!(gate->r0 >= 0.0 && gate->r0 <= 1.0)) throw ConfigError("r0 must be in [0, 1]");
  const ImportanceScorer* scorer = gate->scorer;
  ImportanceFn fn = [scorer](std::span<const TokenId> prefix, TokenId candidate) {
    return scorer->score(prefix, candidate);
  };
  return [params, fn = std::move(fn), r0 = gate->r0](LogitsVector logits, std::span<const TokenId> prefix) {
    return boost(logits, params, prefix, &fn, r0);
  };
}

Generation generate_watermarked(const LogitsProvider& provider, const WatermarkParams& params,
                                std::optional<ImportanceGate> gate, std::span<const TokenId> prompt,
                                const GenerationOptions& options) {
  return beam_generate(provider, watermark_transform(params, gate), prompt, options);
}

}  // namespace wis
