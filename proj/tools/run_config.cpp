#include "run_config.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>

#include "wis/error.hpp"

namespace wis::cli {
namespace {

using Setter = std::function<void(RunConfig&, const nlohmann::json&)>;

template <typename T>
Setter field(T RunConfig::*member) {
  return [member](RunConfig& cfg, const nlohmann::json& value) { cfg.*member = value.get<T>(); };
}

template <typename T>
Setter optional_field(std::optional<T> RunConfig::*member) {
  return [member](RunConfig& cfg, const nlohmann::json& value) {
    if (value.is_null()) {
      cfg.*member = std::nullopt;
    } else {
      cfg.*member = value.get<T>();
    }
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"seed", field(&RunConfig::seed)},
      {"corpus", field(&RunConfig::corpus)},
      {"prompts", field(&RunConfig::prompts)},
      {"lm", field(&RunConfig::lm)},
      {"synonyms", field(&RunConfig::synonyms)},
      {"labels", field(&RunConfig::labels)},
      {"scorer_model", field(&RunConfig::scorer_model)},
      {"regression_model", field(&RunConfig::regression_model)},
      {"classification_model", field(&RunConfig::classification_model)},
      {"out", field(&RunConfig::out)},
      {"summary", field(&RunConfig::summary)},
      {"vocab_size", field(&RunConfig::vocab_size)},
      {"order", field(&RunConfig::order)},
      {"k", field(&RunConfig::k)},
      {"gamma", field(&RunConfig::gamma)},
      {"delta", field(&RunConfig::delta)},
      {"mode", field(&RunConfig::mode)},
      {"scorer", field(&RunConfig::scorer)},
      {"r0", optional_field(&RunConfig::r0)},
      {"window", field(&RunConfig::window)},
      {"context_width",
       [](RunConfig& cfg, const nlohmann::json& v) {
         cfg.context_width = v.is_string() ? v.get<std::string>() : std::to_string(v.get<std::size_t>());
       }},
      {"threshold", field(&RunConfig::threshold)},
      {"max_len", field(&RunConfig::max_len)},
      {"min_len", optional_field(&RunConfig::min_len)},
      {"beam", field(&RunConfig::beam)},
      {"no_repeat_ngram", field(&RunConfig::no_repeat_ngram)},
      {"paraphrases", field(&RunConfig::paraphrases)},
      {"epochs", field(&RunConfig::epochs)},
      {"learning_rate", field(&RunConfig::learning_rate)},
      {"embedding_dim", field(&RunConfig::embedding_dim)},
      {"kind", field(&RunConfig::kind)},
      {"gammas", field(&RunConfig::gammas)},
      {"deltas", field(&RunConfig::deltas)},
      {"methods", field(&RunConfig::methods)},
      {"limit", field(&RunConfig::limit)},
  };
  return table;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + path.string() + ": expected a JSON object");
  RunConfig cfg;
  for (const auto& [name, value] : j.items()) {
    if (name == "key" || name == "key_hex") {
      throw ConfigError("config field '" + name + "': pass the key with --key or WIS_KEY");
    }
    auto it = setters().find(name);
    if (it == setters().end()) throw ConfigError("config field '" + name + "' is not recognised");
    try {
      it->second(cfg, value);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config field '" + name + "' has the wrong type");
    }
  }
  return cfg;
}

std::optional<std::string> find_config_arg(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0) {
      if (i + 1 < argc) return std::string(argv[i + 1]);
      return std::nullopt;
    }
    if (std::strncmp(argv[i], "--config=", 9) == 0) return std::string(argv[i] + 9);
  }
  return std::nullopt;
}

std::size_t parse_context_width(const std::string& value) {
  if (value == "full") return kFullPrefix;
  std::size_t used = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || n < 1 || value.find('-') != std::string::npos) {
    throw ConfigError("context_width must be a positive integer or \"full\", got '" + value + "'");
  }
  return static_cast<std::size_t>(n);
}

std::uint64_t resolve_key(const std::optional<std::string>& flag) {
  if (flag) return parse_key_hex(*flag);
  if (const char* env = std::getenv("WIS_KEY"); env != nullptr && *env != '\0') return parse_key_hex(env);
  throw ConfigError("key missing: pass --key or set WIS_KEY");
}

WatermarkParams watermark_params(const RunConfig& cfg, std::uint64_t key) {
  WatermarkParams p;
  p.key = key;
  p.gamma = cfg.gamma;
  p.delta = cfg.delta;
  p.context_width = parse_context_width(cfg.context_width);
  p.mode = parse_mode(cfg.mode);
  p.validate();
  return p;
}

GenerationOptions generation_options(const RunConfig& cfg) {
  if (cfg.max_len < 1) throw ConfigError("max_len must be >= 1");
  if (cfg.beam < 1) throw ConfigError("beam must be >= 1");
  const std::size_t min_len = cfg.min_len.value_or(cfg.max_len);
  if (min_len > cfg.max_len) throw ConfigError("min_len must not exceed max_len");
  GenerationOptions opts;
  opts.max_new_tokens = cfg.max_len;
  opts.min_new_tokens = min_len;
  opts.beam_width = cfg.beam;
  opts.no_repeat_ngram = cfg.no_repeat_ngram;
  opts.suppress = default_suppressed_ids();
  return opts;
}

SweepConfig sweep_config(const RunConfig& cfg, std::uint64_t key) {
  SweepConfig s;
  s.gammas = cfg.gammas;
  s.deltas = cfg.deltas;
  s.methods.clear();
  for (const auto& name : cfg.methods) s.methods.push_back(parse_method(name));
  if (cfg.r0) {
    for (auto m : s.methods) {
      if (m != Method::kBaseline) s.r0[m] = *cfg.r0;
    }
  }
  s.window = cfg.window;
  s.key = key;
  s.context_width = parse_context_width(cfg.context_width);
  s.max_len = cfg.max_len;
  s.min_len = cfg.min_len.value_or(cfg.max_len);
  if (s.min_len > s.max_len) throw ConfigError("min_len must not exceed max_len");
  s.beam_width = cfg.beam;
  s.no_repeat_ngram = cfg.no_repeat_ngram;
  s.threshold = cfg.threshold;
  s.validate();
  return s;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " not given");
  if (!std::filesystem::exists(path)) throw ConfigError(what + " not found: " + path);
}

}  // namespace wis::cli
