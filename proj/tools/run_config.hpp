#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wis/bench.hpp"
#include "wis/watermark.hpp"

namespace wis::cli {

/// Settings shared by every subcommand. A JSON config file fills these
/// first; command-line flags then override individual fields.
struct RunConfig {
  std::uint64_t seed = 0;

  // Data and models.
  std::string corpus;
  std::string prompts;
  std::string lm;
  std::string synonyms;
  std::string labels;
  std::string scorer_model;
  std::string regression_model;
  std::string classification_model;
  std::string out;
  std::string summary;

  // Language model.
  std::size_t vocab_size = 20000;
  std::size_t order = 4;
  double k = 0.05;

  // Watermark.
  double gamma = 0.25;
  double delta = 2.0;
  std::string mode = "baseline";
  std::string scorer;
  std::optional<double> r0;
  std::size_t window = 16;
  std::string context_width = "full";
  double threshold = kDefaultZThreshold;

  // Generation.
  std::size_t max_len = 100;
  std::optional<std::size_t> min_len;
  std::size_t beam = 2;
  std::size_t no_repeat_ngram = 0;

  // Labeling and training.
  std::size_t paraphrases = 8;
  std::size_t epochs = 300;
  double learning_rate = 1.0;
  std::size_t embedding_dim = 64;
  std::string kind = "regression";

  // Bench.
  std::vector<double> gammas{0.25};
  std::vector<double> deltas{1.5, 2.0, 2.5, 3.0, 4.0};
  std::vector<std::string> methods{"baseline"};
  std::size_t limit = 200;
};

/// Reads a JSON object whose keys are RunConfig field names. Unknown keys
/// and type mismatches raise ConfigError naming the field.
RunConfig load_run_config(const std::filesystem::path& path);

/// Finds "--config <path>" or "--config=<path>" in argv without consuming it.
std::optional<std::string> find_config_arg(int argc, const char* const* argv);

std::size_t parse_context_width(const std::string& value);

/// --key wins over the WIS_KEY environment variable; neither is an error.
std::uint64_t resolve_key(const std::optional<std::string>& flag);

WatermarkParams watermark_params(const RunConfig& cfg, std::uint64_t key);

GenerationOptions generation_options(const RunConfig& cfg);

SweepConfig sweep_config(const RunConfig& cfg, std::uint64_t key);

/// Throws ConfigError("<what> not found: <path>") unless the path exists.
void require_file(const std::string& path, const std::string& what);

}  // namespace wis::cli
