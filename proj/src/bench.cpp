#include "wis/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "wis/error.hpp"

namespace wis {

Rouge1 rouge1(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
  if (reference.empty()) throw std::invalid_argument("empty reference");
  if (candidate.empty()) return {};
  std::unordered_map<TokenId, std::size_t> ref_counts;
  for (TokenId id : reference) ++ref_counts[id];
  std::size_t overlap = 0;
  for (TokenId id : candidate) {
    auto it = ref_counts.find(id);
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  Rouge1 r;
  r.precision = static_cast<double>(overlap) / static_cast<double>(candidate.size());
  r.recall = static_cast<double>(overlap) / static_cast<double>(reference.size());
  r.f1 = overlap == 0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

double detection_rate(std::span<const TokenSeq> texts, const WatermarkParams& params, double threshold) {
  if (texts.empty()) throw std::invalid_argument("no texts to detect");
  std::size_t hits = 0;
  for (const auto& t : texts) hits += detect_tokens(t, params, threshold).watermarked ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(texts.size());
}

Method parse_method(const std::string& name) {
  if (name == "baseline") return Method::kBaseline;
  if (name == "wis-perturbation") return Method::kWisPerturbation;
  if (name == "wis-regression") return Method::kWisRegression;
  if (name == "wis-classification") return Method::kWisClassification;
  throw ConfigError("unknown method '" + name +
                    "' (expected baseline|wis-perturbation|wis-regression|wis-classification)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kBaseline: return "baseline";
    case Method::kWisPerturbation: return "wis-perturbation";
    case Method::kWisRegression: return "wis-regression";
    case Method::kWisClassification: return "wis-classification";
  }
  return "?";
}

double SweepConfig::r0_for(Method method) const {
  if (auto it = r0.find(method); it != r0.end()) return it->second;
  switch (method) {
    case Method::kWisRegression: return default_r0(ScorerKind::kRegression);
    case Method::kWisClassification: return default_r0(ScorerKind::kClassification);
    default: return 0.02;
  }
}

void SweepConfig::validate() const {
  if (gammas.empty()) throw ConfigError("gammas must not be empty");
  if (deltas.empty()) throw ConfigError("deltas must not be empty");
  if (methods.empty()) throw ConfigError("methods must not be empty");
  for (double g : gammas) {
    if (!(g > 0.0 && g < 1.0)) throw ConfigError("gammas: every value must be in (0, 1)");
  }
  for (double d : deltas) {
    if (!(d >= 0.0)) throw ConfigError("deltas: every value must be >= 0");
  }
  for (auto m : methods) {
    const double r = r0_for(m);
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("r0 for " + to_string(m) + " must be in [0, 1]");
  }
  if (window < 1) throw ConfigError("window must be >= 1");
  if (context_width < 1) throw ConfigError("context_width must be >= 1");
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
}

std::vector<BenchPrompt> make_bench_prompts(const Corpus& corpus, const Vocabulary& vocab, std::size_t limit) {
  std::vector<BenchPrompt> out;
  for (const auto& doc : corpus) {
    if (limit != 0 && out.size() >= limit) break;
    BenchPrompt p;
    p.prompt = tokenize(doc.text, vocab);
    if (doc.reference) {
      auto ref = tokenize(*doc.reference, vocab);
      if (!ref.empty()) p.reference = std::move(ref);
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

GenerationOptions generation_options(const SweepConfig& config) {
  GenerationOptions opts;
  opts.max_new_tokens = config.max_len;
  opts.min_new_tokens = config.min_len;
  opts.beam_width = config.beam_width;
  opts.suppress = default_suppressed_ids();
  opts.no_repeat_ngram = config.no_repeat_ngram;
  return opts;
}

/// Owns whatever scorer chain a method needs.
struct MethodScorer {
  std::unique_ptr<ImportanceScorer> base;
  std::unique_ptr<ImportanceScorer> windowed;
};

MethodScorer make_scorer(const SweepConfig& config, const BenchResources& res, Method method) {
  MethodScorer s;
  switch (method) {
    case Method::kBaseline:
      return s;
    case Method::kWisPerturbation:
      if (res.embedding == nullptr) throw ConfigError("method wis-perturbation requires an embedding provider");
      s.base = std::make_unique<PerturbationScorer>(*res.embedding);
      break;
    case Method::kWisRegression:
      if (res.regression == nullptr) throw ConfigError("method wis-regression requires a regression scorer model");
      s.base = std::make_unique<ModelScorer>(*res.regression);
      break;
    case Method::kWisClassification:
      if (res.classification == nullptr) {
        throw ConfigError("method wis-classification requires a classification scorer model");
      }
      s.base = std::make_unique<ModelScorer>(*res.classification);
      break;
  }
  s.windowed = std::make_unique<WindowedScorer>(*s.base, config.window);
  return s;
}

}  // namespace

std::vector<TokenSeq> unwatermarked_generations(const SweepConfig& config, const LogitsProvider& lm,
                                                std::span<const BenchPrompt> prompts) {
  const auto opts = generation_options(config);
  const auto identity = identity_transform();
  std::vector<TokenSeq> out;
  out.reserve(prompts.size());
  for (const auto& p : prompts) out.push_back(beam_generate(lm, identity, p.prompt, opts).seq);
  return out;
}

SweepRow run_cell(const SweepConfig& config, const BenchResources& resources, std::span<const BenchPrompt> prompts,
                  std::span<const TokenSeq> unwatermarked, double gamma, double delta, Method method) {
  if (resources.lm == nullptr) throw ConfigError("a language model is required");
  if (unwatermarked.size() != prompts.size()) throw std::invalid_argument("one unwatermarked generation per prompt");
  WatermarkParams params;
  params.key = config.key;
  params.gamma = gamma;
  params.delta = delta;
  params.context_width = config.context_width;
  params.mode = method == Method::kBaseline ? WatermarkMode::kBaseline : WatermarkMode::kWis;

  const auto scorer = make_scorer(config, resources, method);
  std::optional<ImportanceGate> gate;
  if (scorer.windowed) gate = ImportanceGate{scorer.windowed.get(), config.r0_for(method)};
  const auto transform = watermark_transform(params, gate);
  const auto opts = generation_options(config);

  SweepRow row;
  row.gamma = gamma;
  row.delta = delta;
  row.method = method;
  std::size_t detected = 0;
  std::size_t scored = 0;
  std::size_t with_reference = 0;
  double z_sum = 0.0;
  double ref_sum = 0.0;
  double self_sum = 0.0;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto gen = beam_generate(*resources.lm, transform, prompts[i].prompt, opts);
    const auto generated = gen.seq.generated();
    self_sum += unwatermarked[i].generated().empty() ? (generated.empty() ? 1.0 : 0.0)
                                                     : rouge1(generated, unwatermarked[i].generated()).f1;
    if (prompts[i].reference) {
      ref_sum += rouge1(generated, *prompts[i].reference).f1;
      ++with_reference;
    }
    if (generated.empty()) continue;  // nothing to score; counts as not detected
    const auto det = detect_tokens(gen.seq, params, config.threshold);
    detected += det.watermarked ? 1 : 0;
    z_sum += det.z;
    ++scored;
  }
  const double n = static_cast<double>(prompts.size());
  row.n_samples = prompts.size();
  row.detection_rate = prompts.empty() ? 0.0 : static_cast<double>(detected) / n;
  row.rouge1_self = prompts.empty() ? 0.0 : self_sum / n;
  row.rouge1_ref = with_reference == 0 ? 0.0 : ref_sum / static_cast<double>(with_reference);
  row.mean_z = scored == 0 ? 0.0 : z_sum / static_cast<double>(scored);
  return row;
}

std::vector<SweepRow> run_sweep(const SweepConfig& config, const BenchResources& resources,
                                std::span<const BenchPrompt> prompts) {
  config.validate();
  if (resources.lm == nullptr) throw ConfigError("a language model is required");
  if (prompts.empty()) throw ConfigError("no prompts");
  // Fail on a missing scorer before any generation runs.
  for (auto m : config.methods) make_scorer(config, resources, m);

  const auto plain = unwatermarked_generations(config, *resources.lm, prompts);
  std::vector<SweepRow> rows;
  for (double gamma : config.gammas) {
    for (auto method : config.methods) {
      for (double delta : config.deltas) {
        rows.push_back(run_cell(config, resources, prompts, plain, gamma, delta, method));
      }
    }
  }
  return rows;
}

void write_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "gamma,delta,method,detection_rate,rouge1_ref,rouge1_self,mean_z,n_samples\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.4g,%.4g,%s,%.6f,%.6f,%.6f,%.6f,%zu\n", r.gamma, r.delta,
                  to_string(r.method).c_str(), r.detection_rate, r.rouge1_ref, r.rouge1_self, r.mean_z,
                  r.n_samples);
    out << buf;
  }
}

nlohmann::json summary_json(const SweepConfig& config, std::span<const SweepRow> rows) {
  nlohmann::json methods = nlohmann::json::array();
  nlohmann::json r0 = nlohmann::json::object();
  for (auto m : config.methods) {
    methods.push_back(to_string(m));
    r0[to_string(m)] = config.r0_for(m);
  }
  nlohmann::json out_rows = nlohmann::json::array();
  for (const auto& r : rows) {
    out_rows.push_back({{"gamma", r.gamma},
                        {"delta", r.delta},
                        {"method", to_string(r.method)},
                        {"detection_rate", r.detection_rate},
                        {"rouge1_ref", r.rouge1_ref},
                        {"rouge1_self", r.rouge1_self},
                        {"mean_z", r.mean_z},
                        {"n_samples", r.n_samples}});
  }
  return {{"config",
           {{"gammas", config.gammas},
            {"deltas", config.deltas},
            {"methods", methods},
            {"r0", r0},
            {"window", config.window},
            {"context_width", config.context_width == kFullPrefix ? nlohmann::json("full")
                                                                : nlohmann::json(config.context_width)},
            {"max_len", config.max_len},
            {"min_len", config.min_len},
            {"beam_width", config.beam_width},
            {"threshold", config.threshold}}},
          {"rows", out_rows}};
}

}  // namespace wis
