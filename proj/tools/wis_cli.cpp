// wis: train, generate, detect and benchmark watermarked text.

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "run_config.hpp"
#include "wis/bench.hpp"
#include "wis/detect.hpp"
#include "wis/error.hpp"
#include "wis/labeling.hpp"
#include "wis/lm.hpp"
#include "wis/scoring.hpp"
#include "wis/watermark.hpp"

namespace wis::cli {
namespace {

/// Writes to --out when given, otherwise to stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw std::runtime_error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

NGramLM load_lm(const RunConfig& cfg) {
  require_file(cfg.lm, "language model");
  return NGramLM::load(cfg.lm);
}

/// Embedding for perturbation scoring. IDF comes from --corpus when given,
/// otherwise every token weighs the same.
HashedEmbedding perturbation_embedding(const RunConfig& cfg, const Vocabulary& vocab) {
  if (cfg.corpus.empty()) return HashedEmbedding(std::vector<double>(vocab.size(), 1.0));
  require_file(cfg.corpus, "corpus");
  std::vector<Tokens> docs;
  for (const auto& d : read_corpus_jsonl(cfg.corpus)) docs.push_back(tokenize(d.text, vocab));
  return HashedEmbedding(compute_idf(docs, vocab.size()));
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

void cmd_train_lm(const RunConfig& cfg) {
  require_file(cfg.corpus, "corpus");
  if (cfg.out.empty()) throw ConfigError("--out is required");
  const auto start = std::chrono::steady_clock::now();
  const auto corpus = read_corpus_jsonl(cfg.corpus);
  const auto vocab = build_vocab(corpus, cfg.vocab_size);
  const auto lm = NGramLM::train(corpus, vocab, cfg.order, cfg.k);
  std::filesystem::path out(cfg.out);
  auto vocab_path = out;
  vocab_path.replace_extension(".vocab");
  lm.save(out, vocab_path);
  const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
  std::cerr << "trained order-" << lm.order() << " model: " << vocab.size() << " types, " << lm.num_contexts()
            << " contexts, " << took.count() << " s\n";
}

void cmd_generate(const RunConfig& cfg, const std::optional<std::string>& key_flag,
                  const std::vector<std::string>& inline_prompts, bool raw_cosine) {
  const auto params = watermark_params(cfg, resolve_key(key_flag));
  const auto opts = generation_options(cfg);
  if (params.mode == WatermarkMode::kWis && cfg.scorer.empty()) {
    throw ConfigError("--mode wis requires --scorer");
  }
  if (cfg.window < 1) throw ConfigError("window must be >= 1");

  std::vector<std::string> prompts = inline_prompts;
  if (!cfg.prompts.empty()) {
    require_file(cfg.prompts, "prompt file");
    for (const auto& d : read_corpus_jsonl(cfg.prompts)) prompts.push_back(d.text);
  }
  if (prompts.empty()) throw ConfigError("give --prompt or --prompts");

  const auto lm = load_lm(cfg);
  const auto& vocab = lm.vocab();

  std::unique_ptr<HashedEmbedding> embedding;
  std::unique_ptr<ImportanceScorer> base;
  std::optional<WindowedScorer> windowed;
  std::optional<ImportanceGate> gate;
  if (params.mode == WatermarkMode::kWis) {
    double r0 = 0.02;
    if (cfg.scorer == "perturbation") {
      embedding = std::make_unique<HashedEmbedding>(perturbation_embedding(cfg, vocab));
      base = std::make_unique<PerturbationScorer>(*embedding,
                                                  raw_cosine ? CosineMode::kRawCosine : CosineMode::kDissimilarity);
    } else {
      const auto kind = parse_scorer_kind(cfg.scorer);
      require_file(cfg.scorer_model, "scorer model");
      auto model = ScorerModel::load(cfg.scorer_model);
      if (model.kind != kind) throw ConfigError("scorer model is a " + to_string(model.kind) + " model");
      if (!model.trained()) throw ConfigError("scorer model has no weights");
      if (model.features.idf.size() != vocab.size()) throw ConfigError("scorer model vocabulary does not match the LM");
      r0 = model.r0_default;
      base = std::make_unique<ModelScorer>(std::move(model));
    }
    windowed.emplace(*base, cfg.window);
    gate = ImportanceGate{&*windowed, cfg.r0.value_or(r0)};
    if (!(gate->r0 >= 0.0 && gate->r0 <= 1.0)) throw ConfigError("r0 must be in [0, 1]");
  }

  Output out(cfg.out);
  for (const auto& prompt : prompts) {
    const auto ids = tokenize(prompt, vocab);
    const auto gen = generate_watermarked(lm, params, gate, ids, opts);
    const std::string text = detokenize(gen.seq.generated(), vocab);
    const auto self = detect(text, vocab, params, cfg.threshold, std::string_view(prompt));
    out.stream() << nlohmann::json{{"prompt", prompt}, {"output", text}, {"z_self", self.z}}.dump() << '\n';
  }
}

void cmd_detect(const RunConfig& cfg, const std::optional<std::string>& key_flag,
                const std::optional<std::string>& text, const std::string& input, bool ignore_prompt) {
  const auto params = watermark_params(cfg, resolve_key(key_flag));
  if (!text && input.empty()) throw ConfigError("give --text or --input");
  const auto lm = load_lm(cfg);
  const auto& vocab = lm.vocab();
  Output out(cfg.out);

  if (text) {
    out.stream() << to_json(detect(*text, vocab, params, cfg.threshold)).dump() << '\n';
    return;
  }
  std::vector<std::string> lines;
  if (input == "-") {
    lines = read_lines(std::cin);
  } else {
    require_file(input, "input");
    std::ifstream in(input);
    lines = read_lines(in);
  }
  std::size_t line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw ConfigError("input line " + std::to_string(line_no) + ": not valid JSON");
    }
    const char* field = rec.contains("output") ? "output" : "text";
    if (!rec.contains(field) || !rec[field].is_string()) {
      throw ConfigError("input line " + std::to_string(line_no) + ": expected an \"output\" or \"text\" string");
    }
    std::optional<std::string> prompt;
    if (!ignore_prompt && rec.contains("prompt") && rec["prompt"].is_string()) prompt = rec["prompt"].get<std::string>();
    const auto result = detect(rec[field].get<std::string>(), vocab, params, cfg.threshold,
                               prompt ? std::optional<std::string_view>(*prompt) : std::nullopt);
    out.stream() << to_json(result).dump() << '\n';
  }
}

void cmd_build_labels(const RunConfig& cfg) {
  require_file(cfg.corpus, "corpus");
  require_file(cfg.synonyms, "synonym table");
  if (cfg.out.empty()) throw ConfigError("--out (output directory) is required");
  const auto lm = load_lm(cfg);
  const auto corpus = read_corpus_jsonl(cfg.corpus);
  RuleParaphraser paraphraser(load_synonyms(cfg.synonyms));
  const auto ds = build_datasets(corpus, lm.vocab(), paraphraser, cfg.paraphrases, cfg.seed);
  std::filesystem::create_directories(cfg.out);
  const std::filesystem::path dir(cfg.out);
  write_labeled_jsonl(ds.classification, lm.vocab(), dir / "classification.jsonl");
  write_labeled_jsonl(ds.regression, lm.vocab(), dir / "regression.jsonl");
  std::cerr << "labeled " << ds.regression.records.size() << " documents, " << ds.regression.num_tokens()
            << " tokens, N=" << cfg.paraphrases << "\n";
}

void cmd_train_scorer(const RunConfig& cfg) {
  require_file(cfg.labels, "labeled corpus");
  if (cfg.out.empty()) throw ConfigError("--out is required");
  const auto kind = parse_scorer_kind(cfg.kind);
  const auto lm = load_lm(cfg);
  const auto data = read_labeled_jsonl(cfg.labels, lm.vocab(), kind);
  TrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.learning_rate = cfg.learning_rate;
  opts.window = cfg.window;
  opts.embedding_dim = cfg.embedding_dim;
  opts.seed = cfg.seed;
  std::vector<double> history;
  auto model = train_scorer(data, kind, lm.vocab().size(), opts, &history);
  if (cfg.r0) model.r0_default = *cfg.r0;
  model.save(cfg.out);
  std::cerr << to_string(kind) << " scorer: loss " << history.front() << " -> " << history.back() << "\n";
}

void cmd_bench(const RunConfig& cfg, const std::optional<std::string>& key_flag) {
  const auto sweep = sweep_config(cfg, resolve_key(key_flag));
  require_file(cfg.prompts, "prompt file");
  const auto lm = load_lm(cfg);
  const auto& vocab = lm.vocab();

  std::optional<HashedEmbedding> embedding;
  std::optional<ScorerModel> regression, classification;
  BenchResources res;
  res.lm = &lm;
  for (auto m : sweep.methods) {
    if (m == Method::kWisPerturbation && !embedding) {
      embedding.emplace(perturbation_embedding(cfg, vocab));
      res.embedding = &*embedding;
    }
    if (m == Method::kWisRegression && !regression) {
      require_file(cfg.regression_model, "regression scorer model");
      regression = ScorerModel::load(cfg.regression_model);
      res.regression = &*regression;
    }
    if (m == Method::kWisClassification && !classification) {
      require_file(cfg.classification_model, "classification scorer model");
      classification = ScorerModel::load(cfg.classification_model);
      res.classification = &*classification;
    }
  }

  const auto prompts = make_bench_prompts(read_corpus_jsonl(cfg.prompts), vocab, cfg.limit);
  if (prompts.empty()) throw ConfigError("prompt file has no prompts");
  const auto rows = run_sweep(sweep, res, prompts);

  Output out(cfg.out);
  write_csv(out.stream(), rows);
  std::string summary_path = cfg.summary;
  if (summary_path.empty() && !cfg.out.empty()) {
    summary_path = std::filesystem::path(cfg.out).replace_extension(".json").string();
  }
  const auto summary = summary_json(sweep, rows).dump(2);
  if (summary_path.empty()) {
    std::cerr << summary << '\n';
  } else {
    std::ofstream(summary_path) << summary << '\n';
  }
}

int run(int argc, char** argv) {
  RunConfig cfg;
  if (auto path = find_config_arg(argc, argv)) cfg = load_run_config(*path);

  CLI::App app{"Keyed greenlist watermarking with importance scoring"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::string> key_flag;
  app.add_option("--config", config_path, "JSON run config; flags override its fields");
  app.add_option("--seed", cfg.seed, "Seed for every random choice")->capture_default_str();
  auto* key_opt = app.add_option("--key", "Watermark key as hex (or set WIS_KEY)");

  // Options shared by several subcommands.
  double r0 = 0.0;
  std::size_t min_len = 0;
  std::vector<CLI::Option*> min_len_opts;
  auto watermark_flags = [&](CLI::App* sub) {
    sub->add_option("--gamma", cfg.gamma, "Greenlist fraction")->capture_default_str();
    sub->add_option("--delta", cfg.delta, "Logit boost for green tokens")->capture_default_str();
    sub->add_option("--context-width", cfg.context_width, "Prefix tokens hashed per step, or 'full'")
        ->capture_default_str();
    sub->add_option("--threshold", cfg.threshold, "z-score threshold")->capture_default_str();
    sub->add_option("--lm", cfg.lm, "Language model file (its vocabulary is used for tokenizing)");
    sub->add_option("--out", cfg.out, "Output file (default stdout)");
  };
  auto generation_flags = [&](CLI::App* sub) {
    sub->add_option("--mode", cfg.mode, "baseline or wis")->capture_default_str();
    sub->add_option("--scorer", cfg.scorer, "perturbation, regression or classification");
    sub->add_option("--scorer-model", cfg.scorer_model, "Trained scorer for regression/classification");
    sub->add_option("--window", cfg.window, "Scoring window w")->capture_default_str();
    sub->add_option("--max-len", cfg.max_len, "Tokens to generate")->capture_default_str();
    min_len_opts.push_back(sub->add_option("--min-len", min_len, "Tokens before EOS is allowed (default: max-len)"));
    sub->add_option("--beam", cfg.beam, "Beam width")->capture_default_str();
    sub->add_option("--no-repeat-ngram", cfg.no_repeat_ngram, "Block repeated n-grams (0 = off)")
        ->capture_default_str();
    sub->add_option("--corpus", cfg.corpus, "Corpus for the perturbation scorer's IDF table");
  };

  auto* train_lm = app.add_subcommand("train-lm", "Build a vocabulary and an add-k n-gram model");
  train_lm->add_option("--corpus", cfg.corpus, "JSONL corpus with a \"text\" field");
  train_lm->add_option("--vocab-size", cfg.vocab_size, "Maximum vocabulary size")->capture_default_str();
  train_lm->add_option("--order", cfg.order, "n-gram order (1-5)")->capture_default_str();
  train_lm->add_option("--k", cfg.k, "Add-k smoothing constant")->capture_default_str();
  train_lm->add_option("--out", cfg.out, "Model file; the vocabulary goes beside it as .vocab");

  std::vector<std::string> inline_prompts;
  bool raw_cosine = false;
  auto* generate = app.add_subcommand("generate", "Generate watermarked continuations as JSONL");
  watermark_flags(generate);
  generation_flags(generate);
  generate->add_option("--prompt", inline_prompts, "Prompt text (repeatable)");
  generate->add_option("--prompts", cfg.prompts, "JSONL file of prompts");
  auto* r0_gen = generate->add_option("--r0", r0, "Importance threshold");
  generate->add_flag("--raw-cosine", raw_cosine, "Score importance as cos instead of 1 - cos");

  std::optional<std::string> text;
  std::string input;
  bool ignore_prompt = false;
  auto* detect_cmd = app.add_subcommand("detect", "Score text for the watermark");
  watermark_flags(detect_cmd);
  detect_cmd->add_option("--text", text, "Text to score");
  detect_cmd->add_option("--input", input, "JSONL with \"output\" or \"text\" (and optional \"prompt\"); '-' = stdin");
  detect_cmd->add_flag("--ignore-prompt", ignore_prompt, "Do not use input prompts as greenlist context");

  auto* labels = app.add_subcommand("build-labels", "Paraphrase a corpus and write importance labels");
  labels->add_option("--corpus", cfg.corpus, "JSONL corpus");
  labels->add_option("--lm", cfg.lm, "Language model file (for its vocabulary)");
  labels->add_option("--synonyms", cfg.synonyms, "Synonym table JSON");
  labels->add_option("--paraphrases", cfg.paraphrases, "Paraphrases per document (N)")->capture_default_str();
  labels->add_option("--out", cfg.out, "Output directory");

  auto* train = app.add_subcommand("train-scorer", "Fit a regression or classification importance scorer");
  train->add_option("--labels", cfg.labels, "Labeled JSONL from build-labels");
  train->add_option("--kind", cfg.kind, "regression or classification")->capture_default_str();
  train->add_option("--lm", cfg.lm, "Language model file (for its vocabulary)");
  train->add_option("--epochs", cfg.epochs)->capture_default_str();
  train->add_option("--learning-rate", cfg.learning_rate)->capture_default_str();
  train->add_option("--window", cfg.window, "Context window w")->capture_default_str();
  train->add_option("--embedding-dim", cfg.embedding_dim)->capture_default_str();
  auto* r0_train = train->add_option("--r0", r0, "Default threshold stored with the model");
  train->add_option("--out", cfg.out, "Model file");

  auto* bench = app.add_subcommand("bench", "Sweep gamma/delta/method and report detection and quality");
  bench->add_option("--lm", cfg.lm, "Language model file");
  bench->add_option("--prompts", cfg.prompts, "JSONL with \"prompt\" and \"reference\"");
  bench->add_option("--corpus", cfg.corpus, "Corpus for the perturbation scorer's IDF table");
  bench->add_option("--gammas", cfg.gammas)->delimiter(',');
  bench->add_option("--deltas", cfg.deltas)->delimiter(',');
  bench->add_option("--methods", cfg.methods, "baseline, wis-perturbation, wis-regression, wis-classification")
      ->delimiter(',');
  auto* r0_bench = bench->add_option("--r0", r0, "Importance threshold for every WIS method");
  bench->add_option("--regression-model", cfg.regression_model);
  bench->add_option("--classification-model", cfg.classification_model);
  bench->add_option("--window", cfg.window)->capture_default_str();
  bench->add_option("--context-width", cfg.context_width)->capture_default_str();
  bench->add_option("--max-len", cfg.max_len)->capture_default_str();
  min_len_opts.push_back(bench->add_option("--min-len", min_len));
  bench->add_option("--beam", cfg.beam)->capture_default_str();
  bench->add_option("--no-repeat-ngram", cfg.no_repeat_ngram)->capture_default_str();
  bench->add_option("--threshold", cfg.threshold)->capture_default_str();
  bench->add_option("--limit", cfg.limit, "Prompts to use (0 = all)")->capture_default_str();
  bench->add_option("--out", cfg.out, "CSV file (default stdout)");
  bench->add_option("--summary", cfg.summary, "JSON summary file (default: beside --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (key_opt->count() > 0) key_flag = key_opt->as<std::string>();
  for (auto* opt : {r0_gen, r0_train, r0_bench}) {
    if (opt->count() > 0) cfg.r0 = r0;
  }
  for (auto* opt : min_len_opts) {
    if (opt->count() > 0) cfg.min_len = min_len;
  }

  if (*train_lm) cmd_train_lm(cfg);
  if (*generate) cmd_generate(cfg, key_flag, inline_prompts, raw_cosine);
  if (*detect_cmd) cmd_detect(cfg, key_flag, text, input, ignore_prompt);
  if (*labels) cmd_build_labels(cfg);
  if (*train) cmd_train_scorer(cfg);
  if (*bench) cmd_bench(cfg, key_flag);
  return 0;
}

}  // namespace
}  // namespace wis::cli

int main(int argc, char** argv) {
  try {
    return wis::cli::run(argc, argv);
  } catch (const wis::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
