#include "wis/labeling.hpp"

#include <algorithm>
#include <iterator>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "wis/error.hpp"
#include "wis/hash.hpp"

namespace wis {
namespace {

constexpr std::string_view kStopwords[] = {
    "a",     "about", "after", "all",  "also",  "an",    "and",   "are",  "as",    "at",   "be",
    "been",  "but",   "by",    "can",  "could", "did",   "do",    "for",  "from",  "had",  "has",
    "have",  "he",    "her",   "his",  "i",     "if",    "in",    "into", "is",    "it",   "its",
    "more",  "not",   "of",    "on",   "or",    "our",   "she",   "so",   "than",  "that", "the",
    "their", "them",  "then",  "there", "these", "they", "this",  "to",   "was",   "we",   "were",
    "what",  "when",  "which", "who",  "will",  "with",  "would", "you",  "your",
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

}  // namespace

bool is_stopword(std::string_view word) {
  return std::find(std::begin(kStopwords), std::end(kStopwords), word) != std::end(kStopwords);
}

SynonymTable load_synonyms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synonym table: " + path.string());
  try {
    return nlohmann::json::parse(in).get<SynonymTable>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("synonym table " + path.string() + ": " + e.what());
  }
}

RuleParaphraser::RuleParaphraser(SynonymTable synonyms, RuleParaphraserOptions options)
    : synonyms_(std::move(synonyms)), options_(options) {
  for (double p : {options_.synonym_p, options_.stopword_dropout_p, options_.swap_p}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("paraphrase probabilities must be in [0, 1]");
  }
}

std::vector<std::string> RuleParaphraser::paraphrase(std::string_view text, std::size_t n,
                                                     std::uint64_t seed) const {
  const auto words = split_words(text);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SplitMix64 rng(absorb(mix64(seed), i));
    std::vector<std::string> result;
    result.reserve(words.size());
    for (const auto& w : words) {
      // Draw every variate unconditionally so a word's fate never depends on
      // which branches earlier words took.
      const double u_syn = rng.uniform();
      const std::uint64_t pick = rng.next();
      const double u_drop = rng.uniform();
      if (is_stopword(w) && u_drop < options_.stopword_dropout_p) continue;
      auto it = synonyms_.find(w);
      if (it != synonyms_.end() && !it->second.empty() && u_syn < options_.synonym_p) {
        result.push_back(it->second[pick % it->second.size()]);
      } else {
        result.push_back(w);
      }
    }
    for (std::size_t j = 0; j + 1 < result.size(); ++j) {
      if (rng.uniform() < options_.swap_p) {
        std::swap(result[j], result[j + 1]);
        ++j;
      }
    }
    out.push_back(join(result));
  }
  return out;
}

std::vector<std::string> paraphrase_n(const ParaphraseOracle& oracle, std::string_view text, std::size_t n,
                                      std::uint64_t seed) {
  if (n < 1) throw ConfigError("N must be >= 1");
  auto out = oracle.paraphrase(text, n, seed);
  if (out.size() != n) throw std::logic_error("paraphrase oracle returned the wrong number of texts");
  return out;
}

std::vector<std::size_t> count_appearances(std::span<const TokenId> s, std::span<const Tokens> paraphrases) {
  std::vector<std::size_t> counts(s.size(), 0);
  for (const auto& para : paraphrases) {
    const std::unordered_set<TokenId> present(para.begin(), para.end());
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (present.count(s[t]) != 0) ++counts[t];
    }
  }
  return counts;
}

double LabeledCorpus::label(const LabeledRecord& record, std::size_t t) const {
  const std::size_t n = record.counts.at(t);
  if (kind == ScorerKind::kClassification) return n > 0 ? 1.0 : 0.0;
  return static_cast<double>(n) / static_cast<double>(paraphrase_count);
}

std::size_t LabeledCorpus::num_tokens() const {
  std::size_t total = 0;
  for (const auto& r : records) total += r.tokens.size();
  return total;
}

LabeledDatasets build_datasets(const Corpus& corpus, const Vocabulary& vocab, const ParaphraseOracle& oracle,
                               std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("N must be >= 1");
  LabeledDatasets out;
  out.classification.kind = ScorerKind::kClassification;
  out.regression.kind = ScorerKind::kRegression;
  out.classification.paraphrase_count = out.regression.paraphrase_count = n;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    LabeledRecord rec;
    rec.tokens = tokenize(corpus[i].text, vocab);
    if (rec.tokens.empty()) continue;
    std::vector<Tokens> paras;
    for (const auto& p : paraphrase_n(oracle, corpus[i].text, n, absorb(seed, i))) {
      paras.push_back(tokenize(p, vocab));
    }
    rec.counts = count_appearances(rec.tokens, paras);
    out.classification.records.push_back(rec);
    out.regression.records.push_back(std::move(rec));
  }
  return out;
}

void write_labeled_jsonl(const LabeledCorpus& corpus, const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write labeled corpus: " + path.string());
  for (const auto& rec : corpus.records) {
    std::vector<std::string> toks;
    toks.reserve(rec.tokens.size());
    for (TokenId id : rec.tokens) toks.push_back(vocab.token_of(id));
    nlohmann::json j = {{"tokens", toks}, {"counts", rec.counts}, {"N", corpus.paraphrase_count}};
    out << j.dump() << '\n';
  }
}

LabeledCorpus read_labeled_jsonl(const std::filesystem::path& path, const Vocabulary& vocab, ScorerKind kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open labeled corpus: " + path.string());
  LabeledCorpus corpus;
  corpus.kind = kind;
  std::size_t lineno = 0;
  bool have_n = false;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      LabeledRecord rec;
      for (const auto& tok : j.at("tokens")) rec.tokens.push_back(vocab.id_of(tok.get<std::string>()));
      rec.counts = j.at("counts").get<std::vector<std::size_t>>();
      const auto n = j.at("N").get<std::size_t>();
      if (have_n && n != corpus.paraphrase_count) throw ConfigError(where + "inconsistent N");
      if (n < 1) throw ConfigError(where + "N must be >= 1");
      corpus.paraphrase_count = n;
      have_n = true;
      if (rec.counts.size() != rec.tokens.size()) throw ConfigError(where + "counts length != tokens length");
      if (std::any_of(rec.counts.begin(), rec.counts.end(), [n](std::size_t c) { return c > n; })) {
        throw ConfigError(where + "count exceeds N");
      }
      corpus.records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + e.what());
    }
  }
  return corpus;
}

TrainingData make_training_data(const LabeledCorpus& corpus, const FeatureExtractor& extractor) {
  TrainingData data;
  data.dimension = extractor.dimension();
  const std::size_t rows = corpus.num_tokens();
  data.features.resize(rows * data.dimension);
  data.labels.reserve(rows);
  std::size_t r = 0;
  for (const auto& rec : corpus.records) {
    const std::span<const TokenId> toks(rec.tokens);
    for (std::size_t t = 0; t < toks.size(); ++t, ++r) {
      extractor.extract(toks.first(t), toks[t],
                        std::span<double>(data.features.data() + r * data.dimension, data.dimension));
      data.labels.push_back(corpus.label(rec, t));
    }
  }
  return data;
}

namespace {

double linear(std::span<const double> params, std::span<const double> x) {
  return std::inner_product(x.begin(), x.end(), params.begin(), params[x.size()]);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_shapes(std::span<const double> params, const TrainingData& data) {
  if (params.size() != data.dimension + 1) throw std::invalid_argument("parameter vector has wrong size");
  if (data.rows() == 0) throw std::invalid_argument("empty dataset");
}

}  // namespace

double glm_loss(ScorerKind kind, std::span<const double> params, const TrainingData& data) {
  check_shapes(params, data);
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const double z = linear(params, data.row(i));
    const double y = data.labels[i];
    if (kind == ScorerKind::kRegression) {
      const double diff = sigmoid(z) - y;
      total += 0.5 * diff * diff;
    } else {
      total += softplus(z) - y * z;
    }
  }
  return total / static_cast<double>(data.rows());
}

std::vector<double> glm_gradient(ScorerKind kind, std::span<const double> params, const TrainingData& data) {
  check_shapes(params, data);
  std::vector<double> grad(params.size(), 0.0);
  const std::size_t d = data.dimension;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto x = data.row(i);
    const double p = sigmoid(linear(params, x));
    const double y = data.labels[i];
    const double g = kind == ScorerKind::kRegression ? (p - y) * p * (1.0 - p) : p - y;
    for (std::size_t j = 0; j < d; ++j) grad[j] += g * x[j];
    grad[d] += g;
  }
  for (double& g : grad) g /= static_cast<double>(data.rows());
  return grad;
}

ScorerModel train_scorer(const LabeledCorpus& dataset, ScorerKind kind, std::size_t vocab_size,
                         const TrainOptions& options, std::vector<double>* loss_history) {
  if (dataset.records.empty() || dataset.num_tokens() == 0) throw ConfigError("empty dataset");
  if (!(options.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");

  std::vector<Tokens> docs;
  docs.reserve(dataset.records.size());
  for (const auto& rec : dataset.records) docs.push_back(rec.tokens);

  ScorerModel model;
  model.kind = kind;
  model.r0_default = default_r0(kind);
  model.features.embedding_dim = options.embedding_dim;
  model.features.window = options.window;
  model.features.idf = compute_idf(docs, vocab_size);

  LabeledCorpus labeled = dataset;
  labeled.kind = kind;
  const FeatureExtractor extractor(model.features);
  const auto data = make_training_data(labeled, extractor);

  std::vector<double> params(data.dimension + 1, 0.0);
  SplitMix64 rng(options.seed);
  for (std::size_t j = 0; j < data.dimension; ++j) params[j] = 0.02 * (rng.uniform() - 0.5);

  if (loss_history) loss_history->clear();
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    if (loss_history) loss_history->push_back(glm_loss(kind, params, data));
    const auto grad = glm_gradient(kind, params, data);
    for (std::size_t j = 0; j < params.size(); ++j) params[j] -= options.learning_rate * grad[j];
  }
  if (loss_history) loss_history->push_back(glm_loss(kind, params, data));

  model.bias = params.back();
  params.pop_back();
  model.weights = std::move(params);
  return model;
}

}  // namespace wis
