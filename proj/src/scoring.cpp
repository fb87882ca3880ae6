#include "wis/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "wis/error.hpp"
#include "wis/hash.hpp"

namespace wis {

std::vector<double> compute_idf(std::span<const Tokens> documents, std::size_t vocab_size) {
  std::vector<std::size_t> df(vocab_size, 0);
  std::vector<std::size_t> last_seen(vocab_size, 0);
  std::size_t doc_no = 0;
  for (const auto& doc : documents) {
    ++doc_no;
    for (TokenId id : doc) {
      if (id >= vocab_size) throw std::out_of_range("id out of range");
      if (last_seen[id] != doc_no) {
        last_seen[id] = doc_no;
        ++df[id];
      }
    }
  }
  const double n = static_cast<double>(documents.size());
  std::vector<double> idf(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    idf[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
  }
  return idf;
}

HashedEmbedding::HashedEmbedding(std::vector<double> idf, std::size_t dim, std::uint64_t key)
    : idf_(std::move(idf)), dim_(dim), key_(key) {
  if (dim_ == 0) throw ConfigError("embedding dimension must be >= 1");
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  vectors_.resize(idf_.size() * dim_);
  for (std::size_t tok = 0; tok < idf_.size(); ++tok) {
    const std::uint64_t tok_state = absorb(mix64(key_), tok);
    double* row = vectors_.data() + tok * dim_;
    std::uint64_t bits = 0;
    for (std::size_t j = 0; j < dim_; ++j) {
      if (j % 64 == 0) bits = absorb(tok_state, j / 64);
      row[j] = ((bits >> (j % 64)) & 1U) ? scale : -scale;
    }
  }
}

std::span<const double> HashedEmbedding::token_vector(TokenId id) const {
  if (id >= idf_.size()) throw std::out_of_range("id out of range");
  return {vectors_.data() + static_cast<std::size_t>(id) * dim_, dim_};
}

std::vector<double> HashedEmbedding::embed(std::span<const TokenId> seq) const {
  std::vector<double> out(dim_, 0.0);
  double total = 0.0;
  for (TokenId id : seq) {
    const auto vec = token_vector(id);
    const double w = idf_[id];
    for (std::size_t j = 0; j < dim_; ++j) out[j] += w * vec[j];
    total += w;
  }
  if (total > 0.0) {
    for (double& x : out) x /= total;
  }
  return out;
}

double perturbation_score(const EmbeddingProvider& phi, std::span<const TokenId> prefix, TokenId candidate,
                          CosineMode mode) {
  Tokens extended(prefix.begin(), prefix.end());
  extended.push_back(candidate);
  const auto a = phi.embed(prefix);
  const auto b = phi.embed(extended);
  const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  const double na = std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
  const double nb = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
  const double cosine = (na == 0.0 || nb == 0.0) ? 0.0 : dot / (na * nb);
  const double s = mode == CosineMode::kDissimilarity ? 1.0 - cosine : cosine;
  return std::clamp(s, 0.0, 1.0);
}

WindowedScorer::WindowedScorer(const ImportanceScorer& inner, std::size_t window)
    : inner_(inner), window_(window) {
  if (window_ < 1) throw ConfigError("window must be >= 1");
}

double WindowedScorer::score(std::span<const TokenId> prefix, TokenId candidate) const {
  return inner_.score(prefix.last(std::min(window_, prefix.size())), candidate);
}

double windowed_score(const ImportanceScorer& f, std::span<const TokenId> seq, std::size_t t, std::size_t w) {
  if (t < 1 || t > seq.size()) throw std::out_of_range("position out of range");
  if (w < 1) throw ConfigError("window must be >= 1");
  const std::size_t end = t - 1;
  const std::size_t begin = end > w ? end - w : 0;
  return f.score(seq.subspan(begin, end - begin), seq[t - 1]);
}

bool important(const ImportanceScorer& f, std::span<const TokenId> prefix, TokenId candidate, double r0) {
  return f.score(prefix, candidate) >= r0;
}

ScorerKind parse_scorer_kind(const std::string& name) {
  if (name == "regression") return ScorerKind::kRegression;
  if (name == "classification") return ScorerKind::kClassification;
  throw ConfigError("unknown scorer kind '" + name + "' (expected regression|classification)");
}

std::string to_string(ScorerKind kind) {
  return kind == ScorerKind::kRegression ? "regression" : "classification";
}

double default_r0(ScorerKind kind) { return kind == ScorerKind::kRegression ? 0.9 : 0.5; }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

FeatureExtractor::FeatureExtractor(const FeatureSpec& spec)
    : embedding_(spec.idf, spec.embedding_dim, spec.embedding_key),
      window_(spec.window),
      dimension_(spec.dimension()),
      max_idf_(spec.idf.empty() ? 1.0 : *std::max_element(spec.idf.begin(), spec.idf.end())) {
  if (window_ < 1) throw ConfigError("feature_spec.window must be >= 1");
  if (spec.idf.empty()) throw ConfigError("feature_spec.idf must not be empty");
}

void FeatureExtractor::extract(std::span<const TokenId> prefix, TokenId candidate, std::span<double> out) const {
  if (out.size() != dimension_) throw std::invalid_argument("feature buffer has wrong size");
  const std::size_t d = embedding_.dim();
  const auto cand = embedding_.token_vector(candidate);
  std::copy(cand.begin(), cand.end(), out.begin());
  const auto ctx = prefix.last(std::min(window_, prefix.size()));
  const auto ctx_vec = embedding_.embed(ctx);
  std::copy(ctx_vec.begin(), ctx_vec.end(), out.begin() + static_cast<std::ptrdiff_t>(d));
  out[2 * d] = embedding_.idf(candidate) / max_idf_;
  out[2 * d + 1] = static_cast<double>(ctx.size() + 1) / static_cast<double>(window_ + 1);
}

std::vector<double> FeatureExtractor::extract(std::span<const TokenId> prefix, TokenId candidate) const {
  std::vector<double> out(dimension_);
  extract(prefix, candidate, out);
  return out;
}

nlohmann::json model_to_json(const ScorerModel& model) {
  char key[17];
  std::snprintf(key, sizeof key, "%016llx", static_cast<unsigned long long>(model.features.embedding_key));
  return {
      {"kind", to_string(model.kind)},
      {"feature_spec",
       {{"embedding_dim", model.features.embedding_dim},
        {"window", model.features.window},
        {"embedding_key", key},
        {"idf", model.features.idf}}},
      {"weights", model.weights},
      {"bias", model.bias},
      {"r0_default", model.r0_default},
  };
}

ScorerModel model_from_json(const nlohmann::json& j) {
  ScorerModel m;
  try {
    m.kind = parse_scorer_kind(j.at("kind").get<std::string>());
    const auto& fs = j.at("feature_spec");
    m.features.embedding_dim = fs.at("embedding_dim").get<std::size_t>();
    m.features.window = fs.at("window").get<std::size_t>();
    m.features.embedding_key = std::stoull(fs.at("embedding_key").get<std::string>(), nullptr, 16);
    m.features.idf = fs.at("idf").get<std::vector<double>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.r0_default = j.value("r0_default", default_r0(m.kind));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scorer model: ") + e.what());
  }
  if (!m.weights.empty() && m.weights.size() != m.features.dimension()) {
    throw ConfigError("scorer model: weights length does not match feature_spec");
  }
  return m;
}

ScorerModel ScorerModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scorer model: " + path.string());
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("scorer model " + path.string() + ": " + e.what());
  }
}

void ScorerModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scorer model: " + path.string());
  out << model_to_json(*this).dump() << '\n';
}

double model_score(const ScorerModel& model, std::span<const TokenId> prefix, TokenId candidate) {
  if (!model.trained()) throw std::logic_error("untrained model");
  return ModelScorer(model).score(prefix, candidate);
}

ModelScorer::ModelScorer(ScorerModel model) : model_(std::move(model)), extractor_(model_.features) {}

double ModelScorer::score(std::span<const TokenId> prefix, TokenId candidate) const {
  if (!model_.trained()) throw std::logic_error("untrained model");
  const auto x = extractor_.extract(prefix, candidate);
  const double z = std::inner_product(x.begin(), x.end(), model_.weights.begin(), model_.bias);
  return std::clamp(sigmoid(z), 0.0, 1.0);
}

}  // namespace wis
