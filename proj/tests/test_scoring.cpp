#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "test_support.hpp"
#include "wis/error.hpp"
#include "wis/scoring.hpp"

using namespace wis;

namespace {

class ConstantEmbedding final : public EmbeddingProvider {
 public:
  std::size_t dim() const override { return 4; }
  std::vector<double> embed(std::span<const TokenId>) const override { return {1, -2, 0.5, 3}; }
};

std::vector<double> flat_idf(std::size_t v) { return std::vector<double>(v, 1.0); }

std::vector<double> seeded_idf(std::size_t v, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(1.0, 4.0);
  std::vector<double> idf(v);
  for (auto& x : idf) x = u(rng);
  return idf;
}

Tokens random_tokens(std::mt19937& rng, std::size_t n, std::size_t v) {
  Tokens t(n);
  for (auto& id : t) id = static_cast<TokenId>(rng() % v);
  return t;
}

/// Recomputes the IDF-weighted mean from the public token vectors.
std::vector<double> mean_embedding(const HashedEmbedding& e, std::span<const TokenId> seq) {
  std::vector<double> out(e.dim(), 0.0);
  double w = 0.0;
  for (TokenId id : seq) {
    auto v = e.token_vector(id);
    for (std::size_t j = 0; j < e.dim(); ++j) out[j] += e.idf(id) * v[j];
    w += e.idf(id);
  }
  for (double& x : out) x = w > 0 ? x / w : 0.0;
  return out;
}

}  // namespace

TEST_CASE("compute_idf") {
  std::vector<Tokens> docs{{3, 4, 4}, {3}, {5}};
  auto idf = compute_idf(docs, 6);
  CHECK(idf[3] == doctest::Approx(std::log(4.0 / 3.0) + 1.0));
  CHECK(idf[4] == doctest::Approx(std::log(2.0) + 1.0));
  CHECK(idf[0] == doctest::Approx(std::log(4.0) + 1.0));
}

TEST_CASE("hashed embedding") {
  HashedEmbedding e(seeded_idf(50, 1), 256);
  auto v = e.token_vector(7);
  for (double x : v) CHECK(std::abs(std::abs(x) - 1.0 / 16.0) < 1e-15);
  HashedEmbedding again(seeded_idf(50, 1), 256);
  CHECK(std::equal(v.begin(), v.end(), again.token_vector(7).begin()));
  CHECK(e.embed(Tokens{}) == std::vector<double>(256, 0.0));
  auto single = e.embed(Tokens{7});
  CHECK(std::equal(single.begin(), single.end(), v.begin()));
  CHECK_THROWS_AS(e.token_vector(50), std::out_of_range);
  CHECK_THROWS_AS(HashedEmbedding(flat_idf(3), 0), ConfigError);
}

TEST_CASE("perturbation score edge cases") {
  ConstantEmbedding constant;
  for (TokenId c = 0; c < 10; ++c) CHECK(perturbation_score(constant, Tokens{1, 2}, c) == 0.0);

  HashedEmbedding e(flat_idf(30), 256);
  CHECK(perturbation_score(e, Tokens{}, 5) == 1.0);

  // Candidate equal to the token dominating the prefix: the score decays
  // towards zero as that token's share grows.
  double previous = 1.0;
  for (std::size_t n : {1, 4, 16, 64, 256}) {
    Tokens prefix{9, 11};
    prefix.insert(prefix.end(), n, 5);
    const double s = perturbation_score(e, prefix, 5);
    CHECK(s < previous);
    previous = s;
  }
  CHECK(previous < 1e-3);
  CHECK(perturbation_score(e, Tokens(20, 5), 5) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("perturbation score matches a hand-rolled cosine") {
  HashedEmbedding e(seeded_idf(100, 2), 256, 0x77);
  std::mt19937 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const Tokens prefix = random_tokens(rng, 10, 100);
    const TokenId cand = rng() % 100;
    Tokens ext = prefix;
    ext.push_back(cand);
    const auto a = mean_embedding(e, prefix);
    const auto b = mean_embedding(e, ext);
    double dot = 0, na = 0, nb = 0;
    for (std::size_t j = 0; j < 256; ++j) {
      dot += a[j] * b[j];
      na += a[j] * a[j];
      nb += b[j] * b[j];
    }
    const double cosine = dot / std::sqrt(na * nb);
    const double s = perturbation_score(e, prefix, cand);
    CHECK(s == doctest::Approx(1.0 - cosine).epsilon(1e-12));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(perturbation_score(e, prefix, cand, CosineMode::kRawCosine) ==
          doctest::Approx(std::clamp(cosine, 0.0, 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("windowed_score") {
  HashedEmbedding e(seeded_idf(40, 3), 64);
  PerturbationScorer f(e);
  std::mt19937 rng(11);
  const Tokens seq = random_tokens(rng, 30, 40);
  const std::span<const TokenId> s(seq);

  for (std::size_t t = 1; t <= 30; ++t) {
    // w >= t clips to the whole prefix.
    CHECK(windowed_score(f, s, t, 64) == f.score(s.first(t - 1), seq[t - 1]));
    if (t >= 2) CHECK(windowed_score(f, s, t, 1) == f.score(s.subspan(t - 2, 1), seq[t - 1]));
  }

  // w = 16 and w = 10 disagree exactly when the extra six tokens move the
  // prefix embedding.
  for (std::size_t t = 1; t <= 30; ++t) {
    const std::size_t end = t - 1;
    const auto p16 = s.subspan(end > 16 ? end - 16 : 0, std::min<std::size_t>(end, 16));
    const auto p10 = s.subspan(end > 10 ? end - 10 : 0, std::min<std::size_t>(end, 10));
    const bool embed_changed = e.embed(p16) != e.embed(p10);
    const double a = windowed_score(f, s, t, 16);
    const double b = windowed_score(f, s, t, 10);
    if (!embed_changed) CHECK(a == b);
    if (embed_changed) CHECK(std::abs(a - b) > 0.0);
  }

  WindowedScorer w16(f, 16);
  for (std::size_t t = 1; t <= 30; ++t) CHECK(w16.score(s.first(t - 1), seq[t - 1]) == windowed_score(f, s, t, 16));
  CHECK_THROWS_AS(windowed_score(f, s, 0, 4), std::out_of_range);
  CHECK_THROWS_AS(windowed_score(f, s, 31, 4), std::out_of_range);
  CHECK_THROWS_AS(WindowedScorer(f, 0), ConfigError);
}

TEST_CASE("important gate is monotone in r0") {
  auto corpus = read_corpus_jsonl(wis::testing::data_path("sample_corpus.jsonl"));
  corpus.resize(20);
  auto vocab = build_vocab(corpus, 5000);
  std::vector<Tokens> docs;
  for (const auto& d : corpus) docs.push_back(tokenize(d.text, vocab));
  HashedEmbedding e(compute_idf(docs, vocab.size()), 256);
  PerturbationScorer p(e);
  WindowedScorer f(p, 16);

  std::size_t previous = 0;
  for (double r0 : {0.5, 0.1, 0.02, 0.0}) {
    std::size_t boosted = 0, positions = 0;
    for (const auto& doc : docs) {
      for (std::size_t t = 0; t < doc.size(); ++t) {
        boosted += important(f, std::span<const TokenId>(doc).first(t), doc[t], r0);
        ++positions;
      }
    }
    CHECK(boosted >= previous);
    if (r0 == 0.0) CHECK(boosted == positions);
    previous = boosted;
  }
  HashedEmbedding flat(flat_idf(10), 16);
  PerturbationScorer g(flat);
  CHECK(important(g, Tokens{}, 3, 1.0));  // empty prefix scores exactly 1
}

TEST_CASE("model scorer") {
  FeatureSpec spec;
  spec.embedding_dim = 32;
  spec.window = 8;
  spec.idf = seeded_idf(60, 4);
  ScorerModel m;
  m.features = spec;

  CHECK_THROWS_AS(model_score(m, Tokens{1}, 2), std::logic_error);

  m.weights.assign(spec.dimension(), 0.0);
  std::mt19937 rng(12);
  for (int i = 0; i < 50; ++i) CHECK(model_score(m, random_tokens(rng, rng() % 12, 60), rng() % 60) == 0.5);

  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto& w : m.weights) w = normal(rng);
  m.bias = -0.2;
  ModelScorer scorer(m);
  HashedEmbedding e(spec.idf, spec.embedding_dim, spec.embedding_key);
  const double max_idf = *std::max_element(spec.idf.begin(), spec.idf.end());
  const Tokens eval = random_tokens(rng, 1000, 60);
  for (std::size_t t = 0; t < eval.size(); ++t) {
    const auto prefix = std::span<const TokenId>(eval).first(t);
    const auto ctx = prefix.last(std::min<std::size_t>(8, t));
    // Independent linear model: z = w_c . v(cand) + w_x . mean(ctx) + w_i idf + w_p pos + b.
    double z = m.bias;
    auto cv = e.token_vector(eval[t]);
    auto mv = mean_embedding(e, ctx);
    for (std::size_t j = 0; j < 32; ++j) z += m.weights[j] * cv[j] + m.weights[32 + j] * mv[j];
    z += m.weights[64] * spec.idf[eval[t]] / max_idf;
    z += m.weights[65] * static_cast<double>(ctx.size() + 1) / 9.0;
    const double expected = 1.0 / (1.0 + std::exp(-z));
    CHECK(std::abs(scorer.score(prefix, eval[t]) - expected) < 1e-9);
  }

  auto dir = wis::testing::scratch_dir("scoring");
  m.kind = ScorerKind::kClassification;
  m.r0_default = default_r0(m.kind);
  m.save(dir / "m.json");
  auto back = ScorerModel::load(dir / "m.json");
  CHECK(back.kind == ScorerKind::kClassification);
  CHECK(back.weights == m.weights);
  CHECK(back.features.idf == m.features.idf);
  CHECK(back.features.embedding_key == m.features.embedding_key);
  CHECK(back.r0_default == 0.5);
  CHECK_THROWS_AS(ScorerModel::load(dir / "missing.json"), ConfigError);
  CHECK_THROWS_AS(parse_scorer_kind("ranking"), ConfigError);
}

TEST_CASE("sigmoid is stable") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(-3.0) == doctest::Approx(1.0 / (1.0 + std::exp(3.0))));
}
