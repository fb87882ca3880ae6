#include <doctest.h>

#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "wis/bench.hpp"
#include "wis/error.hpp"

using namespace wis;

namespace {

struct Fixture {
  Corpus corpus;
  Vocabulary vocab;
  NGramLM lm;
  HashedEmbedding phi;
  std::vector<BenchPrompt> prompts;

  static Fixture make(std::size_t n_prompts) {
    auto corpus = read_corpus_jsonl(wis::testing::data_path("sample_corpus.jsonl"));
    auto vocab = build_vocab(corpus, 20000);
    auto lm = NGramLM::train(corpus, vocab, 3, 0.05);
    std::vector<Tokens> docs;
    for (const auto& d : corpus) docs.push_back(tokenize(d.text, vocab));
    HashedEmbedding phi(compute_idf(docs, vocab.size()), 64);
    auto pc = read_corpus_jsonl(wis::testing::data_path("sample_prompts.jsonl"));
    auto prompts = make_bench_prompts(pc, vocab, n_prompts);
    return {std::move(corpus), std::move(vocab), std::move(lm), std::move(phi), std::move(prompts)};
  }
};

SweepConfig small_config() {
  SweepConfig c;
  c.key = 0xabc;
  c.max_len = c.min_len = 40;
  c.context_width = kFullPrefix;
  return c;
}

}  // namespace

TEST_CASE("rouge1") {
  auto v = build_vocab(wis::testing::corpus_of({"the cat sat ran on mat dog"}), 20);
  auto ids = [&](const std::string& s) { return tokenize(s, v); };
  auto r = rouge1(ids("the cat sat"), ids("the cat ran"));
  CHECK(r.precision == doctest::Approx(2.0 / 3));
  CHECK(r.recall == doctest::Approx(2.0 / 3));
  CHECK(r.f1 == doctest::Approx(2.0 / 3));
  auto same = rouge1(ids("the cat sat"), ids("the cat sat"));
  CHECK(same.f1 == 1.0);
  CHECK(rouge1(ids("dog mat"), ids("the cat")).f1 == 0.0);
  // Clipped counts: a repeated word matches once per reference occurrence.
  auto clipped = rouge1(ids("the the the"), ids("the cat"));
  CHECK(clipped.precision == doctest::Approx(1.0 / 3));
  CHECK(clipped.recall == doctest::Approx(0.5));
  CHECK(rouge1(Tokens{}, ids("the")).f1 == 0.0);
  CHECK_THROWS_AS(rouge1(ids("the"), Tokens{}), std::invalid_argument);
}

TEST_CASE("methods and config validation") {
  for (auto m : {Method::kBaseline, Method::kWisPerturbation, Method::kWisRegression, Method::kWisClassification}) {
    CHECK(parse_method(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("wis"), ConfigError);
  SweepConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.r0_for(Method::kWisPerturbation) == 0.02);
  CHECK(c.r0_for(Method::kWisRegression) == 0.9);
  CHECK(c.r0_for(Method::kWisClassification) == 0.5);
  c.r0[Method::kWisPerturbation] = 0.1;
  CHECK(c.r0_for(Method::kWisPerturbation) == 0.1);
  c.deltas.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("detection_rate extremes") {
  auto fx = Fixture::make(60);
  auto cfg = small_config();
  cfg.max_len = cfg.min_len = 100;
  auto plain = unwatermarked_generations(cfg, fx.lm, fx.prompts);
  WatermarkParams p;
  p.key = cfg.key;
  p.context_width = cfg.context_width;
  CHECK(detection_rate(plain, p) == 0.0);

  GenerationOptions opts;
  opts.max_new_tokens = opts.min_new_tokens = 100;
  opts.beam_width = 2;
  opts.suppress = default_suppressed_ids();
  std::vector<TokenSeq> strong, zero;
  for (const auto& bp : fx.prompts) {
    p.delta = 1e3;
    strong.push_back(generate_watermarked(fx.lm, p, std::nullopt, bp.prompt, opts).seq);
    p.delta = 0.0;
    zero.push_back(generate_watermarked(fx.lm, p, std::nullopt, bp.prompt, opts).seq);
  }
  CHECK(detection_rate(strong, p) == 1.0);
  CHECK(detection_rate(zero, p) == detection_rate(plain, p));
}

TEST_CASE("null detection rate over 500 unwatermarked texts") {
  auto fx = Fixture::make(500);
  REQUIRE(fx.prompts.size() == 500);
  auto cfg = small_config();
  cfg.max_len = cfg.min_len = 100;
  cfg.beam_width = 1;
  auto plain = unwatermarked_generations(cfg, fx.lm, fx.prompts);
  for (std::uint64_t key : {1ULL, 2ULL}) {
    WatermarkParams p;
    p.key = key;
    p.context_width = kFullPrefix;
    CHECK(detection_rate(plain, p) == 0.0);
  }
}

TEST_CASE("sweep cells") {
  auto fx = Fixture::make(30);
  auto cfg = small_config();
  BenchResources res{&fx.lm, &fx.phi, nullptr, nullptr};
  auto plain = unwatermarked_generations(cfg, fx.lm, fx.prompts);

  auto zero = run_cell(cfg, res, fx.prompts, plain, 0.25, 0.0, Method::kBaseline);
  CHECK(zero.detection_rate == 0.0);
  CHECK(zero.rouge1_self == 1.0);
  CHECK(zero.n_samples == 30);
  CHECK(zero.rouge1_ref > 0.0);

  cfg.deltas = {0.0, 2.0};
  cfg.methods = {Method::kBaseline, Method::kWisPerturbation};
  cfg.gammas = {0.25, 0.5};
  auto rows = run_sweep(cfg, res, fx.prompts);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].gamma == 0.25);
  CHECK(rows[0].method == Method::kBaseline);
  CHECK(rows[0].delta == 0.0);
  CHECK(rows[1].delta == 2.0);
  CHECK(rows[2].method == Method::kWisPerturbation);
  CHECK(rows[4].gamma == 0.5);
  CHECK(rows[0].rouge1_self == zero.rouge1_self);
  for (const auto& r : rows) {
    CHECK(r.detection_rate >= 0.0);
    CHECK(r.detection_rate <= 1.0);
  }

  auto again = run_sweep(cfg, res, fx.prompts);
  std::ostringstream a, b;
  write_csv(a, rows);
  write_csv(b, again);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("gamma,delta,method,detection_rate,rouge1_ref,rouge1_self,mean_z,n_samples\n", 0) == 0);
  CHECK(a.str().find("0.25,2,wis-perturbation,") != std::string::npos);

  auto summary = summary_json(cfg, rows);
  CHECK(summary.dump().find("key") == std::string::npos);

  cfg.methods = {Method::kWisRegression};
  CHECK_THROWS_AS(run_sweep(cfg, res, fx.prompts), ConfigError);
}
