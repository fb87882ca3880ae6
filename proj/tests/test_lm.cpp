#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "test_support.hpp"
#include "wis/error.hpp"
#include "wis/hash.hpp"
#include "wis/lm.hpp"

using namespace wis;
using wis::testing::corpus_of;

namespace {

/// Pseudorandom logits that depend on the whole prefix.
class HashedProvider final : public LogitsProvider {
 public:
  explicit HashedProvider(std::size_t v, std::uint64_t seed = 3) : v_(v), seed_(seed) {}
  std::size_t vocab_size() const override { return v_; }
  LogitsVector logits(std::span<const TokenId> prefix) const override {
    std::uint64_t h = mix64(seed_);
    for (TokenId id : prefix) h = absorb(h, id);
    LogitsVector out(v_);
    for (std::size_t i = 0; i < v_; ++i) out[i] = 4.0 * unit_interval(absorb(h, i)) - 2.0;
    return out;
  }

 private:
  std::size_t v_;
  std::uint64_t seed_;
};

double sequence_logprob(const LogitsProvider& p, const Tokens& prompt, const Tokens& gen) {
  Tokens seq = prompt;
  double total = 0.0;
  for (TokenId t : gen) {
    total += log_softmax(p.logits(seq))[t];
    seq.push_back(t);
  }
  return total;
}

std::vector<std::string> sample_docs(std::size_t n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  const std::vector<std::string> words{"the", "cat", "dog", "sat", "ran", "on", "a", "mat", "log", "."};
  std::vector<std::string> docs;
  for (std::size_t d = 0; d < n; ++d) {
    std::string s;
    for (std::size_t i = 0, len = 3 + rng() % 10; i < len; ++i) s += words[rng() % words.size()] + " ";
    docs.push_back(s);
  }
  return docs;
}

}  // namespace

TEST_CASE("train_ngram tallies order-grams") {
  auto c = corpus_of({"a b", "a b"});
  auto v = build_vocab(c, 10);
  auto lm = NGramLM::train(c, v, 2, 0.5);
  const TokenId a = v.id_of("a"), b = v.id_of("b");
  CHECK(lm.count(Tokens{a}, b) == 2);
  CHECK(lm.count(Tokens{kBos}, a) == 2);
  CHECK(lm.count(Tokens{b}, kEos) == 2);
  CHECK(lm.count(Tokens{b}, a) == 0);
  CHECK_THROWS_AS(NGramLM::train({}, v, 2, 0.5), ConfigError);
  CHECK_THROWS_AS(NGramLM::train(c, v, 0, 0.5), ConfigError);
  CHECK_THROWS_AS(NGramLM::train(c, v, 6, 0.5), ConfigError);
  CHECK_THROWS_AS(NGramLM::train(c, v, 2, 0.0), ConfigError);
}

TEST_CASE("logits of an unseen context are uniform") {
  auto c = corpus_of({"x"});
  auto v = build_vocab(c, 4);
  auto lm = NGramLM::train(c, v, 2, 0.5);
  auto p = softmax(lm.logits(Tokens{kEos}));
  REQUIRE(p.size() == 4);
  for (double x : p) CHECK(x == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("add-k arithmetic: count 2, k = 1, |V| = 4 gives 3/6") {
  auto c = corpus_of({"b", "b"});
  auto v = build_vocab(c, 4);
  auto lm = NGramLM::train(c, v, 2, 1.0);
  auto p = softmax(lm.logits(Tokens{}));  // empty prefix pads to [BOS]
  CHECK(p[v.id_of("b")] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p[kEos] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("n-gram probabilities match a brute-force count-and-normalise") {
  for (std::size_t order : {1, 2, 3}) {
    const auto docs = sample_docs(50, 5 + static_cast<std::uint32_t>(order));
    auto c = corpus_of(docs);
    auto v = build_vocab(c, 100);
    const double k = 0.5;
    auto lm = NGramLM::train(c, v, order, k);

    // Independent tally over the padded token stream, using the split words
    // directly rather than the model's tokenizer output.
    std::map<std::vector<std::string>, std::map<std::string, double>> tally;
    for (const auto& d : docs) {
      std::vector<std::string> padded(order - 1, "<s>");
      std::istringstream is(d);
      for (std::string w; is >> w;) padded.push_back(w);
      padded.push_back("</s>");
      for (std::size_t i = order - 1; i < padded.size(); ++i) {
        std::vector<std::string> ctx(padded.begin() + static_cast<long>(i - (order - 1)), padded.begin() + static_cast<long>(i));
        tally[ctx][padded[i]] += 1.0;
      }
    }
    for (const auto& [ctx, next] : tally) {
      double total = 0.0;
      for (const auto& [w, n] : next) total += n;
      Tokens ctx_ids;
      for (const auto& w : ctx) ctx_ids.push_back(v.id_of(w));
      const auto p = softmax(lm.logits(ctx_ids));
      double sum = 0.0;
      for (TokenId id = 0; id < v.size(); ++id) {
        auto it = next.find(v.token_of(id));
        const double n = it == next.end() ? 0.0 : it->second;
        const double expected = (n + k) / (total + k * static_cast<double>(v.size()));
        CHECK(p[id] == doctest::Approx(expected).epsilon(1e-12));
        sum += p[id];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax of logits is a distribution for random prefixes") {
  auto c = corpus_of(sample_docs(30, 9));
  auto v = build_vocab(c, 100);
  auto lm = NGramLM::train(c, v, 3, 0.5);
  std::mt19937 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    Tokens prefix(rng() % 6);
    for (auto& id : prefix) id = static_cast<TokenId>(rng() % v.size());
    const auto logits = lm.logits(prefix);
    REQUIRE(logits.size() == v.size());
    const auto p = softmax(logits);
    double sum = 0.0;
    for (double x : p) {
      CHECK(x > 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("argmax_token") {
  CHECK(argmax_token(std::vector<double>{0, 3, 1}) == 1);
  CHECK(argmax_token(std::vector<double>{2, 2, 0}) == 0);
  std::mt19937 rng(2);
  std::uniform_int_distribution<int> small(0, 5);  // many ties
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(1 + rng() % 20);
    for (auto& e : x) e = small(rng);
    TokenId best = 0;
    for (TokenId i = 1; i < x.size(); ++i) {
      if (x[i] > x[best]) best = i;
    }
    CHECK(argmax_token(x) == best);
  }
}

TEST_CASE("beam width 1 with identity transform is greedy decoding") {
  HashedProvider p(7);
  GenerationOptions opts;
  opts.beam_width = 1;
  opts.max_new_tokens = 12;
  opts.eos = std::nullopt;
  const Tokens prompt{3, 4};
  auto gen = beam_generate(p, identity_transform(), prompt, opts);

  Tokens greedy = prompt;
  for (int i = 0; i < 12; ++i) greedy.push_back(argmax_token(p.logits(greedy)));
  CHECK(gen.seq.ids == greedy);
  CHECK(gen.seq.prompt_len == 2);
}

TEST_CASE("adding a constant to every logit never changes beam output") {
  HashedProvider p(6, 17);
  for (std::size_t width : {1, 2, 3}) {
    GenerationOptions opts;
    opts.beam_width = width;
    opts.max_new_tokens = 15;
    auto base = beam_generate(p, identity_transform(), Tokens{2}, opts);
    for (double c : {-5.0, 0.5, 7.25}) {
      LogitTransform shift = [c](LogitsVector l, std::span<const TokenId>) {
        for (double& x : l) x += c;
        return StepLogits{std::move(l), {}};
      };
      auto shifted = beam_generate(p, shift, Tokens{2}, opts);
      CHECK(shifted.seq.ids == base.seq.ids);
      CHECK(shifted.score == doctest::Approx(base.score).epsilon(1e-12));
    }
  }
}

TEST_CASE("beam search agrees with exhaustive enumeration on a 3-token vocabulary") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    HashedProvider p(3, seed);
    const Tokens prompt{0};
    // Enumerate all 3 + 9 + 27 continuations and their exact log-probabilities.
    std::map<Tokens, double> score;
    std::vector<Tokens> level{Tokens{}};
    std::vector<std::vector<Tokens>> by_len(4);
    by_len[0] = level;
    for (int len = 1; len <= 3; ++len) {
      for (const auto& s : by_len[len - 1]) {
        for (TokenId t = 0; t < 3; ++t) {
          Tokens e = s;
          e.push_back(t);
          score[e] = sequence_logprob(p, prompt, e);
          by_len[len].push_back(e);
        }
      }
    }
    auto better = [&](const Tokens& a, const Tokens& b) {
      if (score[a] != score[b]) return score[a] > score[b];
      if (a.back() != b.back()) return a.back() < b.back();
      return a < b;
    };

    // Width 2: the kept set at each depth is the best two extensions of the
    // previously kept set.
    std::vector<Tokens> kept{Tokens{}};
    for (int len = 1; len <= 3; ++len) {
      std::vector<Tokens> ext;
      for (const auto& s : kept) {
        for (TokenId t = 0; t < 3; ++t) {
          Tokens e = s;
          e.push_back(t);
          ext.push_back(e);
        }
      }
      std::sort(ext.begin(), ext.end(), better);
      kept.assign(ext.begin(), ext.begin() + 2);
    }
    GenerationOptions opts;
    opts.beam_width = 2;
    opts.max_new_tokens = 3;
    opts.eos = std::nullopt;
    auto gen = beam_generate(p, identity_transform(), prompt, opts);
    CHECK(Tokens(gen.seq.generated().begin(), gen.seq.generated().end()) == kept.front());
    CHECK(gen.score == doctest::Approx(score[kept.front()]).epsilon(1e-12));

    // Width 9 keeps every depth-2 prefix, so it finds the global optimum.
    opts.beam_width = 9;
    auto full = beam_generate(p, identity_transform(), prompt, opts);
    auto best = *std::min_element(by_len[3].begin(), by_len[3].end(), better);
    CHECK(Tokens(full.seq.generated().begin(), full.seq.generated().end()) == best);
  }
}

TEST_CASE("EOS ends a beam and min_new_tokens blocks it") {
  // A model that always prefers EOS.
  class EosProvider final : public LogitsProvider {
   public:
    std::size_t vocab_size() const override { return 5; }
    LogitsVector logits(std::span<const TokenId>) const override { return {0, 5, 0, 1, 2}; }
  } p;
  GenerationOptions opts;
  opts.max_new_tokens = 10;
  auto gen = beam_generate(p, identity_transform(), Tokens{3}, opts);
  CHECK(gen.ended_with_eos);
  CHECK(gen.seq.generated_len() == 0);

  opts.min_new_tokens = 10;
  opts.suppress = default_suppressed_ids();
  gen = beam_generate(p, identity_transform(), Tokens{3}, opts);
  CHECK_FALSE(gen.ended_with_eos);
  CHECK(gen.seq.generated_len() == 10);
  for (TokenId t : gen.seq.generated()) {
    CHECK(t != kBos);
    CHECK(t != kUnk);
    CHECK(t != kEos);
  }
}

TEST_CASE("no_repeat_ngram forbids repeated n-grams") {
  HashedProvider p(12, 5);
  for (std::size_t n : {2, 3, 4}) {
    GenerationOptions opts;
    opts.max_new_tokens = 40;
    opts.eos = std::nullopt;
    opts.no_repeat_ngram = n;
    auto gen = beam_generate(p, identity_transform(), Tokens{1, 2, 3}, opts);
    std::set<Tokens> seen;
    const auto& ids = gen.seq.ids;
    for (std::size_t i = 0; i + n <= ids.size(); ++i) {
      CHECK(seen.insert(Tokens(ids.begin() + static_cast<long>(i), ids.begin() + static_cast<long>(i + n))).second);
    }
  }
}

TEST_CASE("model file round trip is byte-identical") {
  auto c = corpus_of(sample_docs(40, 3));
  auto v = build_vocab(c, 100);
  auto lm = NGramLM::train(c, v, 3, 0.5);
  auto dir = wis::testing::scratch_dir("lm");
  auto dir2 = wis::testing::scratch_dir("lm2");
  lm.save(dir / "m.json", dir / "m.vocab");
  auto again = NGramLM::train(c, v, 3, 0.5);
  again.save(dir2 / "m.json", dir2 / "m.vocab");
  auto slurp = [](const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  auto a = slurp(dir / "m.json");
  CHECK(a == slurp(dir2 / "m.json"));
  CHECK(slurp(dir / "m.vocab") == slurp(dir2 / "m.vocab"));
  auto loaded = NGramLM::load(dir / "m.json");
  CHECK(loaded.order() == 3);
  CHECK(loaded.vocab() == v);
  std::mt19937 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Tokens prefix(rng() % 5);
    for (auto& id : prefix) id = static_cast<TokenId>(rng() % v.size());
    CHECK(loaded.logits(prefix) == lm.logits(prefix));
  }
}
