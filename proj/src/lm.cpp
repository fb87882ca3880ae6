#include "wis/lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "wis/error.hpp"
#include "wis/hash.hpp"

namespace wis {
namespace {

constexpr double kSuppressedLogit = -1e30;

}  // namespace

std::size_t NGramLM::ContextHash::operator()(const Tokens& ctx) const noexcept {
  std::uint64_t h = 0x6e6772616dULL;
  for (TokenId id : ctx) h = absorb(h, id);
  return static_cast<std::size_t>(h);
}

NGramLM::NGramLM(Vocabulary vocab, std::size_t order, double k)
    : vocab_(std::move(vocab)), order_(order), k_(k) {
  if (order_ < 1 || order_ > 5) throw ConfigError("n-gram order must be in [1, 5]");
  if (!(k_ > 0.0) || !std::isfinite(k_)) throw ConfigError("smoothing constant k must be > 0");
}

NGramLM NGramLM::train(const Corpus& corpus, const Vocabulary& vocab, std::size_t order, double k) {
  if (corpus.empty()) throw ConfigError("empty corpus");
  NGramLM lm(vocab, order, k);
  const std::size_t ctx_len = order - 1;
  std::unordered_map<Tokens, std::map<TokenId, std::size_t>, ContextHash> tally;
  for (const auto& doc : corpus) {
    Tokens padded(ctx_len, kBos);
    auto ids = tokenize(doc.text, vocab);
    padded.insert(padded.end(), ids.begin(), ids.end());
    padded.push_back(kEos);
    for (std::size_t i = ctx_len; i < padded.size(); ++i) {
      Tokens ctx(padded.begin() + static_cast<std::ptrdiff_t>(i - ctx_len),
                 padded.begin() + static_cast<std::ptrdiff_t>(i));
      ++tally[std::move(ctx)][padded[i]];
    }
  }
  for (auto& [ctx, next] : tally) {
    Continuations c;
    c.counts.assign(next.begin(), next.end());
    for (const auto& [tok, n] : c.counts) c.total += n;
    lm.table_.emplace(ctx, std::move(c));
  }
  return lm;
}

Tokens NGramLM::context_of(std::span<const TokenId> prefix) const {
  const std::size_t ctx_len = order_ - 1;
  Tokens ctx(ctx_len, kBos);
  const std::size_t take = std::min(ctx_len, prefix.size());
  std::copy(prefix.end() - static_cast<std::ptrdiff_t>(take), prefix.end(),
            ctx.end() - static_cast<std::ptrdiff_t>(take));
  return ctx;
}

LogitsVector NGramLM::logits(std::span<const TokenId> prefix) const {
  const std::size_t v = vocab_.size();
  auto it = table_.find(context_of(prefix));
  const std::size_t total = it == table_.end() ? 0 : it->second.total;
  const double log_denom = std::log(static_cast<double>(total) + k_ * static_cast<double>(v));
  LogitsVector out(v, std::log(k_) - log_denom);
  if (it != table_.end()) {
    for (const auto& [tok, n] : it->second.counts) {
      out[tok] = std::log(static_cast<double>(n) + k_) - log_denom;
    }
  }
  return out;
}

std::size_t NGramLM::count(std::span<const TokenId> context, TokenId token) const {
  if (context.size() != order_ - 1) throw std::invalid_argument("context length must be order - 1");
  auto it = table_.find(Tokens(context.begin(), context.end()));
  if (it == table_.end()) return 0;
  const auto& counts = it->second.counts;
  auto pos = std::lower_bound(counts.begin(), counts.end(), token,
                              [](const auto& entry, TokenId t) { return entry.first < t; });
  return pos != counts.end() && pos->first == token ? pos->second : 0;
}

void NGramLM::save(const std::filesystem::path& path, const std::filesystem::path& vocab_path) const {
  vocab_.save(vocab_path);
  // Sorted by context so identical models serialise byte-identically.
  std::map<Tokens, const Continuations*> sorted;
  for (const auto& [ctx, cont] : table_) sorted.emplace(ctx, &cont);
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& [ctx, cont] : sorted) {
    for (const auto& [tok, n] : cont->counts) counts.push_back({ctx, tok, n});
  }
  std::filesystem::path vocab_ref = vocab_path;
  if (vocab_path.parent_path() == path.parent_path()) vocab_ref = vocab_path.filename();
  nlohmann::json j = {{"order", order_}, {"k", k_}, {"vocab_file", vocab_ref.string()}, {"counts", std::move(counts)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file: " + path.string());
  out << j.dump() << '\n';
}

NGramLM NGramLM::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model file " + path.string() + ": " + e.what());
  }
  std::filesystem::path vocab_path = j.at("vocab_file").get<std::string>();
  if (vocab_path.is_relative()) vocab_path = path.parent_path() / vocab_path;
  NGramLM lm(Vocabulary::load(vocab_path), j.at("order").get<std::size_t>(), j.at("k").get<double>());
  const std::size_t v = lm.vocab_.size();
  for (const auto& row : j.at("counts")) {
    auto ctx = row.at(0).get<Tokens>();
    auto tok = row.at(1).get<TokenId>();
    auto n = row.at(2).get<std::size_t>();
    if (ctx.size() != lm.order_ - 1 || tok >= v || n == 0 ||
        std::any_of(ctx.begin(), ctx.end(), [v](TokenId id) { return id >= v; })) {
      throw ConfigError("model file " + path.string() + ": malformed count row " + row.dump());
    }
    auto& cont = lm.table_[std::move(ctx)];
    cont.counts.emplace_back(tok, n);
    cont.total += n;
  }
  for (auto& [ctx, cont] : lm.table_) std::sort(cont.counts.begin(), cont.counts.end());
  return lm;
}

TokenId argmax_token(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("argmax of empty logits");
  return static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

LogitsVector log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double x : logits) sum += std::exp(x - m);
  const double lse = m + std::log(sum);
  LogitsVector out(logits.size());
  std::transform(logits.begin(), logits.end(), out.begin(), [lse](double x) { return x - lse; });
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (double& x : out) x = std::exp(x);
  return out;
}

LogitTransform identity_transform() {
  return [](LogitsVector logits, std::span<const TokenId>) { return StepLogits{std::move(logits), {}}; };
}

std::vector<TokenId> default_suppressed_ids() { return {kBos, kUnk}; }

namespace {

struct Beam {
  Tokens ids;
  double score = 0.0;
  std::vector<bool> marks;
};

struct Candidate {
  double score;
  TokenId token;
  std::size_t beam;
  bool mark;
};

// Tokens that would complete an n-gram already present in `ids`.
std::vector<TokenId> repeated_ngram_tokens(std::span<const TokenId> ids, std::size_t n) {
  std::vector<TokenId> banned;
  if (n == 0 || ids.size() + 1 < n) return banned;
  if (n == 1) return {ids.begin(), ids.end()};
  const auto tail = ids.last(n - 1);
  for (std::size_t i = 0; i + n <= ids.size(); ++i) {
    if (std::equal(tail.begin(), tail.end(), ids.begin() + static_cast<std::ptrdiff_t>(i))) {
      banned.push_back(ids[i + n - 1]);
    }
  }
  return banned;
}

bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.token != b.token) return a.token < b.token;
  return a.beam < b.beam;
}

}  // namespace

Generation beam_generate(const LogitsProvider& provider, const LogitTransform& transform,
                         std::span<const TokenId> prompt, const GenerationOptions& options) {
  if (options.beam_width < 1) throw ConfigError("beam_width must be >= 1");
  if (options.max_new_tokens < 1) throw ConfigError("max_len must be >= 1");
  const std::size_t v = provider.vocab_size();

  std::vector<bool> suppressed(v, false);
  for (TokenId id : options.suppress) {
    if (id < v) suppressed[id] = true;
  }

  std::vector<Beam> alive{Beam{Tokens(prompt.begin(), prompt.end()), 0.0, {}}};
  std::vector<std::pair<Beam, bool>> finished;  // (beam, ended with EOS)
  std::vector<Candidate> candidates;

  for (std::size_t step = 0; step < options.max_new_tokens && !alive.empty(); ++step) {
    const bool eos_allowed = options.eos && step >= options.min_new_tokens;
    candidates.clear();
    for (std::size_t b = 0; b < alive.size(); ++b) {
      auto raw = provider.logits(alive[b].ids);
      if (raw.size() != v) throw std::logic_error("provider returned logits of wrong length");
      std::vector<bool> blocked = suppressed;
      if (options.eos && !eos_allowed && *options.eos < v) blocked[*options.eos] = true;
      for (TokenId id : repeated_ngram_tokens(alive[b].ids, options.no_repeat_ngram)) {
        if (id < v) blocked[id] = true;
      }
      for (std::size_t i = 0; i < v; ++i) {
        if (blocked[i]) raw[i] = kSuppressedLogit;
      }
      auto stepped = transform(std::move(raw), alive[b].ids);
      if (stepped.logits.size() != v) throw std::logic_error("transform returned logits of wrong length");
      const auto logp = log_softmax(stepped.logits);
      for (std::size_t i = 0; i < v; ++i) {
        if (blocked[i]) continue;
        const bool mark = !stepped.marks.empty() && stepped.marks[i];
        candidates.push_back({alive[b].score + logp[i], static_cast<TokenId>(i), b, mark});
      }
    }
    if (candidates.empty()) break;  // every token blocked: live beams end here
    const std::size_t keep = std::min(options.beam_width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), ranks_before);

    std::vector<Beam> next;
    for (std::size_t c = 0; c < keep; ++c) {
      const auto& cand = candidates[c];
      Beam beam = alive[cand.beam];
      beam.score = cand.score;
      if (options.eos && cand.token == *options.eos) {
        finished.emplace_back(std::move(beam), true);
        continue;
      }
      beam.ids.push_back(cand.token);
      beam.marks.push_back(cand.mark);
      next.push_back(std::move(beam));
    }
    alive = std::move(next);

    // Log-probabilities are <= 0, so no live beam can overtake a finished one
    // that already scores at least as well.
    if (!finished.empty() && !alive.empty()) {
      double best_finished = -std::numeric_limits<double>::infinity();
      for (const auto& f : finished) best_finished = std::max(best_finished, f.first.score);
      double best_alive = -std::numeric_limits<double>::infinity();
      for (const auto& a : alive) best_alive = std::max(best_alive, a.score);
      if (best_finished >= best_alive) alive.clear();
    }
  }
  for (auto& beam : alive) finished.emplace_back(std::move(beam), false);
  if (finished.empty()) throw std::logic_error("beam search produced no hypothesis");

  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (finished[i].first.score > finished[best].first.score) best = i;
  }
  auto& [beam, eos] = finished[best];
  Generation out;
  out.seq.prompt_len = prompt.size();
  out.seq.ids = std::move(beam.ids);
  out.score = beam.score;
  out.ended_with_eos = eos;
  out.marks = std::move(beam.marks);
  return out;
}

}  // namespace wis
