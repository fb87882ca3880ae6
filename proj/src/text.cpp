#include "wis/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "wis/error.hpp"

namespace wis {
namespace {

const char* const kReservedSpellings[kNumReserved] = {"<s>", "</s>", "<unk>"};

}  // namespace

Vocabulary::Vocabulary() {
  for (std::size_t i = 0; i < kNumReserved; ++i) {
    entries_.emplace_back(kReservedSpellings[i]);
    index_.emplace(entries_.back(), static_cast<TokenId>(i));
  }
}

Vocabulary Vocabulary::from_surface_tokens(std::vector<std::string> surface) {
  Vocabulary v;
  v.entries_.reserve(kNumReserved + surface.size());
  for (auto& tok : surface) {
    if (tok.empty()) throw ConfigError("vocabulary: empty token");
    auto id = static_cast<TokenId>(v.entries_.size());
    if (!v.index_.emplace(tok, id).second) {
      throw ConfigError("vocabulary: duplicate token '" + tok + "'");
    }
    v.entries_.push_back(std::move(tok));
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary file: " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  if (lines.size() < kNumReserved) throw ConfigError("vocabulary file too short: " + path.string());
  for (std::size_t i = 0; i < kNumReserved; ++i) {
    if (lines[i] != kReservedSpellings[i]) {
      throw ConfigError("vocabulary file: line " + std::to_string(i) + " must be " + kReservedSpellings[i]);
    }
  }
  lines.erase(lines.begin(), lines.begin() + kNumReserved);
  return from_surface_tokens(std::move(lines));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path.string());
  for (const auto& e : entries_) out << e << '\n';
}

const std::string& Vocabulary::token_of(TokenId id) const {
  if (id >= entries_.size()) throw std::out_of_range("id out of range");
  return entries_[id];
}

TokenId Vocabulary::id_of(std::string_view token) const { return find(token).value_or(kUnk); }

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Corpus read_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file: " + path.string());
  Corpus corpus;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    Document doc;
    if (rec.contains("text")) {
      doc.text = rec.at("text").get<std::string>();
    } else if (rec.contains("prompt")) {
      doc.text = rec.at("prompt").get<std::string>();
    } else {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": record has no \"text\" or \"prompt\"");
    }
    if (rec.contains("reference") && !rec.at("reference").is_null()) {
      doc.reference = rec.at("reference").get<std::string>();
    }
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::exchange(cur, {}));
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      words.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return words;
}

Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size) {
  if (corpus.empty()) throw ConfigError("empty corpus");
  if (max_size < kNumReserved + 1) throw ConfigError("max_size must be >= 4");

  std::map<std::string, std::size_t> freq;
  for (const auto& doc : corpus) {
    for (auto& w : split_words(doc.text)) ++freq[std::move(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  // std::map iteration is already lexicographic; stable sort keeps that order among ties.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::size_t keep = std::min(ranked.size(), max_size - kNumReserved);
  std::vector<std::string> surface;
  surface.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) surface.push_back(std::move(ranked[i].first));
  return Vocabulary::from_surface_tokens(std::move(surface));
}

Tokens tokenize(std::string_view text, const Vocabulary& vocab) {
  Tokens ids;
  for (const auto& w : split_words(text)) ids.push_back(vocab.id_of(w));
  return ids;
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : ids) {
    const auto& tok = vocab.token_of(id);
    if (vocab.is_reserved(id)) continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

}  // namespace wis
