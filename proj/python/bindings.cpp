#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "wis/bench.hpp"
#include "wis/detect.hpp"
#include "wis/error.hpp"
#include "wis/lm.hpp"
#include "wis/scoring.hpp"
#include "wis/text.hpp"
#include "wis/watermark.hpp"

namespace py = pybind11;
using namespace wis;

namespace {

// Owns the embedding and both scorer layers, which hold references to each other.
class PerturbationImportance {
 public:
  PerturbationImportance(std::vector<double> idf, std::size_t dim, std::size_t window, bool raw_cosine)
      : phi_(std::make_unique<HashedEmbedding>(std::move(idf), dim)),
        inner_(std::make_unique<PerturbationScorer>(
            *phi_, raw_cosine ? CosineMode::kRawCosine : CosineMode::kDissimilarity)),
        windowed_(std::make_unique<WindowedScorer>(*inner_, window)) {}

  const ImportanceScorer& scorer() const { return *windowed_; }

 private:
  std::unique_ptr<HashedEmbedding> phi_;
  std::unique_ptr<PerturbationScorer> inner_;
  std::unique_ptr<WindowedScorer> windowed_;
};

WatermarkParams make_params(std::uint64_t key, double gamma, double delta, std::optional<std::size_t> context_width,
                            const std::string& mode) {
  WatermarkParams p;
  p.key = key;
  p.gamma = gamma;
  p.delta = delta;
  p.context_width = context_width.value_or(kFullPrefix);
  p.mode = parse_mode(mode);
  p.validate();
  return p;
}

}  // namespace

PYBIND11_MODULE(_wis, m) {
  m.doc() = "Token-level text watermarking with importance-gated boosting.";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("load", &Vocabulary::load, py::arg("path"))
      .def("save", &Vocabulary::save, py::arg("path"))
      .def("__len__", &Vocabulary::size)
      .def("token_of", &Vocabulary::token_of, py::arg("id"))
      .def("id_of", &Vocabulary::id_of, py::arg("token"));

  m.def("read_corpus", [](const std::filesystem::path& path) {
    std::vector<std::string> texts;
    for (const auto& d : read_corpus_jsonl(path)) texts.push_back(d.text);
    return texts;
  }, py::arg("path"), "Texts of a JSONL corpus, one document per line.");
  m.def("build_vocab", [](const std::vector<std::string>& texts, std::size_t max_size) {
    Corpus corpus;
    for (const auto& t : texts) corpus.push_back({t});
    return build_vocab(corpus, max_size);
  }, py::arg("texts"), py::arg("max_size") = 20000);
  m.def("tokenize", [](const std::string& text, const Vocabulary& v) { return tokenize(text, v); },
        py::arg("text"), py::arg("vocab"));
  m.def("detokenize", [](const Tokens& ids, const Vocabulary& v) { return detokenize(ids, v); },
        py::arg("ids"), py::arg("vocab"));

  py::class_<NGramLM>(m, "NGramLM")
      .def_static("train", [](const std::vector<std::string>& texts, const Vocabulary& v, std::size_t order,
                              double k) {
        Corpus corpus;
        for (const auto& t : texts) corpus.push_back({t});
        return NGramLM::train(corpus, v, order, k);
      }, py::arg("texts"), py::arg("vocab"), py::arg("order") = 4, py::arg("k") = 0.05)
      .def_static("load", &NGramLM::load, py::arg("path"))
      .def("save", &NGramLM::save, py::arg("path"), py::arg("vocab_path"))
      .def("logits", [](const NGramLM& lm, const Tokens& prefix) { return lm.logits(prefix); }, py::arg("prefix"))
      .def_property_readonly("order", &NGramLM::order)
      .def_property_readonly("k", &NGramLM::k)
      .def_property_readonly("vocab", &NGramLM::vocab, py::return_value_policy::reference_internal);

  py::class_<WatermarkParams>(m, "WatermarkParams")
      .def(py::init(&make_params), py::arg("key"), py::arg("gamma") = 0.25, py::arg("delta") = 2.0,
           py::arg("context_width") = py::none(), py::arg("mode") = "baseline",
           "context_width=None hashes the whole prefix.")
      .def_readonly("gamma", &WatermarkParams::gamma)
      .def_readonly("delta", &WatermarkParams::delta)
      .def_property_readonly("mode", [](const WatermarkParams& p) { return to_string(p.mode); })
      .def("__repr__", [](const WatermarkParams& p) {
        return "WatermarkParams(gamma=" + std::to_string(p.gamma) + ", delta=" + std::to_string(p.delta) +
               ", mode=" + to_string(p.mode) + ")";
      });
  m.def("parse_key", &parse_key_hex, py::arg("hex"));

  m.def("is_green", [](const WatermarkParams& p, const Tokens& prefix, TokenId c) { return is_green(p, prefix, c); },
        py::arg("params"), py::arg("prefix"), py::arg("candidate"));
  m.def("z_score", &z_score, py::arg("green_count"), py::arg("token_count"), py::arg("gamma"));

  m.def("compute_idf", [](const std::vector<Tokens>& docs, std::size_t v) { return compute_idf(docs, v); },
        py::arg("documents"), py::arg("vocab_size"));
  py::class_<PerturbationImportance>(m, "PerturbationImportance")
      .def(py::init<std::vector<double>, std::size_t, std::size_t, bool>(), py::arg("idf"), py::arg("dim") = 256,
           py::arg("window") = 16, py::arg("raw_cosine") = false)
      .def("score", [](const PerturbationImportance& s, const Tokens& prefix, TokenId c) {
        return s.scorer().score(prefix, c);
      }, py::arg("prefix"), py::arg("candidate"));

  py::class_<Generation>(m, "Generation")
      .def_property_readonly("ids", [](const Generation& g) { return g.seq.ids; })
      .def_property_readonly("prompt_len", [](const Generation& g) { return g.seq.prompt_len; })
      .def_property_readonly("generated", [](const Generation& g) {
        return Tokens(g.seq.ids.begin() + static_cast<std::ptrdiff_t>(g.seq.prompt_len), g.seq.ids.end());
      })
      .def_readonly("marks", &Generation::marks)
      .def_readonly("score", &Generation::score);

  m.def("generate", [](const NGramLM& lm, const WatermarkParams& p, const Tokens& prompt, std::size_t max_len,
                       std::optional<std::size_t> min_len, std::size_t beam,
                       const PerturbationImportance* importance, double r0) {
    std::optional<ImportanceGate> gate;
    if (p.mode == WatermarkMode::kWis) {
      if (importance == nullptr) throw ConfigError("mode wis needs an importance scorer");
      gate = ImportanceGate{&importance->scorer(), r0};
    }
    GenerationOptions opts;
    opts.max_new_tokens = max_len;
    opts.min_new_tokens = min_len.value_or(max_len);
    opts.beam_width = beam;
    opts.suppress = default_suppressed_ids();
    py::gil_scoped_release release;
    return generate_watermarked(lm, p, gate, prompt, opts);
  }, py::arg("lm"), py::arg("params"), py::arg("prompt"), py::arg("max_len") = 100, py::arg("min_len") = py::none(),
     py::arg("beam") = 2, py::arg("importance") = nullptr, py::arg("r0") = 0.02);

  py::class_<DetectionResult>(m, "DetectionResult")
      .def_readonly("token_count", &DetectionResult::token_count)
      .def_readonly("green_count", &DetectionResult::green_count)
      .def_readonly("z", &DetectionResult::z)
      .def_readonly("threshold", &DetectionResult::threshold)
      .def_readonly("watermarked", &DetectionResult::watermarked)
      .def_readonly("green", &DetectionResult::green);

  m.def("detect", [](const std::string& text, const Vocabulary& v, const WatermarkParams& p, double threshold,
                     std::optional<std::string> prompt) {
    std::optional<std::string_view> pv;
    if (prompt) pv = *prompt;
    return detect(text, v, p, threshold, pv);
  }, py::arg("text"), py::arg("vocab"), py::arg("params"), py::arg("threshold") = kDefaultZThreshold,
     py::arg("prompt") = py::none());
  m.def("detect_tokens", [](const Tokens& ids, std::size_t prompt_len, const WatermarkParams& p, double threshold) {
    if (prompt_len > ids.size()) throw ConfigError("prompt_len exceeds the sequence length");
    return detect_tokens(TokenSeq{ids, prompt_len}, p, threshold);
  }, py::arg("ids"), py::arg("prompt_len"), py::arg("params"), py::arg("threshold") = kDefaultZThreshold);

  m.def("rouge1", [](const Tokens& cand, const Tokens& ref) {
    const auto r = rouge1(cand, ref);
    return py::dict(py::arg("precision") = r.precision, py::arg("recall") = r.recall, py::arg("f1") = r.f1);
  }, py::arg("candidate"), py::arg("reference"));
}
