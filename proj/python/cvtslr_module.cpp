#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cvtslr/checkpoint.hpp"
#include "cvtslr/config.hpp"
#include "cvtslr/corpus.hpp"
#include "cvtslr/ctc.hpp"
#include "cvtslr/error.hpp"
#include "cvtslr/metrics.hpp"
#include "cvtslr/objectives.hpp"
#include "cvtslr/ops.hpp"
#include "cvtslr/pipeline.hpp"

namespace py = pybind11;
using namespace cvtslr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Matrix& m) {
  Array out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

TrainConfig config_from(const std::map<std::string, std::string>& overrides, bool benchmark) {
  TrainConfig cfg = benchmark ? benchmark_config() : TrainConfig{};
  for (const auto& [k, v] : overrides) set_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

py::dict report_dict(const WerReport& r) {
  py::dict d;
  d["wer"] = r.wer;
  d["del"] = r.totals.del;
  d["ins"] = r.totals.ins;
  d["sub"] = r.totals.sub;
  d["ref_len"] = r.totals.ref_len;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the cvtslr C++ core";

  py::register_exception<Error>(m, "CvtSlrError", PyExc_RuntimeError);

  m.def(
      "ctc_loss",
      [](const Array& log_probs, const GlossSeq& target) {
        return ctc_neg_log_likelihood(to_matrix(log_probs), target);
      },
      py::arg("log_probs"), py::arg("target"), "Negative log-likelihood of target; blank is the last column.");
  m.def(
      "ctc_gradient",
      [](const Array& log_probs, const GlossSeq& target) {
        const Matrix lp = to_matrix(log_probs);
        return to_array(ctc_gradient(lp, ctc_lattice(lp, target)));
      },
      py::arg("log_probs"), py::arg("target"));
  m.def(
      "ctc_brute_force", [](const Array& probs, const GlossSeq& target) { return ctc_brute_force(to_matrix(probs), target); },
      py::arg("probs"), py::arg("target"));
  m.def(
      "greedy_decode",
      [](const Array& log_probs) {
        const DecodeResult r = greedy_decode(to_matrix(log_probs));
        return py::make_tuple(r.glosses, r.score);
      },
      py::arg("log_probs"));
  m.def(
      "beam_decode",
      [](const Array& log_probs, std::size_t beam_width) {
        const DecodeResult r = beam_decode(to_matrix(log_probs), beam_width);
        return py::make_tuple(r.glosses, r.score);
      },
      py::arg("log_probs"), py::arg("beam_width") = 10);

  m.def(
      "kl_loss", [](const Array& mu, const Array& sigma) { return kl_loss(to_tensor(mu), to_tensor(sigma)).item(); },
      py::arg("mu"), py::arg("sigma"));
  m.def(
      "gloss2gloss_ce",
      [](const Array& logits, const GlossSeq& target) { return gloss2gloss_ce(to_tensor(logits), target).item(); },
      py::arg("logits"), py::arg("target"));
  m.def(
      "contrastive_align_loss",
      [](const Array& s, const Array& v) {
        return contrastive_align_loss({l2_normalize_last(to_tensor(s)), FeatureSource::kVisual},
                                      {l2_normalize_last(to_tensor(v)), FeatureSource::kTextual})
            .item();
      },
      py::arg("s"), py::arg("v"), "Rows are L2-normalized before building the pair matrices.");

  m.def(
      "edit_alignment",
      [](const GlossSeq& ref, const GlossSeq& hyp) {
        const EditBreakdown e = edit_alignment(ref, hyp);
        return py::make_tuple(e.del, e.ins, e.sub);
      },
      py::arg("ref"), py::arg("hyp"), "Returns (del, ins, sub).");
  m.def(
      "wer",
      [](const std::vector<RefHypPair>& pairs) { return report_dict(wer(pairs)); }, py::arg("pairs"));

  m.def("config_keys", [] {
    std::vector<std::string> names;
    for (const auto& k : config_keys()) names.push_back(k.name);
    return names;
  });
  m.def(
      "config_text",
      [](const std::map<std::string, std::string>& overrides, bool benchmark) {
        return config_to_text(config_from(overrides, benchmark));
      },
      py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("benchmark") = false);

  m.def(
      "generate_corpus",
      [](const std::filesystem::path& dir, const std::map<std::string, std::string>& overrides, bool benchmark) {
        const TrainConfig cfg = config_from(overrides, benchmark);
        const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
        save_corpus(dir, corpus);
        return corpus.samples.size();
      },
      py::arg("dir"), py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("benchmark") = false);
  m.def(
      "pretrain_vae",
      [](const std::filesystem::path& corpus_dir, const std::filesystem::path& checkpoint,
         const std::map<std::string, std::string>& overrides, bool benchmark) {
        const TrainConfig cfg = config_from(overrides, benchmark);
        const PretrainResult r = pretrain_vae(cfg, load_corpus(corpus_dir, false));
        write_checkpoint(checkpoint, r.checkpoint);
        py::list history;
        for (const auto& e : r.history) history.append(py::make_tuple(e.epoch, e.kl, e.ce, e.total));
        return py::make_tuple(history, r.dev_loss);
      },
      py::arg("corpus_dir"), py::arg("checkpoint"), py::arg("overrides") = std::map<std::string, std::string>{},
      py::arg("benchmark") = false, "Returns ([(epoch, kl, ce, total)], dev_loss).");
  m.def(
      "train_slr",
      [](const std::filesystem::path& corpus_dir, const std::filesystem::path& checkpoint,
         const std::optional<std::filesystem::path>& vae_checkpoint, const std::map<std::string, std::string>& overrides,
         bool benchmark) {
        TrainConfig cfg = config_from(overrides, benchmark);
        Checkpoint vae;
        if (vae_checkpoint) vae = read_checkpoint(*vae_checkpoint);
        cfg.use_pretrained_vae = cfg.use_pretrained_vae && vae_checkpoint.has_value();
        const SlrResult r = train_slr(cfg, load_corpus(corpus_dir, true), vae_checkpoint ? &vae : nullptr);
        write_checkpoint(checkpoint, r.checkpoint);
        return py::make_tuple(r.best_epoch, r.best_dev_wer);
      },
      py::arg("corpus_dir"), py::arg("checkpoint"), py::arg("vae_checkpoint") = py::none(),
      py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("benchmark") = false,
      "Returns (best_epoch, best_dev_wer).");
  m.def(
      "evaluate",
      [](const std::filesystem::path& corpus_dir, const std::filesystem::path& checkpoint, const std::string& split,
         std::size_t beam_width) {
        const EvalResult r =
            evaluate(read_checkpoint(checkpoint), load_corpus(corpus_dir, true), parse_split(split), beam_width);
        return report_dict(r.report);
      },
      py::arg("corpus_dir"), py::arg("checkpoint"), py::arg("split") = "dev", py::arg("beam_width") = 10);
}
