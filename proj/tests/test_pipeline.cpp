#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "cvtslr/config.hpp"
#include "cvtslr/error.hpp"
#include "cvtslr/grad_check.hpp"
#include "cvtslr/ops.hpp"
#include "cvtslr/pipeline.hpp"
#include "test_util.hpp"

using namespace cvtslr;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.seed = 3;
  c.synth.vocab_size = 4;
  c.synth.d_in = 6;
  c.synth.train_size = 12;
  c.synth.dev_size = 4;
  c.synth.test_size = 4;
  c.synth.max_glosses = 3;
  c.model.d_model = 8;
  c.model.d_latent = 6;
  c.model.visual_hidden = 8;
  c.model.heads = 2;
  c.model.lstm_hidden = 6;
  c.pretrain_epochs = 2;
  c.slr_epochs = 2;
  c.pretrain_batch_size = 4;
  c.slr_batch_size = 4;
  c.ablation_seeds = 1;
  c.beam_width = 4;
  return c;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIoError;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Batch first_batch(const Corpus& corpus, std::size_t n) {
  const auto train = corpus.split(Split::kTrain);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return make_batch(train, idx);
}

}  // namespace

TEST(Pipeline, RngStreamsAreIndependentAndReproducible) {
  Rng a = make_rng(5, RngStream::kInit);
  Rng b = make_rng(5, RngStream::kInit);
  Rng c = make_rng(5, RngStream::kData);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
}

TEST(Pipeline, PretrainIsDeterministicAndNeedsNoFeatures) {
  const TrainConfig cfg = tiny_config();
  TempDir dir("pretrain");
  save_corpus(dir.path(), generate_corpus(cfg.synth, cfg.seed));
  const Corpus glosses_only = load_corpus(dir.path(), false);
  const PretrainResult a = pretrain_vae(cfg, glosses_only);
  const PretrainResult b = pretrain_vae(cfg, glosses_only);
  EXPECT_EQ(a.checkpoint, b.checkpoint);
  ASSERT_EQ(a.history.size(), 2u);
  EXPECT_EQ(a.history.back().total, b.history.back().total);
  for (const auto& e : a.history) EXPECT_NEAR(e.total, e.kl + e.ce, 1e-12);
  EXPECT_TRUE(std::isfinite(a.dev_loss));
  EXPECT_NE(a.checkpoint.find("embedding.table"), nullptr);
}

TEST(Pipeline, VaeBatchLossGradientMatchesFiniteDifferences) {
  TrainConfig cfg = tiny_config();
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  Rng init = make_rng(cfg.seed, RngStream::kInit);
  CvtSlrModel model(resolve_model_config(cfg, corpus), init);
  const auto train = corpus.split(Split::kTrain);
  const Batch batch = first_batch(corpus, 2);
  std::vector<Tensor> leaves{model.parameters().find("embedding.table"), model.parameters().find("encoder.mu.weight"),
                             model.parameters().find("encoder.log_var.bias"),
                             model.parameters().find("decoder.lstm2.bwd.recurrent")};
  auto f = [&] {
    Rng noise(17);
    return vae_batch_loss(model, train, batch, ReparamMode::kSample, noise).total;
  };
  EXPECT_LT(grad_check_leaves(f, leaves), 1e-5);
}

TEST(Pipeline, JointLossGradientMatchesFiniteDifferences) {
  const TrainConfig cfg = tiny_config();
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  Rng init = make_rng(cfg.seed, RngStream::kInit);
  CvtSlrModel model(resolve_model_config(cfg, corpus), init);
  const auto train = corpus.split(Split::kTrain);
  const Batch batch = first_batch(corpus, 3);
  std::vector<Tensor> leaves{model.parameters().find("visual.hidden.weight"), model.parameters().find("adapter.out.weight"),
                             model.parameters().find("encoder.attn2.value.weight"),
                             model.parameters().find("classifier.bias")};
  auto f = [&] { return slr_batch_loss(model, batch, train, true, 10.0).total; };
  EXPECT_LT(grad_check_leaves(f, leaves), 1e-4);
}

TEST(Pipeline, ZeroAlignWeightMatchesCtcOnlyObjective) {
  const TrainConfig cfg = tiny_config();
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  Rng init = make_rng(cfg.seed, RngStream::kInit);
  CvtSlrModel model(resolve_model_config(cfg, corpus), init);
  const auto train = corpus.split(Split::kTrain);
  const Batch batch = first_batch(corpus, 3);
  Tensor w = model.parameters().find("visual.out.weight");

  slr_batch_loss(model, batch, train, false, 10.0).total.backward();
  const std::vector<double> ctc_only(w.grad().begin(), w.grad().end());
  model.parameters().zero_grad();
  SlrLossParts zero = slr_batch_loss(model, batch, train, true, 0.0);
  EXPECT_EQ(zero.total.item(), zero.ctc.item());
  zero.total.backward();
  for (std::size_t i = 0; i < ctc_only.size(); ++i) EXPECT_NEAR(w.grad()[i], ctc_only[i], 1e-15);
}

TEST(Pipeline, PaddedFramesDoNotAffectLoss) {
  const TrainConfig cfg = tiny_config();
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  Rng init = make_rng(cfg.seed, RngStream::kInit);
  CvtSlrModel model(resolve_model_config(cfg, corpus), init);
  const auto train = corpus.split(Split::kTrain);
  Batch batch = first_batch(corpus, 4);
  const SlrLossParts before = slr_batch_loss(model, batch, train, true, 10.0);
  std::size_t touched = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t t = 0; t < batch.max_frames; ++t) {
      if (batch.mask.at(b, t)) continue;
      for (std::size_t j = 0; j < batch.d_in; ++j) batch.frames[(b * batch.max_frames + t) * batch.d_in + j] = 123.0 + j;
      ++touched;
    }
  }
  ASSERT_GT(touched, 0u);
  const SlrLossParts after = slr_batch_loss(model, batch, train, true, 10.0);
  EXPECT_LE(std::abs(after.total.item() - before.total.item()), 1e-12);
  EXPECT_LE(std::abs(after.ctc.item() - before.ctc.item()), 1e-12);
  EXPECT_LE(std::abs(after.align.item() - before.align.item()), 1e-12);
}

TEST(Pipeline, LatticeDebugCheckPasses) {
  const TrainConfig cfg = tiny_config();
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  Rng init = make_rng(cfg.seed, RngStream::kInit);
  CvtSlrModel model(resolve_model_config(cfg, corpus), init);
  EXPECT_NO_THROW(slr_batch_loss(model, first_batch(corpus, 4), corpus.split(Split::kTrain), true, 10.0, true));
}

TEST(Pipeline, AllBlankModelHasWerOne) {
  const TrainConfig cfg = tiny_config();
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  Rng init = make_rng(cfg.seed, RngStream::kInit);
  CvtSlrModel model(resolve_model_config(cfg, corpus), init);
  Tensor w = model.classifier().linear().weight();
  Tensor b = model.classifier().linear().bias();
  std::fill(w.mutable_values().begin(), w.mutable_values().end(), 0.0);
  std::fill(b.mutable_values().begin(), b.mutable_values().end(), 0.0);
  b.mutable_values()[model.blank_id()] = 50.0;
  const EvalResult r = evaluate(model, corpus.split(Split::kDev), cfg.beam_width);
  EXPECT_EQ(r.report.wer, 1.0);
  EXPECT_EQ(r.report.totals.del, r.report.totals.ref_len);
  EXPECT_EQ(r.report.totals.ins + r.report.totals.sub, 0u);
}

TEST(Pipeline, StepTwoEvaluationIsBitIdentical) {
  const TrainConfig cfg = tiny_config();
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  Rng init = make_rng(cfg.seed, RngStream::kInit);
  CvtSlrModel model(resolve_model_config(cfg, corpus), init);
  const EvalResult a = evaluate(model, corpus.split(Split::kDev), cfg.beam_width);
  const EvalResult b = evaluate(model, corpus.split(Split::kDev), cfg.beam_width);
  ASSERT_EQ(a.transcripts.size(), b.transcripts.size());
  for (std::size_t i = 0; i < a.transcripts.size(); ++i) {
    EXPECT_EQ(a.transcripts[i].hypothesis.glosses, b.transcripts[i].hypothesis.glosses);
    EXPECT_EQ(a.transcripts[i].hypothesis.score, b.transcripts[i].hypothesis.score);
  }
}

TEST(Pipeline, TrainingIsDeterministic) {
  const TrainConfig cfg = tiny_config();
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  const PretrainResult vae = pretrain_vae(cfg, corpus);
  const SlrResult a = train_slr(cfg, corpus, &vae.checkpoint);
  const SlrResult b = train_slr(cfg, corpus, &vae.checkpoint);
  EXPECT_EQ(a.checkpoint, b.checkpoint);
  EXPECT_EQ(a.best_epoch, b.best_epoch);
  ASSERT_EQ(a.history.size(), 2u);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].total, b.history[i].total);
    EXPECT_EQ(a.history[i].dev_wer, b.history[i].dev_wer);
  }
  EXPECT_NEAR(a.history[0].total, a.history[0].ctc + 10.0 * a.history[0].align, 1e-9);
}

TEST(Pipeline, MissingInputsRaise) {
  TrainConfig cfg = tiny_config();
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  EXPECT_EQ(code_of([&] { build_slr_model(cfg, corpus, nullptr); }), ErrorCode::kCheckpointIncompatible);
  cfg.use_pretrained_vae = false;
  EXPECT_NO_THROW(build_slr_model(cfg, corpus, nullptr));

  Corpus no_dev = corpus;
  std::erase_if(no_dev.samples, [](const SignSample& s) { return s.split == Split::kDev; });
  EXPECT_EQ(code_of([&] { train_slr(cfg, no_dev, nullptr); }), ErrorCode::kSplitMissing);

  Rng init(1);
  CvtSlrModel model(resolve_model_config(cfg, corpus), init);
  EXPECT_EQ(code_of([&] { evaluate(model.to_checkpoint(), no_dev, Split::kDev, 4); }), ErrorCode::kSplitMissing);
  TempDir dir("dump_missing");
  EXPECT_EQ(code_of([&] { dump_alignment(model, corpus, "nope", dir.path(), 4); }), ErrorCode::kSampleMissing);
}

TEST(Pipeline, UntrainedAlignmentDumpIsWrittenAndFinite) {
  const TrainConfig cfg = tiny_config();
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  Rng init(2);
  CvtSlrModel model(resolve_model_config(cfg, corpus), init);
  TempDir dir("dump");
  const std::string id = corpus.split(Split::kDev).front()->id;
  const AlignmentDump d = dump_alignment(model, corpus, id, dir / "alignment", 4);
  for (const char* f : {"align.csv", "align.pgm", "glosses.txt"}) EXPECT_TRUE(std::filesystem::exists(dir / "alignment" / f));
  const std::size_t frames = corpus.find(id)->frames.rows;
  EXPECT_EQ(d.matrix.rows, frames);
  EXPECT_EQ(d.matrix.cols, frames);
  for (double x : d.matrix.data) EXPECT_TRUE(std::isfinite(x));
  EXPECT_EQ(read_matrix_csv(dir / "alignment" / "align.csv").data.size(), frames * frames);
  EXPECT_EQ(read_all(dir / "alignment" / "glosses.txt").rfind("reference: ", 0), 0u);
}

TEST(Pipeline, NoiselessCorpusIsLearnedAndAlignsMonotonically) {
  TrainConfig cfg = benchmark_config();
  cfg.synth.vocab_size = 5;
  cfg.synth.feature_noise = 0.0;
  cfg.synth.train_size = 80;
  cfg.synth.dev_size = 8;
  cfg.synth.test_size = 4;
  cfg.pretrain_epochs = 40;
  cfg.slr_lr = 3e-3;
  cfg.slr_epochs = 40;
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  const PretrainResult vae = pretrain_vae(cfg, corpus);
  const SlrResult r = train_slr(cfg, corpus, &vae.checkpoint);
  const EvalResult train = evaluate(r.checkpoint, corpus, Split::kTrain, cfg.beam_width);
  EXPECT_LT(train.report.wer, 0.05);

  // Identical noiseless frames make repeated glosses ambiguous, so probe a
  // sample whose glosses are all distinct.
  const CvtSlrModel model = CvtSlrModel::from_checkpoint(r.checkpoint);
  const auto samples = corpus.split(Split::kTrain);
  const auto it = std::find_if(samples.begin(), samples.end(), [](const SignSample* s) {
    return std::set<int>(s->glosses.begin(), s->glosses.end()).size() == s->glosses.size();
  });
  ASSERT_NE(it, samples.end());
  TempDir dir("monotone");
  const AlignmentDump d = dump_alignment(model, corpus, (*it)->id, dir / "alignment", cfg.beam_width);
  std::size_t prev = 0;
  for (std::size_t t = 0; t < d.matrix.rows; ++t) {
    const auto row = d.matrix.row(t);
    const auto arg = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    EXPECT_GE(arg, prev) << "frame " << t;
    prev = arg;
  }
}

TEST(Pipeline, AblationGridSharesHyperparameters) {
  const TrainConfig cfg = tiny_config();
  const Corpus corpus = generate_corpus(cfg.synth, cfg.seed);
  const AblationReport report = run_ablation(cfg, corpus);
  ASSERT_EQ(report.rows.size(), 4u);
  auto strip_flags = [](const std::string& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line)) {
      if (line.rfind("use_pretrained_vae", 0) == 0 || line.rfind("use_contrastive", 0) == 0) continue;
      out += line + '\n';
    }
    return out;
  };
  for (const auto& row : report.rows) {
    EXPECT_EQ(strip_flags(row.config_text), strip_flags(report.rows[0].config_text));
    EXPECT_EQ(row.dev_wers.size(), 1u);
    EXPECT_EQ(row.curves.size(), 1u);
  }
  EXPECT_FALSE(report.rows[0].use_pretrained_vae || report.rows[0].use_contrastive);
  EXPECT_TRUE(report.rows[3].use_pretrained_vae && report.rows[3].use_contrastive);
  TempDir dir("ablation");
  write_ablation_report(dir / "ablation.csv", report);
  EXPECT_NE(read_all(dir / "ablation.csv").find("Ours4"), std::string::npos);
}
