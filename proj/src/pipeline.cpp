#include "cvtslr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "cvtslr/error.hpp"
#include "cvtslr/objectives.hpp"
#include "cvtslr/ops.hpp"
#include "cvtslr/optim.hpp"

namespace cvtslr {

namespace {

Tensor to_tensor(const Matrix& m) { return Tensor({m.rows, m.cols}, m.data); }

// Sum of scalar tensors scaled to their mean.
Tensor mean_of(std::span<const Tensor> terms) {
  Tensor acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return scale(acc, 1.0 / static_cast<double>(terms.size()));
}

std::vector<Tensor> select_parameters(const ParameterStore& store, bool (*keep)(const std::string&)) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : store.entries()) {
    if (keep(name)) out.push_back(t);
  }
  return out;
}

bool is_step1_parameter(const std::string& name) {
  for (const char* prefix : {"embedding.", "encoder.", "decoder.", "classifier."}) {
    if (name.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

// The embedding table only feeds the gloss path, which step 2 never runs.
bool is_step2_parameter(const std::string& name) { return name.rfind("embedding.", 0) != 0; }

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

void check_lattice_constancy(const Matrix& log_probs, const GlossSeq& target) {
  const CtcLattice lat = ctc_lattice(log_probs, target);
  for (std::size_t t = 0; t < log_probs.rows; ++t) {
    const double at = lat.log_likelihood_at(t, log_probs);
    if (std::abs(at - lat.log_likelihood) > 1e-9) {
      fail(ErrorCode::kInvariantViolation, "CTC lattice total at frame " + std::to_string(t) + " is " +
                                               std::to_string(at) + ", expected " +
                                               std::to_string(lat.log_likelihood));
    }
  }
}

double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out.precision(17);
  return out;
}

}  // namespace

Rng make_rng(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

ModelConfig resolve_model_config(const TrainConfig& cfg, const Corpus& corpus) {
  ModelConfig m = cfg.model;
  m.vocab_size = corpus.vocab.size();
  const std::size_t d_in = corpus.feature_dim();
  m.d_in = d_in > 0 ? d_in : cfg.synth.d_in;
  m.validate();
  return m;
}

VaeLossParts vae_batch_loss(const CvtSlrModel& model, std::span<const SignSample* const> samples, const Batch& batch,
                            ReparamMode mode, Rng& noise_rng, KlReduction reduction) {
  std::vector<Tensor> kls;
  std::vector<Tensor> ces;
  for (std::size_t idx : batch.indices) {
    const GlossSeq& glosses = samples[idx]->glosses;
    VaeOutputs out = model.forward_gloss2gloss(glosses, mode, noise_rng);
    kls.push_back(kl_loss(out.posterior.mu, out.posterior.sigma, reduction));
    ces.push_back(gloss2gloss_ce(out.gloss_logits, glosses));
  }
  VaeLossParts parts;
  parts.kl = mean_of(kls);
  parts.ce = mean_of(ces);
  parts.total = vae_loss(parts.kl, parts.ce);
  return parts;
}

double vae_eval_loss(const CvtSlrModel& model, std::span<const SignSample* const> samples, KlReduction reduction) {
  if (samples.empty()) fail(ErrorCode::kSplitMissing, "no samples to evaluate the VAE on");
  NoGradGuard no_grad;
  Rng unused(0);
  const auto idx = all_indices(samples.size());
  const Batch batch = make_batch(samples, idx);
  return vae_batch_loss(model, samples, batch, ReparamMode::kDeterministic, unused, reduction).total.item();
}

SlrLossParts slr_batch_loss(const CvtSlrModel& model, const Batch& batch, std::span<const SignSample* const> samples,
                            bool use_contrastive, double align_weight, bool check_lattice) {
  (void)samples;
  std::vector<Tensor> ctcs;
  std::vector<Tensor> visual;
  std::vector<Tensor> textual;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    SlrOutputs out = model.forward_slr(batch.sample_frames(b));
    const GlossSeq target = batch.sample_target(b);
    if (check_lattice) check_lattice_constancy(Matrix::from_tensor(out.log_probs), target);
    ctcs.push_back(ctc_loss(out.log_probs, target));
    if (use_contrastive) {
      visual.push_back(out.visual_features);
      textual.push_back(out.textual_features);
    }
  }
  SlrLossParts parts;
  parts.ctc = mean_of(ctcs);
  if (!use_contrastive) {
    parts.total = parts.ctc;
    return parts;
  }
  const auto s = pool_and_normalize(pad_stack(visual, batch.max_frames), batch.mask, FeatureSource::kVisual);
  const auto v = pool_and_normalize(pad_stack(textual, batch.max_frames), batch.mask, FeatureSource::kTextual);
  parts.align = contrastive_align_loss(s, v);
  parts.total = cvt_slr_loss(parts.ctc, parts.align, align_weight);
  return parts;
}

PretrainResult pretrain_vae(const TrainConfig& cfg, const Corpus& corpus) {
  cfg.validate();
  const auto train = corpus.split(Split::kTrain);
  if (train.empty()) fail(ErrorCode::kCorpusMissing, "corpus has no training samples");

  Rng init_rng = make_rng(cfg.seed, RngStream::kInit);
  Rng data_rng = make_rng(cfg.seed, RngStream::kData);
  Rng noise_rng = make_rng(cfg.seed, RngStream::kNoise);
  CvtSlrModel model(resolve_model_config(cfg, corpus), init_rng);

  OptimizerConfig opt_cfg;
  opt_cfg.kind = cfg.pretrain_optimizer;
  opt_cfg.learning_rate = cfg.pretrain_lr;
  opt_cfg.weight_decay = cfg.pretrain_optimizer == OptimizerKind::kAdamW ? cfg.weight_decay : 0.0;
  Optimizer opt(select_parameters(model.parameters(), is_step1_parameter), opt_cfg);

  PretrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
    PretrainEpoch rec;
    rec.epoch = epoch;
    for (const Batch& batch : make_batches(train, cfg.pretrain_batch_size, data_rng)) {
      opt.zero_grad();
      VaeLossParts parts = vae_batch_loss(model, train, batch, ReparamMode::kSample, noise_rng, cfg.kl_reduction);
      const double w = static_cast<double>(batch.size());
      rec.kl += w * parts.kl.item();
      rec.ce += w * parts.ce.item();
      rec.total += w * parts.total.item();
      parts.total.backward();
      opt.step();
    }
    const double n = static_cast<double>(train.size());
    rec.kl /= n;
    rec.ce /= n;
    rec.total /= n;
    result.history.push_back(rec);
  }

  const auto dev = corpus.split(Split::kDev);
  result.dev_loss = vae_eval_loss(model, dev.empty() ? train : dev, cfg.kl_reduction);
  result.checkpoint = model.to_checkpoint();
  return result;
}

CvtSlrModel build_slr_model(const TrainConfig& cfg, const Corpus& corpus, const Checkpoint* vae) {
  Rng init_rng = make_rng(cfg.seed, RngStream::kInit);
  CvtSlrModel model(resolve_model_config(cfg, corpus), init_rng);
  if (cfg.use_pretrained_vae) {
    if (!vae) fail(ErrorCode::kCheckpointIncompatible, "use_pretrained_vae is set but no VAE checkpoint was given");
    model.load_pretrained_vae(*vae);
  }
  return model;
}

SlrResult train_slr(const TrainConfig& cfg, const Corpus& corpus, const Checkpoint* vae) {
  cfg.validate();
  const auto train = corpus.split(Split::kTrain);
  const auto dev = corpus.split(Split::kDev);
  if (train.empty()) fail(ErrorCode::kCorpusMissing, "corpus has no training samples");
  if (dev.empty()) fail(ErrorCode::kSplitMissing, "corpus has no dev samples for model selection");
  if (corpus.feature_dim() == 0) fail(ErrorCode::kCorpusMissing, "corpus was loaded without frame features");

  CvtSlrModel model = build_slr_model(cfg, corpus, vae);
  Rng data_rng = make_rng(cfg.seed, RngStream::kData);

  OptimizerConfig opt_cfg;
  opt_cfg.kind = cfg.slr_optimizer;
  opt_cfg.learning_rate = cfg.slr_lr;
  opt_cfg.weight_decay = cfg.slr_optimizer == OptimizerKind::kAdamW ? cfg.weight_decay : 0.0;
  Optimizer opt(select_parameters(model.parameters(), is_step2_parameter), opt_cfg);

  SlrResult result;
  bool have_best = false;
  for (std::size_t epoch = 1; epoch <= cfg.slr_epochs; ++epoch) {
    SlrEpoch rec;
    rec.epoch = epoch;
    for (const Batch& batch : make_batches(train, cfg.slr_batch_size, data_rng)) {
      opt.zero_grad();
      SlrLossParts parts =
          slr_batch_loss(model, batch, train, cfg.use_contrastive, cfg.align_weight, cfg.debug_lattice_check);
      const double w = static_cast<double>(batch.size());
      rec.ctc += w * parts.ctc.item();
      if (parts.align.defined()) rec.align += w * parts.align.item();
      rec.total += w * parts.total.item();
      parts.total.backward();
      opt.step();
    }
    const double n = static_cast<double>(train.size());
    rec.ctc /= n;
    rec.align /= n;
    rec.total /= n;
    rec.dev_wer = evaluate(model, dev, cfg.beam_width).report.wer;
    result.history.push_back(rec);
    if (!have_best || rec.dev_wer < result.best_dev_wer) {
      have_best = true;
      result.best_dev_wer = rec.dev_wer;
      result.best_epoch = epoch;
      result.checkpoint = model.to_checkpoint();
    }
  }
  if (!have_best) result.checkpoint = model.to_checkpoint();
  return result;
}

EvalResult evaluate(const CvtSlrModel& model, std::span<const SignSample* const> samples, std::size_t beam_width) {
  if (samples.empty()) fail(ErrorCode::kSplitMissing, "no samples to evaluate");
  NoGradGuard no_grad;
  EvalResult result;
  std::vector<RefHypPair> pairs;
  for (const SignSample* s : samples) {
    if (s->frames.rows == 0) fail(ErrorCode::kCorpusMissing, "sample " + s->id + " has no frame features");
    const SlrOutputs out = model.forward_slr(to_tensor(s->frames));
    Transcript tr{s->id, s->glosses, beam_decode(Matrix::from_tensor(out.log_probs), beam_width)};
    pairs.emplace_back(tr.reference, tr.hypothesis.glosses);
    result.transcripts.push_back(std::move(tr));
  }
  result.report = wer(pairs);
  return result;
}

EvalResult evaluate(const Checkpoint& ckpt, const Corpus& corpus, Split split, std::size_t beam_width) {
  const auto samples = corpus.split(split);
  if (samples.empty()) fail(ErrorCode::kSplitMissing, "split " + std::string(split_name(split)) + " is empty");
  const CvtSlrModel model = CvtSlrModel::from_checkpoint(ckpt);
  return evaluate(model, samples, beam_width);
}

AblationReport run_ablation(const TrainConfig& cfg, const Corpus& corpus) {
  cfg.validate();
  struct Cell {
    const char* name;
    bool vae;
    bool contra;
  };
  static constexpr Cell kCells[] = {
      {"Ours1 (w/o VAE+Contra)", false, false},
      {"Ours2 (w/ VAE)", true, false},
      {"Ours3 (w/ Contra)", false, true},
      {"Ours4 (w/ VAE+Contra)", true, true},
  };

  AblationReport report;
  for (const Cell& cell : kCells) {
    AblationRow row;
    row.name = cell.name;
    row.use_pretrained_vae = cell.vae;
    row.use_contrastive = cell.contra;
    TrainConfig shown = cfg;
    shown.use_pretrained_vae = cell.vae;
    shown.use_contrastive = cell.contra;
    row.config_text = config_to_text(shown);
    report.rows.push_back(std::move(row));
  }

  for (std::size_t k = 0; k < cfg.ablation_seeds; ++k) {
    TrainConfig seeded = cfg;
    seeded.seed = cfg.seed + k;
    const PretrainResult vae = pretrain_vae(seeded, corpus);
    for (std::size_t c = 0; c < report.rows.size(); ++c) {
      AblationRow& row = report.rows[c];
      TrainConfig run = seeded;
      run.use_pretrained_vae = row.use_pretrained_vae;
      run.use_contrastive = row.use_contrastive;
      const SlrResult slr = train_slr(run, corpus, &vae.checkpoint);
      const EvalResult dev = evaluate(slr.checkpoint, corpus, Split::kDev, run.beam_width);
      const EvalResult test = evaluate(slr.checkpoint, corpus, Split::kTest, run.beam_width);
      row.dev_wers.push_back(dev.report.wer);
      row.test_wers.push_back(test.report.wer);
      if (k == 0) {
        row.dev_totals = dev.report.totals;
        row.test_totals = test.report.totals;
      }
      row.curves.push_back(slr.history);
    }
  }

  for (AblationRow& row : report.rows) {
    row.dev_wer = median(row.dev_wers);
    row.test_wer = median(row.test_wers);
  }
  report.trend_holds = report.rows[3].dev_wer <= report.rows[0].dev_wer;
  return report;
}

AlignmentDump compute_alignment(const CvtSlrModel& model, const SignSample& sample, std::size_t beam_width) {
  if (sample.frames.rows == 0) fail(ErrorCode::kCorpusMissing, "sample " + sample.id + " has no frame features");
  NoGradGuard no_grad;
  const SlrOutputs out = model.forward_slr(to_tensor(sample.frames));
  AlignmentDump dump;
  dump.matrix = alignment_matrix(Matrix::from_tensor(out.visual_features), Matrix::from_tensor(out.textual_features));
  dump.reference = sample.glosses;
  dump.hypothesis = beam_decode(Matrix::from_tensor(out.log_probs), beam_width).glosses;
  return dump;
}

AlignmentDump dump_alignment(const CvtSlrModel& model, const Corpus& corpus, const std::string& sample_id,
                             const std::filesystem::path& out_dir, std::size_t beam_width) {
  const SignSample* sample = corpus.find(sample_id);
  if (!sample) fail(ErrorCode::kSampleMissing, "no sample with id '" + sample_id + "'");
  AlignmentDump dump = compute_alignment(model, *sample, beam_width);
  std::filesystem::create_directories(out_dir);
  write_matrix_csv(out_dir / "align.csv", dump.matrix);
  write_matrix_pgm(out_dir / "align.pgm", dump.matrix);
  auto out = open_output(out_dir / "glosses.txt");
  out << "reference: " << join_glosses(dump.reference, corpus.vocab) << '\n';
  out << "hypothesis: " << join_glosses(dump.hypothesis, corpus.vocab) << '\n';
  return dump;
}

void write_pretrain_curve(const std::filesystem::path& path, std::span<const PretrainEpoch> history) {
  auto out = open_output(path);
  out << "epoch,kl,ce,total\n";
  for (const auto& e : history) out << e.epoch << ',' << e.kl << ',' << e.ce << ',' << e.total << '\n';
}

void write_slr_curve(const std::filesystem::path& path, std::span<const SlrEpoch> history) {
  auto out = open_output(path);
  out << "epoch,ctc,align,total,dev_wer\n";
  for (const auto& e : history) {
    out << e.epoch << ',' << e.ctc << ',' << e.align << ',' << e.total << ',' << e.dev_wer << '\n';
  }
}

void write_eval_report(const std::filesystem::path& path, const EvalResult& result, const GlossVocab& vocab) {
  auto out = open_output(path);
  out << "id,reference,hypothesis,del,ins,sub,ref_len\n";
  for (std::size_t i = 0; i < result.transcripts.size(); ++i) {
    const Transcript& tr = result.transcripts[i];
    const EditBreakdown& e = result.report.per_sample[i];
    out << tr.id << ',' << join_glosses(tr.reference, vocab) << ',' << join_glosses(tr.hypothesis.glosses, vocab)
        << ',' << e.del << ',' << e.ins << ',' << e.sub << ',' << e.ref_len << '\n';
  }
  const EditBreakdown& t = result.report.totals;
  out << "total,,," << t.del << ',' << t.ins << ',' << t.sub << ',' << t.ref_len << '\n';
}

void write_ablation_report(const std::filesystem::path& path, const AblationReport& report) {
  auto out = open_output(path);
  out << "name,use_pretrained_vae,use_contrastive,dev_wer,test_wer,dev_del,dev_ins,dev_sub,dev_ref_len,test_del,"
         "test_ins,test_sub,test_ref_len,dev_wers,test_wers\n";
  auto join = [](const std::vector<double>& xs) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t i = 0; i < xs.size(); ++i) s << (i ? ";" : "") << xs[i];
    return s.str();
  };
  for (const AblationRow& r : report.rows) {
    out << r.name << ',' << r.use_pretrained_vae << ',' << r.use_contrastive << ',' << r.dev_wer << ',' << r.test_wer
        << ',' << r.dev_totals.del << ',' << r.dev_totals.ins << ',' << r.dev_totals.sub << ',' << r.dev_totals.ref_len
        << ',' << r.test_totals.del << ',' << r.test_totals.ins << ',' << r.test_totals.sub << ','
        << r.test_totals.ref_len << ',' << join(r.dev_wers) << ',' << join(r.test_wers) << '\n';
  }
}

std::string join_glosses(const GlossSeq& seq, const GlossVocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += vocab.gloss(seq[i]);
  }
  return out;
}

}  // namespace cvtslr
