#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cvtslr/checkpoint.hpp"
#include "cvtslr/config.hpp"
#include "cvtslr/corpus.hpp"
#include "cvtslr/metrics.hpp"
#include "cvtslr/model.hpp"
#include "cvtslr/objectives.hpp"

namespace cvtslr {

// Independent RNG streams so that, e.g., evaluation cannot shift the
// initialization or data order of a run.
enum class RngStream : std::uint64_t { kInit = 1, kData = 2, kNoise = 3 };
Rng make_rng(std::uint64_t seed, RngStream stream);

// Model config with the corpus-dependent sizes filled in.
ModelConfig resolve_model_config(const TrainConfig& cfg, const Corpus& corpus);

struct VaeLossParts {
  Tensor total;
  Tensor kl;
  Tensor ce;
};

VaeLossParts vae_batch_loss(const CvtSlrModel& model, std::span<const SignSample* const> samples, const Batch& batch,
                            ReparamMode mode, Rng& noise_rng,
                            KlReduction reduction = KlReduction::kSumLatent);

// Deterministic (z = mu) VAE loss averaged over the given samples.
double vae_eval_loss(const CvtSlrModel& model, std::span<const SignSample* const> samples,
                     KlReduction reduction = KlReduction::kSumLatent);

struct SlrLossParts {
  Tensor total;
  Tensor ctc;
  Tensor align;  // undefined when the contrastive term is off
};

SlrLossParts slr_batch_loss(const CvtSlrModel& model, const Batch& batch, std::span<const SignSample* const> samples,
                            bool use_contrastive, double align_weight, bool check_lattice = false);

struct PretrainEpoch {
  std::size_t epoch = 0;
  double kl = 0.0;
  double ce = 0.0;
  double total = 0.0;
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<PretrainEpoch> history;
  double dev_loss = 0.0;
};

// Step 1: gloss-to-gloss VAE training on training-split glosses only.
PretrainResult pretrain_vae(const TrainConfig& cfg, const Corpus& corpus);

struct SlrEpoch {
  std::size_t epoch = 0;
  double ctc = 0.0;
  double align = 0.0;
  double total = 0.0;
  double dev_wer = 0.0;
};

struct SlrResult {
  Checkpoint checkpoint;  // best dev WER
  std::vector<SlrEpoch> history;
  std::size_t best_epoch = 0;
  double best_dev_wer = 0.0;
};

// Builds the step-2 model: fresh initialization, optionally overlaid with a
// pretrained VAE.
CvtSlrModel build_slr_model(const TrainConfig& cfg, const Corpus& corpus, const Checkpoint* vae);

// Step 2: CTC (+ weighted contrastive alignment) training.
SlrResult train_slr(const TrainConfig& cfg, const Corpus& corpus, const Checkpoint* vae);

struct Transcript {
  std::string id;
  GlossSeq reference;
  DecodeResult hypothesis;
};

struct EvalResult {
  WerReport report;
  std::vector<Transcript> transcripts;
};

EvalResult evaluate(const CvtSlrModel& model, std::span<const SignSample* const> samples, std::size_t beam_width);
EvalResult evaluate(const Checkpoint& ckpt, const Corpus& corpus, Split split, std::size_t beam_width);

struct AblationRow {
  std::string name;
  bool use_pretrained_vae = false;
  bool use_contrastive = false;
  std::vector<double> dev_wers;  // one per seed
  std::vector<double> test_wers;
  double dev_wer = 0.0;          // median over seeds
  double test_wer = 0.0;
  EditBreakdown dev_totals;      // first seed
  EditBreakdown test_totals;
  std::string config_text;       // effective hyperparameters of the run
  std::vector<std::vector<SlrEpoch>> curves;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  bool trend_holds = false;  // Ours4 dev WER <= Ours1 dev WER (advisory)
};

// Runs the 2x2 grid (VAE pretraining x contrastive loss) over
// cfg.ablation_seeds training seeds starting at cfg.seed.
AblationReport run_ablation(const TrainConfig& cfg, const Corpus& corpus);

struct AlignmentDump {
  Matrix matrix;
  GlossSeq reference;
  GlossSeq hypothesis;
};

AlignmentDump compute_alignment(const CvtSlrModel& model, const SignSample& sample, std::size_t beam_width);
// Writes align.csv, align.pgm and glosses.txt into out_dir.
AlignmentDump dump_alignment(const CvtSlrModel& model, const Corpus& corpus, const std::string& sample_id,
                             const std::filesystem::path& out_dir, std::size_t beam_width);

// CSV writers used by the CLI and the ablation runner.
void write_pretrain_curve(const std::filesystem::path& path, std::span<const PretrainEpoch> history);
void write_slr_curve(const std::filesystem::path& path, std::span<const SlrEpoch> history);
void write_eval_report(const std::filesystem::path& path, const EvalResult& result, const GlossVocab& vocab);
void write_ablation_report(const std::filesystem::path& path, const AblationReport& report);

std::string join_glosses(const GlossSeq& seq, const GlossVocab& vocab);

}  // namespace cvtslr
