#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cvtslr/corpus.hpp"
#include "cvtslr/model.hpp"
#include "cvtslr/objectives.hpp"
#include "cvtslr/optim.hpp"

namespace cvtslr {

struct TrainConfig {
  std::uint64_t seed = 1;
  SynthConfig synth;
  ModelConfig model;  // d_in and vocab_size are taken from the corpus at train time

  OptimizerKind pretrain_optimizer = OptimizerKind::kAdam;
  double pretrain_lr = 1e-4;
  std::size_t pretrain_batch_size = 16;
  std::size_t pretrain_epochs = 50;
  KlReduction kl_reduction = KlReduction::kSumLatent;

  OptimizerKind slr_optimizer = OptimizerKind::kAdamW;
  double slr_lr = 1e-4;
  double weight_decay = 1e-4;
  std::size_t slr_batch_size = 8;
  std::size_t slr_epochs = 80;

  double align_weight = 10.0;
  bool use_pretrained_vae = true;
  bool use_contrastive = true;
  std::size_t beam_width = 10;
  std::size_t ablation_seeds = 3;
  bool debug_lattice_check = false;

  std::string corpus = "corpus";
  std::string out = "run";
  std::string vae_checkpoint;
  std::string checkpoint;
  std::string split = "dev";
  std::string sample_id;

  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
  bool is_bool = false;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

// Every tunable key, in a stable order.
const std::vector<ConfigKey>& config_keys();

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const TrainConfig& cfg, const std::string& key);

// Flat "key = value" lines; '#' starts a comment.
void apply_config_file(TrainConfig& cfg, const std::filesystem::path& path);
void apply_config_text(TrainConfig& cfg, const std::string& text, const std::string& origin = "<text>");
// Serializes every key; parsing the result reproduces the config.
std::string config_to_text(const TrainConfig& cfg);

// The fixed synthetic benchmark used for learnability checks.
TrainConfig benchmark_config();

}  // namespace cvtslr
