#include "cvtslr/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cvtslr/error.hpp"

namespace cvtslr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    fail(ErrorCode::kInvalidConfig, "key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  fail(ErrorCode::kInvalidConfig, "key '" + key + "': expected a boolean, got '" + value + "'");
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

OptimizerKind parse_optimizer(const std::string& key, const std::string& value) {
  if (value == "adam") return OptimizerKind::kAdam;
  if (value == "adamw") return OptimizerKind::kAdamW;
  fail(ErrorCode::kInvalidConfig, "key '" + key + "': expected adam or adamw, got '" + value + "'");
}

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "adamw"; }

KlReduction parse_kl_reduction(const std::string& key, const std::string& value) {
  if (value == "sum") return KlReduction::kSumLatent;
  if (value == "mean") return KlReduction::kMeanLatent;
  fail(ErrorCode::kInvalidConfig, "key '" + key + "': expected sum or mean, got '" + value + "'");
}

template <typename T, typename Member>
ConfigKey size_key(std::string name, std::string help, Member member) {
  return {name, std::move(help), false,
          [member, name](TrainConfig& c, const std::string& v) { member(c) = parse_number<T>(name, v); },
          [member](const TrainConfig& c) { return std::to_string(member(c)); }};
}

template <typename Member>
ConfigKey double_key(std::string name, std::string help, Member member) {
  return {name, std::move(help), false,
          [member, name](TrainConfig& c, const std::string& v) { member(c) = parse_number<double>(name, v); },
          [member](const TrainConfig& c) { return format_double(member(c)); }};
}

template <typename Member>
ConfigKey bool_key(std::string name, std::string help, Member member) {
  return {name, std::move(help), true,
          [member, name](TrainConfig& c, const std::string& v) { member(c) = parse_bool(name, v); },
          [member](const TrainConfig& c) { return std::string(member(c) ? "true" : "false"); }};
}

template <typename Member>
ConfigKey string_key(std::string name, std::string help, Member member) {
  return {name, std::move(help), false, [member](TrainConfig& c, const std::string& v) { member(c) = v; },
          [member](const TrainConfig& c) { return member(c); }};
}

template <typename Member>
ConfigKey optimizer_key(std::string name, std::string help, Member member) {
  return {name, std::move(help), false,
          [member, name](TrainConfig& c, const std::string& v) { member(c) = parse_optimizer(name, v); },
          [member](const TrainConfig& c) { return optimizer_name(member(c)); }};
}

template <typename Member>
ConfigKey kl_reduction_key(std::string name, std::string help, Member member) {
  return {name, std::move(help), false,
          [member, name](TrainConfig& c, const std::string& v) { member(c) = parse_kl_reduction(name, v); },
          [member](const TrainConfig& c) {
            return std::string(member(c) == KlReduction::kSumLatent ? "sum" : "mean");
          }};
}

#define CVTSLR_FIELD(expr) [](auto& c) -> auto& { return c.expr; }

std::vector<ConfigKey> build_keys() {
  using U64 = std::uint64_t;
  using Size = std::size_t;
  return {
      size_key<U64>("seed", "master seed for init, data order and noise", CVTSLR_FIELD(seed)),
      size_key<Size>("vocab_size", "synthetic gloss vocabulary size", CVTSLR_FIELD(synth.vocab_size)),
      size_key<Size>("min_glosses", "shortest synthetic gloss sequence", CVTSLR_FIELD(synth.min_glosses)),
      size_key<Size>("max_glosses", "longest synthetic gloss sequence", CVTSLR_FIELD(synth.max_glosses)),
      size_key<Size>("min_frames_per_gloss", "fewest frames per gloss", CVTSLR_FIELD(synth.min_frames_per_gloss)),
      size_key<Size>("max_frames_per_gloss", "most frames per gloss", CVTSLR_FIELD(synth.max_frames_per_gloss)),
      size_key<Size>("d_in", "frame feature width", CVTSLR_FIELD(synth.d_in)),
      double_key("feature_noise", "stddev of frame feature noise", CVTSLR_FIELD(synth.feature_noise)),
      size_key<U64>("prototype_seed", "seed of the gloss feature prototypes", CVTSLR_FIELD(synth.prototype_seed)),
      size_key<Size>("train_size", "training samples", CVTSLR_FIELD(synth.train_size)),
      size_key<Size>("dev_size", "development samples", CVTSLR_FIELD(synth.dev_size)),
      size_key<Size>("test_size", "test samples", CVTSLR_FIELD(synth.test_size)),
      size_key<Size>("d_model", "feature width d", CVTSLR_FIELD(model.d_model)),
      size_key<Size>("d_latent", "latent width d_z", CVTSLR_FIELD(model.d_latent)),
      size_key<Size>("visual_hidden", "hidden width of the frame MLP", CVTSLR_FIELD(model.visual_hidden)),
      size_key<Size>("heads", "attention heads per encoder layer", CVTSLR_FIELD(model.heads)),
      size_key<Size>("lstm_hidden", "Bi-LSTM hidden size per direction", CVTSLR_FIELD(model.lstm_hidden)),
      optimizer_key("pretrain_optimizer", "adam or adamw for VAE pretraining", CVTSLR_FIELD(pretrain_optimizer)),
      double_key("pretrain_lr", "VAE pretraining learning rate", CVTSLR_FIELD(pretrain_lr)),
      size_key<Size>("pretrain_batch_size", "VAE pretraining batch size", CVTSLR_FIELD(pretrain_batch_size)),
      size_key<Size>("pretrain_epochs", "VAE pretraining epochs", CVTSLR_FIELD(pretrain_epochs)),
      kl_reduction_key("kl_reduction", "KL over the latent axis: sum or mean", CVTSLR_FIELD(kl_reduction)),
      optimizer_key("slr_optimizer", "adam or adamw for recognition training", CVTSLR_FIELD(slr_optimizer)),
      double_key("slr_lr", "recognition training learning rate", CVTSLR_FIELD(slr_lr)),
      double_key("weight_decay", "decoupled weight decay (AdamW)", CVTSLR_FIELD(weight_decay)),
      size_key<Size>("slr_batch_size", "recognition training batch size", CVTSLR_FIELD(slr_batch_size)),
      size_key<Size>("slr_epochs", "recognition training epochs", CVTSLR_FIELD(slr_epochs)),
      double_key("align_weight", "weight of the contrastive alignment loss", CVTSLR_FIELD(align_weight)),
      bool_key("use_pretrained_vae", "initialize from a pretrained VAE", CVTSLR_FIELD(use_pretrained_vae)),
      bool_key("use_contrastive", "add the contrastive alignment loss", CVTSLR_FIELD(use_contrastive)),
      size_key<Size>("beam_width", "CTC prefix beam width", CVTSLR_FIELD(beam_width)),
      size_key<Size>("ablation_seeds", "training seeds per ablation cell", CVTSLR_FIELD(ablation_seeds)),
      bool_key("debug_lattice_check", "verify CTC lattice likelihood constancy per batch",
               CVTSLR_FIELD(debug_lattice_check)),
      string_key("corpus", "corpus directory", CVTSLR_FIELD(corpus)),
      string_key("out", "output directory", CVTSLR_FIELD(out)),
      string_key("vae_checkpoint", "pretrained VAE checkpoint", CVTSLR_FIELD(vae_checkpoint)),
      string_key("checkpoint", "recognition checkpoint", CVTSLR_FIELD(checkpoint)),
      string_key("split", "train, dev or test", CVTSLR_FIELD(split)),
      string_key("sample_id", "sample for alignment dumps", CVTSLR_FIELD(sample_id)),
  };
}

#undef CVTSLR_FIELD

}  // namespace

void TrainConfig::validate() const {
  synth.validate();
  if (!(pretrain_lr > 0.0) || !(slr_lr > 0.0)) fail(ErrorCode::kInvalidConfig, "learning rates must be positive");
  if (weight_decay < 0.0) fail(ErrorCode::kInvalidConfig, "weight_decay must be non-negative");
  if (align_weight < 0.0) fail(ErrorCode::kNegativeWeight, "align_weight must be non-negative");
  if (pretrain_batch_size == 0 || slr_batch_size == 0) fail(ErrorCode::kInvalidConfig, "batch sizes must be positive");
  if (beam_width == 0) fail(ErrorCode::kInvalidConfig, "beam_width must be positive");
  if (ablation_seeds == 0) fail(ErrorCode::kInvalidConfig, "ablation_seeds must be positive");
  if (model.heads == 0 || model.d_model % model.heads != 0) {
    fail(ErrorCode::kInvalidConfig, "d_model must be divisible by heads");
  }
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  fail(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
}

std::string get_config_value(const TrainConfig& cfg, const std::string& key) {
  for (const auto& k : config_keys()) {
    if (k.name == key) return k.get(cfg);
  }
  fail(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
}

void apply_config_text(TrainConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kInvalidConfig, origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorCode::kInvalidConfig, origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(TrainConfig& cfg, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::kInvalidConfig, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

std::string config_to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

TrainConfig benchmark_config() {
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.synth.vocab_size = 10;
  cfg.synth.train_size = 200;
  cfg.synth.dev_size = 40;
  cfg.synth.test_size = 40;
  cfg.synth.feature_noise = 0.1;
  cfg.pretrain_lr = 1e-3;
  cfg.kl_reduction = KlReduction::kMeanLatent;
  cfg.slr_lr = 1e-3;
  cfg.slr_epochs = 30;
  return cfg;
}

}  // namespace cvtslr
