#include "cvtslr/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cvtslr/error.hpp"
#include "cvtslr/ops.hpp"

namespace cvtslr {

namespace {

constexpr const char* kConfigEntry = "meta.model_config";

bool is_vae_parameter(const std::string& name) {
  for (const char* prefix : {"embedding.", "encoder.", "decoder.", "classifier."}) {
    if (name.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size == 0 || d_in == 0 || d_model == 0 || d_latent == 0 || visual_hidden == 0 || heads == 0 ||
      lstm_hidden == 0) {
    fail(ErrorCode::kInvalidConfig, "model dimensions must be positive");
  }
  if (d_model % heads != 0) fail(ErrorCode::kInvalidConfig, "d_model must be divisible by heads");
}

VisualModule::VisualModule(ParameterStore& store, const ModelConfig& cfg, Rng& rng)
    : hidden_(store, "visual.hidden", cfg.d_in, cfg.visual_hidden, rng),
      out_(store, "visual.out", cfg.visual_hidden, cfg.d_model, rng) {}

Tensor VisualModule::forward(const Tensor& frames) const { return out_.forward(relu(hidden_.forward(frames))); }

PosteriorEncoder::PosteriorEncoder(ParameterStore& store, const ModelConfig& cfg, Rng& rng)
    : layer1_(store, "encoder.attn1", cfg.d_model, cfg.heads, rng),
      layer2_(store, "encoder.attn2", cfg.d_model, cfg.heads, rng),
      mu_head_(store, "encoder.mu", cfg.d_model, cfg.d_latent, rng),
      log_var_head_(store, "encoder.log_var", cfg.d_model, cfg.d_latent, rng) {}

Posterior PosteriorEncoder::forward(const Tensor& h) const {
  if (h.rank() != 2) fail(ErrorCode::kDimensionMismatch, "encoder expects [T, d], got " + shape_str(h.shape()));
  const Tensor x = layer2_.forward(layer1_.forward(add(h, sinusoidal_positions(h.dim(0), h.dim(1)))));
  Posterior out;
  out.mu = mu_head_.forward(x);
  out.log_var = log_var_head_.forward(x);
  out.sigma = exp(scale(out.log_var, 0.5));
  return out;
}

Tensor reparameterize(const Tensor& mu, const Tensor& sigma, ReparamMode mode, Rng& rng) {
  if (mu.shape() != sigma.shape()) {
    fail(ErrorCode::kDimensionMismatch, "reparameterize: mu " + shape_str(mu.shape()) + " vs sigma " +
                                            shape_str(sigma.shape()));
  }
  if (mode == ReparamMode::kDeterministic) return mu;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(mu.numel());
  for (double& e : eps) e = normal(rng);
  return add(mu, mul(sigma, Tensor(mu.shape(), std::move(eps))));
}

GenerativeDecoder::GenerativeDecoder(ParameterStore& store, const ModelConfig& cfg, Rng& rng)
    : layer1_(store, "decoder.lstm1", cfg.d_latent, cfg.lstm_hidden, rng),
      layer2_(store, "decoder.lstm2", 2 * cfg.lstm_hidden, cfg.lstm_hidden, rng),
      out_(store, "decoder.out", 2 * cfg.lstm_hidden, cfg.d_model, rng) {}

Tensor GenerativeDecoder::forward(const Tensor& z) const {
  if (z.rank() != 2) fail(ErrorCode::kEmptySequence, "decoder expects a [T, d_z] sequence");
  return out_.forward(layer2_.forward(layer1_.forward(z)));
}

VideoGlossAdapter::VideoGlossAdapter(ParameterStore& store, const ModelConfig& cfg, Rng& rng)
    : hidden1_(store, "adapter.hidden1", cfg.vocab_size + 1, cfg.vocab_size, rng),
      hidden2_(store, "adapter.hidden2", cfg.vocab_size, cfg.vocab_size, rng),
      out_(store, "adapter.out", cfg.vocab_size, cfg.d_model, rng) {}

Tensor VideoGlossAdapter::forward(const Tensor& probs) const {
  if (probs.rank() != 2 || probs.dim(1) != hidden1_.in_features()) {
    fail(ErrorCode::kDimensionMismatch, "adapter expects [T, |V|+1] probabilities, got " + shape_str(probs.shape()));
  }
  const std::size_t cols = probs.dim(1);
  auto pv = probs.values();
  for (std::size_t t = 0; t < probs.dim(0); ++t) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += pv[t * cols + c];
    if (std::abs(total - 1.0) > 1e-6) {
      fail(ErrorCode::kNotNormalized, "adapter input row " + std::to_string(t) + " sums to " + std::to_string(total));
    }
  }
  return out_.forward(relu(hidden2_.forward(relu(hidden1_.forward(probs)))));
}

void VideoGlossAdapter::init_from_embedding(const Tensor& table) {
  Tensor w = out_.weight();
  if (table.shape() != w.shape()) {
    fail(ErrorCode::kCheckpointIncompatible, "embedding " + shape_str(table.shape()) + " cannot seed adapter weight " +
                                                 shape_str(w.shape()));
  }
  std::copy(table.values().begin(), table.values().end(), w.mutable_values().begin());
  Tensor b = out_.bias();
  std::fill(b.mutable_values().begin(), b.mutable_values().end(), 0.0);
}

SharedClassifier::SharedClassifier(ParameterStore& store, const ModelConfig& cfg, Rng& rng)
    : linear_(store, "classifier", cfg.d_model, cfg.vocab_size + 1, rng) {}

Tensor SharedClassifier::forward(const Tensor& feats) const { return linear_.forward(feats); }

CvtSlrModel::CvtSlrModel(const ModelConfig& cfg, Rng& init_rng) : config_(cfg) {
  config_.validate();
  embedding_ = params_.create_uniform("embedding.table", {cfg.vocab_size, cfg.d_model}, 1.0, init_rng);
  visual_ = VisualModule(params_, cfg, init_rng);
  encoder_ = PosteriorEncoder(params_, cfg, init_rng);
  decoder_ = GenerativeDecoder(params_, cfg, init_rng);
  adapter_ = VideoGlossAdapter(params_, cfg, init_rng);
  classifier_ = SharedClassifier(params_, cfg, init_rng);
}

Tensor CvtSlrModel::embed_glosses(std::span<const int> ids) const { return gather_rows(embedding_, ids); }

Tensor CvtSlrModel::visual_encode(const Tensor& frames) const {
  if (frames.rank() != 2 || frames.dim(1) != config_.d_in) {
    fail(ErrorCode::kDimensionMismatch, "frames must be [T, " + std::to_string(config_.d_in) + "], got " +
                                            shape_str(frames.shape()));
  }
  return visual_.forward(frames);
}

Tensor CvtSlrModel::classify(const Tensor& feats) const { return classifier_.forward(feats); }

VaeOutputs CvtSlrModel::forward_gloss2gloss(std::span<const int> glosses, ReparamMode mode, Rng& rng) const {
  if (glosses.empty()) fail(ErrorCode::kEmptySequence, "gloss sequence is empty");
  VaeOutputs out;
  out.posterior = encoder_.forward(embed_glosses(glosses));
  out.z = reparameterize(out.posterior.mu, out.posterior.sigma, mode, rng);
  out.features = decoder_.forward(out.z);
  out.gloss_logits = slice_last(classify(out.features), 0, config_.vocab_size);
  return out;
}

SlrOutputs CvtSlrModel::forward_slr(const Tensor& frames) const {
  SlrOutputs out;
  out.visual_features = visual_encode(frames);
  out.visual_logits = classify(out.visual_features);
  out.adapted = adapter_.forward(softmax_last(out.visual_logits));
  out.posterior = encoder_.forward(out.adapted);
  out.textual_features = decoder_.forward(out.posterior.mu);
  out.textual_logits = classify(out.textual_features);
  out.log_probs = log_softmax_last(out.textual_logits);
  return out;
}

Checkpoint CvtSlrModel::to_checkpoint() const {
  Checkpoint ckpt;
  const auto& c = config_;
  ckpt.entries.push_back({kConfigEntry,
                          {7},
                          {static_cast<double>(c.vocab_size), static_cast<double>(c.d_in),
                           static_cast<double>(c.d_model), static_cast<double>(c.d_latent),
                           static_cast<double>(c.visual_hidden), static_cast<double>(c.heads),
                           static_cast<double>(c.lstm_hidden)}});
  for (const auto& [name, t] : params_.entries()) {
    ckpt.entries.push_back({name, t.shape(), std::vector<double>(t.values().begin(), t.values().end())});
  }
  return ckpt;
}

ModelConfig model_config_from_checkpoint(const Checkpoint& ckpt) {
  const auto* meta = ckpt.find(kConfigEntry);
  if (!meta || meta->values.size() != 7) {
    fail(ErrorCode::kCheckpointIncompatible, "checkpoint lacks a model configuration entry");
  }
  auto as_size = [&](std::size_t i) { return static_cast<std::size_t>(meta->values[i]); };
  ModelConfig cfg;
  cfg.vocab_size = as_size(0);
  cfg.d_in = as_size(1);
  cfg.d_model = as_size(2);
  cfg.d_latent = as_size(3);
  cfg.visual_hidden = as_size(4);
  cfg.heads = as_size(5);
  cfg.lstm_hidden = as_size(6);
  return cfg;
}

CvtSlrModel CvtSlrModel::from_checkpoint(const Checkpoint& ckpt) {
  Rng unused(0);
  CvtSlrModel model(model_config_from_checkpoint(ckpt), unused);
  model.load_entries(ckpt, false);
  return model;
}

void CvtSlrModel::load_pretrained_vae(const Checkpoint& ckpt) {
  load_entries(ckpt, true);
  adapter_.init_from_embedding(embedding_);
}

void CvtSlrModel::load_entries(const Checkpoint& ckpt, bool vae_only) {
  for (auto& [name, t] : params_.entries()) {
    if (vae_only && !is_vae_parameter(name)) continue;
    const auto* e = ckpt.find(name);
    if (!e) fail(ErrorCode::kCheckpointIncompatible, "checkpoint has no parameter " + name);
    if (e->shape != t.shape()) {
      fail(ErrorCode::kCheckpointIncompatible, "parameter " + name + " is " + shape_str(e->shape) + " in checkpoint but " +
                                                   shape_str(t.shape()) + " in model");
    }
    Tensor target = t;
    std::copy(e->values.begin(), e->values.end(), target.mutable_values().begin());
  }
}

}  // namespace cvtslr
