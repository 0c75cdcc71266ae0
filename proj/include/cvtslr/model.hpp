#pragma once

#include <cstddef>
#include <span>

#include "cvtslr/checkpoint.hpp"
#include "cvtslr/nn.hpp"
#include "cvtslr/tensor.hpp"

namespace cvtslr {

struct ModelConfig {
  std::size_t vocab_size = 10;  // real glosses; the classifier adds one blank column
  std::size_t d_in = 32;
  std::size_t d_model = 64;
  std::size_t d_latent = 64;
  std::size_t visual_hidden = 64;
  std::size_t heads = 4;
  std::size_t lstm_hidden = 64;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Frame-local MLP standing in for the 2D-CNN: [T, d_in] -> [T, d].
class VisualModule {
 public:
  VisualModule() = default;
  VisualModule(ParameterStore& store, const ModelConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& frames) const;

 private:
  Linear hidden_;
  Linear out_;
};

struct Posterior {
  Tensor mu;
  Tensor sigma;
  Tensor log_var;
};

// Two self-attention layers over position-encoded input, then separate
// single-layer heads for mu and log sigma^2.
class PosteriorEncoder {
 public:
  PosteriorEncoder() = default;
  PosteriorEncoder(ParameterStore& store, const ModelConfig& cfg, Rng& rng);
  Posterior forward(const Tensor& h) const;

 private:
  SelfAttentionLayer layer1_;
  SelfAttentionLayer layer2_;
  Linear mu_head_;
  Linear log_var_head_;
};

enum class ReparamMode { kSample, kDeterministic };

// z = mu + sigma * eps with eps ~ N(0, I) in sample mode; z = mu otherwise.
Tensor reparameterize(const Tensor& mu, const Tensor& sigma, ReparamMode mode, Rng& rng);

// Two Bi-LSTM layers and a projection to d; frame-synchronous.
class GenerativeDecoder {
 public:
  GenerativeDecoder() = default;
  GenerativeDecoder(ParameterStore& store, const ModelConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& z) const;

 private:
  BiLstmLayer layer1_;
  BiLstmLayer layer2_;
  Linear out_;
};

// MLP over per-frame class probabilities (|V|+1 wide) with two ReLU hidden
// layers of width |V|; the final |V| x d layer takes the gloss embedding.
class VideoGlossAdapter {
 public:
  VideoGlossAdapter() = default;
  VideoGlossAdapter(ParameterStore& store, const ModelConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& probs) const;
  void init_from_embedding(const Tensor& table);

  const Linear& hidden1() const { return hidden1_; }
  const Linear& hidden2() const { return hidden2_; }
  const Linear& out() const { return out_; }

 private:
  Linear hidden1_;
  Linear hidden2_;
  Linear out_;
};

// d -> |V|+1 map used by both the visual and the textual branch.
class SharedClassifier {
 public:
  SharedClassifier() = default;
  SharedClassifier(ParameterStore& store, const ModelConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& feats) const;
  const Linear& linear() const { return linear_; }

 private:
  Linear linear_;
};

struct VaeOutputs {
  Posterior posterior;
  Tensor z;
  Tensor features;
  Tensor gloss_logits;  // [N, |V|], blank column dropped
};

struct SlrOutputs {
  Tensor visual_features;   // [T, d]
  Tensor visual_logits;     // [T, |V|+1]
  Tensor adapted;           // [T, d]
  Posterior posterior;
  Tensor textual_features;  // [T, d]
  Tensor textual_logits;    // [T, |V|+1]
  Tensor log_probs;         // [T, |V|+1]
};

class CvtSlrModel {
 public:
  CvtSlrModel(const ModelConfig& cfg, Rng& init_rng);
  CvtSlrModel(const CvtSlrModel&) = delete;
  CvtSlrModel& operator=(const CvtSlrModel&) = delete;
  CvtSlrModel(CvtSlrModel&&) = default;
  CvtSlrModel& operator=(CvtSlrModel&&) = default;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }
  std::size_t blank_id() const { return config_.vocab_size; }

  Tensor embed_glosses(std::span<const int> ids) const;
  Tensor visual_encode(const Tensor& frames) const;
  Tensor classify(const Tensor& feats) const;

  // Gloss -> gloss reconstruction through the VAE bottleneck.
  VaeOutputs forward_gloss2gloss(std::span<const int> glosses, ReparamMode mode, Rng& rng) const;
  // Frames -> CTC log-probabilities; reparameterization is deterministic.
  SlrOutputs forward_slr(const Tensor& frames) const;

  const Tensor& embedding() const { return embedding_; }
  const VisualModule& visual() const { return visual_; }
  const PosteriorEncoder& encoder() const { return encoder_; }
  const GenerativeDecoder& decoder() const { return decoder_; }
  VideoGlossAdapter& adapter() { return adapter_; }
  const VideoGlossAdapter& adapter() const { return adapter_; }
  const SharedClassifier& classifier() const { return classifier_; }

  Checkpoint to_checkpoint() const;
  // Rebuilds a model (config included) from a full checkpoint.
  static CvtSlrModel from_checkpoint(const Checkpoint& ckpt);
  // Copies the VAE parts (embedding, encoder, decoder, classifier) from a
  // step-1 checkpoint and seeds the adapter's final layer with the embedding.
  void load_pretrained_vae(const Checkpoint& ckpt);

 private:
  void load_entries(const Checkpoint& ckpt, bool vae_only);

  ModelConfig config_;
  ParameterStore params_;
  Tensor embedding_;
  VisualModule visual_;
  PosteriorEncoder encoder_;
  GenerativeDecoder decoder_;
  VideoGlossAdapter adapter_;
  SharedClassifier classifier_;
};

ModelConfig model_config_from_checkpoint(const Checkpoint& ckpt);

}  // namespace cvtslr
