#pragma once

#include <span>

#include "cvtslr/mask.hpp"
#include "cvtslr/tensor.hpp"

namespace cvtslr {

enum class KlReduction { kSumLatent, kMeanLatent };

// -1/2 (log sigma^2 - sigma^2 - mu^2 + 1), summed over the last (latent) axis
// and averaged over every leading position. kMeanLatent also averages over
// the latent axis.
Tensor kl_loss(const Tensor& mu, const Tensor& sigma, KlReduction reduction = KlReduction::kSumLatent);

// Mean over positions of -log softmax(logits)[target]; logits are [N, |V|]
// without the blank column.
Tensor gloss2gloss_ce(const Tensor& logits, std::span<const int> target);

Tensor vae_loss(const Tensor& kl, const Tensor& ce);

enum class FeatureSource { kVisual, kTextual };

// [B, d] rows of unit norm.
struct PooledFeatures {
  Tensor values;
  FeatureSource source = FeatureSource::kVisual;
};

// Masked mean over time of [B, T, d] features followed by L2 normalization.
PooledFeatures pool_and_normalize(const Tensor& feats, const FrameMask& mask, FeatureSource source);

// Symmetric in-batch contrastive loss: cross-entropy of both pair matrices
// (s * v^T and v * s^T) against diagonal labels, averaged.
Tensor contrastive_align_loss(const PooledFeatures& s, const PooledFeatures& v);

inline constexpr double kDefaultAlignWeight = 10.0;

Tensor cvt_slr_loss(const Tensor& ctc, const Tensor& align, double align_weight = kDefaultAlignWeight);

}  // namespace cvtslr
