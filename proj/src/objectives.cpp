#include "cvtslr/objectives.hpp"

#include <numeric>
#include <string>
#include <vector>

#include "cvtslr/error.hpp"
#include "cvtslr/ops.hpp"

namespace cvtslr {

Tensor kl_loss(const Tensor& mu, const Tensor& sigma, KlReduction reduction) {
  if (mu.shape() != sigma.shape() || mu.rank() < 1) {
    fail(ErrorCode::kDimensionMismatch, "kl_loss: mu " + shape_str(mu.shape()) + " vs sigma " + shape_str(sigma.shape()));
  }
  for (double s : sigma.values()) {
    if (!(s > 0.0)) fail(ErrorCode::kNonPositiveSigma, "sigma must be positive, got " + std::to_string(s));
  }
  // log sigma^2 - sigma^2 - mu^2 + 1
  Tensor inner = add_scalar(sub(sub(scale(log(sigma), 2.0), square(sigma)), square(mu)), 1.0);
  const double count = static_cast<double>(reduction == KlReduction::kMeanLatent ? mu.numel() : mu.numel() / mu.dim(-1));
  return scale(sum(inner), -0.5 / count);
}

Tensor gloss2gloss_ce(const Tensor& logits, std::span<const int> target) {
  if (logits.rank() != 2) fail(ErrorCode::kDimensionMismatch, "gloss2gloss_ce expects [N, |V|] logits");
  if (logits.dim(0) != target.size()) {
    fail(ErrorCode::kLengthMismatch, "logits have " + std::to_string(logits.dim(0)) + " positions, target " +
                                         std::to_string(target.size()));
  }
  for (int g : target) {
    if (g < 0 || static_cast<std::size_t>(g) >= logits.dim(1)) {
      fail(ErrorCode::kUnknownGlossId, "target id " + std::to_string(g) + " outside the gloss vocabulary");
    }
  }
  return scale(mean(pick_last(log_softmax_last(logits), target)), -1.0);
}

Tensor vae_loss(const Tensor& kl, const Tensor& ce) { return add(kl, ce); }

PooledFeatures pool_and_normalize(const Tensor& feats, const FrameMask& mask, FeatureSource source) {
  if (feats.rank() != 3 || feats.dim(0) != mask.batch || feats.dim(1) != mask.frames) {
    fail(ErrorCode::kDimensionMismatch, "pool_and_normalize: features " + shape_str(feats.shape()) +
                                            " do not match mask " + std::to_string(mask.batch) + "x" +
                                            std::to_string(mask.frames));
  }
  const std::size_t batch = feats.dim(0);
  const std::size_t frames = feats.dim(1);
  const std::size_t d = feats.dim(2);
  std::vector<double> weights(batch * frames, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t n = mask.length(b);
    if (n == 0) fail(ErrorCode::kAllMasked, "sample " + std::to_string(b) + " has no unmasked frame");
    for (std::size_t t = 0; t < frames; ++t) weights[b * frames + t] = mask.at(b, t) ? 1.0 / static_cast<double>(n) : 0.0;
  }
  auto fv = feats.values();
  std::vector<double> pooled(batch * d, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      const double w = weights[b * frames + t];
      if (w == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) pooled[b * d + j] += w * fv[(b * frames + t) * d + j];
    }
  }
  Tensor mean_pooled = Tensor::from_op(
      {batch, d}, std::move(pooled), {feats}, [=, weights = std::move(weights)](const BackwardContext& ctx) {
        auto* g = ctx.input_grad(0);
        if (!g) return;
        auto dy = ctx.out_grad();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t t = 0; t < frames; ++t) {
            const double w = weights[b * frames + t];
            if (w == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) (*g)[(b * frames + t) * d + j] += w * dy[b * d + j];
          }
        }
      });
  return PooledFeatures{l2_normalize_last(mean_pooled), source};
}

Tensor contrastive_align_loss(const PooledFeatures& s, const PooledFeatures& v) {
  const Tensor& sv = s.values;
  const Tensor& vv = v.values;
  if (sv.rank() != 2 || vv.rank() != 2 || sv.shape() != vv.shape()) {
    fail(ErrorCode::kBatchMismatch, "contrastive_align_loss: " + shape_str(sv.shape()) + " vs " + shape_str(vv.shape()));
  }
  std::vector<int> labels(sv.dim(0));
  std::iota(labels.begin(), labels.end(), 0);
  const Tensor s2v = matmul(sv, transpose(vv));
  const Tensor v2s = matmul(vv, transpose(sv));
  const Tensor loss_s = scale(mean(pick_last(log_softmax_last(s2v), labels)), -1.0);
  const Tensor loss_v = scale(mean(pick_last(log_softmax_last(v2s), labels)), -1.0);
  return scale(add(loss_s, loss_v), 0.5);
}

Tensor cvt_slr_loss(const Tensor& ctc, const Tensor& align, double align_weight) {
  if (align_weight < 0.0) fail(ErrorCode::kNegativeWeight, "alignment weight must be non-negative");
  return add(ctc, scale(align, align_weight));
}

}  // namespace cvtslr
