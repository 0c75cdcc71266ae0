#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "cvtslr/matrix.hpp"
#include "cvtslr/tensor.hpp"

namespace cvtslr {

using GlossSeq = std::vector<int>;

// Throughout this header the blank symbol is the last column of the
// per-frame distribution, i.e. blank == cols - 1.

// Forward/backward tables over the blank-interleaved target. Both tables
// include the emission of frame t, so for every t
//   logsumexp_s(log_alpha[t,s] + log_beta[t,s] - log_probs[t, ext[s]]) == log_likelihood.
struct CtcLattice {
  std::vector<int> extended_labels;
  Matrix log_alpha;
  Matrix log_beta;
  double log_likelihood = 0.0;

  double log_likelihood_at(std::size_t t, const Matrix& log_probs) const;
};

// Frames needed to emit `target`: one per gloss plus a separating blank
// between adjacent repeats.
std::size_t ctc_min_frames(std::span<const int> target);

// Removes adjacent repeats, then blanks.
GlossSeq ctc_collapse(std::span<const int> path, int blank);

CtcLattice ctc_lattice(const Matrix& log_probs, std::span<const int> target);

// -log p(target | frames). +inf when every path has zero probability.
double ctc_neg_log_likelihood(const Matrix& log_probs, std::span<const int> target);

// d(-log p)/d log_probs from the lattice posteriors.
Matrix ctc_gradient(const Matrix& log_probs, const CtcLattice& lattice);

// Differentiable CTC loss over log_probs [T, C] for one sample.
Tensor ctc_loss(const Tensor& log_probs, std::span<const int> target);

// Exhaustive path enumeration over probabilities (not logs); guarded to
// C^T <= 1e6.
double ctc_brute_force(const Matrix& probs, std::span<const int> target);
std::map<GlossSeq, double> ctc_brute_force_marginals(const Matrix& probs);

struct DecodeResult {
  GlossSeq glosses;
  double score = 0.0;
};

DecodeResult greedy_decode(const Matrix& log_probs);

inline constexpr std::size_t kFullBeam = std::numeric_limits<std::size_t>::max();

// Prefix beam search; kFullBeam disables pruning, which makes the result the
// exact most probable labelling.
DecodeResult beam_decode(const Matrix& log_probs, std::size_t beam_width);

}  // namespace cvtslr
