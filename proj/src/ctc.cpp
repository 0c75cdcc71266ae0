#include "cvtslr/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cvtslr/error.hpp"
#include "cvtslr/ops.hpp"

namespace cvtslr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void validate_target(std::span<const int> target, std::size_t frames, std::size_t classes) {
  if (target.empty()) fail(ErrorCode::kEmptyTarget, "CTC target has no glosses");
  const int blank = static_cast<int>(classes) - 1;
  for (int g : target) {
    if (g < 0 || g >= blank) fail(ErrorCode::kUnknownGlossId, "CTC target id " + std::to_string(g) + " is not a gloss");
  }
  if (frames < ctc_min_frames(target)) {
    fail(ErrorCode::kInfeasibleTarget, std::to_string(frames) + " frames cannot emit a target needing " +
                                           std::to_string(ctc_min_frames(target)));
  }
}

void validate_log_probs(const Matrix& log_probs) {
  if (log_probs.rows == 0 || log_probs.cols < 2) fail(ErrorCode::kEmptySequence, "CTC needs T >= 1 and a blank column");
  for (std::size_t t = 0; t < log_probs.rows; ++t) {
    double total = 0.0;
    for (double lp : log_probs.row(t)) total += std::exp(lp);
    if (std::abs(total - 1.0) > 1e-6) {
      fail(ErrorCode::kNotNormalized, "frame " + std::to_string(t) + " probabilities sum to " + std::to_string(total));
    }
  }
}

}  // namespace

double CtcLattice::log_likelihood_at(std::size_t t, const Matrix& log_probs) const {
  double acc = kNegInf;
  for (std::size_t s = 0; s < extended_labels.size(); ++s) {
    const double a = log_alpha(t, s);
    const double b = log_beta(t, s);
    if (a == kNegInf || b == kNegInf) continue;
    acc = log_add(acc, a + b - log_probs(t, static_cast<std::size_t>(extended_labels[s])));
  }
  return acc;
}

std::size_t ctc_min_frames(std::span<const int> target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) n += target[i] == target[i - 1] ? 1 : 0;
  return n;
}

GlossSeq ctc_collapse(std::span<const int> path, int blank) {
  GlossSeq out;
  int prev = -1;
  for (int p : path) {
    if (p != prev && p != blank) out.push_back(p);
    prev = p;
  }
  return out;
}

CtcLattice ctc_lattice(const Matrix& log_probs, std::span<const int> target) {
  validate_log_probs(log_probs);
  validate_target(target, log_probs.rows, log_probs.cols);
  const int blank = static_cast<int>(log_probs.cols) - 1;
  const std::size_t frames = log_probs.rows;

  CtcLattice lat;
  lat.extended_labels.reserve(2 * target.size() + 1);
  for (int g : target) {
    lat.extended_labels.push_back(blank);
    lat.extended_labels.push_back(g);
  }
  lat.extended_labels.push_back(blank);
  const auto& ext = lat.extended_labels;
  const std::size_t states = ext.size();
  auto emit = [&](std::size_t t, std::size_t s) { return log_probs(t, static_cast<std::size_t>(ext[s])); };
  // A skip over the blank at s-1 is allowed unless it would merge a repeat.
  auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  lat.log_alpha = Matrix(frames, states, kNegInf);
  lat.log_alpha(0, 0) = emit(0, 0);
  lat.log_alpha(0, 1) = emit(0, 1);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = lat.log_alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, lat.log_alpha(t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, lat.log_alpha(t - 1, s - 2));
      lat.log_alpha(t, s) = acc == kNegInf ? kNegInf : acc + emit(t, s);
    }
  }

  lat.log_beta = Matrix(frames, states, kNegInf);
  lat.log_beta(frames - 1, states - 1) = emit(frames - 1, states - 1);
  lat.log_beta(frames - 1, states - 2) = emit(frames - 1, states - 2);
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = lat.log_beta(t + 1, s);
      if (s + 1 < states) acc = log_add(acc, lat.log_beta(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) acc = log_add(acc, lat.log_beta(t + 1, s + 2));
      lat.log_beta(t, s) = acc == kNegInf ? kNegInf : acc + emit(t, s);
    }
  }

  lat.log_likelihood = log_add(lat.log_alpha(frames - 1, states - 1), lat.log_alpha(frames - 1, states - 2));
  return lat;
}

double ctc_neg_log_likelihood(const Matrix& log_probs, std::span<const int> target) {
  return -ctc_lattice(log_probs, target).log_likelihood;
}

Matrix ctc_gradient(const Matrix& log_probs, const CtcLattice& lattice) {
  Matrix grad(log_probs.rows, log_probs.cols, 0.0);
  const double log_p = lattice.log_likelihood;
  if (log_p == kNegInf) return grad;
  for (std::size_t t = 0; t < log_probs.rows; ++t) {
    for (std::size_t s = 0; s < lattice.extended_labels.size(); ++s) {
      const double a = lattice.log_alpha(t, s);
      const double b = lattice.log_beta(t, s);
      if (a == kNegInf || b == kNegInf) continue;
      const auto k = static_cast<std::size_t>(lattice.extended_labels[s]);
      grad(t, k) -= std::exp(a + b - log_probs(t, k) - log_p);
    }
  }
  return grad;
}

Tensor ctc_loss(const Tensor& log_probs, std::span<const int> target) {
  Matrix lp = Matrix::from_tensor(log_probs);
  CtcLattice lattice = ctc_lattice(lp, target);
  if (lattice.log_likelihood == kNegInf) {
    fail(ErrorCode::kInfeasibleTarget, "target has zero probability under every path");
  }
  Matrix grad = ctc_gradient(lp, lattice);
  return Tensor::from_op({}, {-lattice.log_likelihood}, {log_probs},
                         [grad = std::move(grad)](const BackwardContext& ctx) {
                           auto* g = ctx.input_grad(0);
                           if (!g) return;
                           const double dy = ctx.out_grad()[0];
                           for (std::size_t i = 0; i < grad.data.size(); ++i) (*g)[i] += dy * grad.data[i];
                         });
}

std::map<GlossSeq, double> ctc_brute_force_marginals(const Matrix& probs) {
  const std::size_t frames = probs.rows;
  const std::size_t classes = probs.cols;
  double count = 1.0;
  for (std::size_t t = 0; t < frames; ++t) count *= static_cast<double>(classes);
  if (frames == 0 || classes == 0 || count > 1e6) {
    fail(ErrorCode::kTooLarge, "brute force over " + std::to_string(classes) + "^" + std::to_string(frames) + " paths");
  }
  const int blank = static_cast<int>(classes) - 1;
  std::map<GlossSeq, double> out;
  std::vector<int> path(frames, 0);
  while (true) {
    double p = 1.0;
    for (std::size_t t = 0; t < frames; ++t) p *= probs(t, static_cast<std::size_t>(path[t]));
    out[ctc_collapse(path, blank)] += p;
    std::size_t t = 0;
    while (t < frames && ++path[t] == static_cast<int>(classes)) path[t++] = 0;
    if (t == frames) break;
  }
  return out;
}

double ctc_brute_force(const Matrix& probs, std::span<const int> target) {
  const auto marginals = ctc_brute_force_marginals(probs);
  auto it = marginals.find(GlossSeq(target.begin(), target.end()));
  return it == marginals.end() ? 0.0 : it->second;
}

DecodeResult greedy_decode(const Matrix& log_probs) {
  if (log_probs.rows == 0 || log_probs.cols == 0) fail(ErrorCode::kEmptySequence, "greedy_decode with no frames");
  const int blank = static_cast<int>(log_probs.cols) - 1;
  std::vector<int> path(log_probs.rows);
  DecodeResult result;
  for (std::size_t t = 0; t < log_probs.rows; ++t) {
    auto row = log_probs.row(t);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    path[t] = static_cast<int>(best);
    result.score += row[best];
  }
  result.glosses = ctc_collapse(path, blank);
  return result;
}

DecodeResult beam_decode(const Matrix& log_probs, std::size_t beam_width) {
  if (beam_width == 0) fail(ErrorCode::kInvalidConfig, "beam width must be positive");
  if (log_probs.rows == 0 || log_probs.cols == 0) fail(ErrorCode::kEmptySequence, "beam_decode with no frames");
  const int blank = static_cast<int>(log_probs.cols) - 1;

  struct Scores {
    double blank = kNegInf;
    double non_blank = kNegInf;
    double total() const { return log_add(blank, non_blank); }
  };
  using Beam = std::vector<std::pair<GlossSeq, Scores>>;
  auto ranked_before = [](const Beam::value_type& a, const Beam::value_type& b) {
    const double ta = a.second.total();
    const double tb = b.second.total();
    if (ta != tb) return ta > tb;
    return a.first < b.first;
  };

  Beam beam{{GlossSeq{}, Scores{0.0, kNegInf}}};
  for (std::size_t t = 0; t < log_probs.rows; ++t) {
    auto row = log_probs.row(t);
    std::map<GlossSeq, Scores> next;
    for (const auto& [prefix, sc] : beam) {
      const double total = sc.total();
      for (std::size_t c = 0; c < row.size(); ++c) {
        const double lp = row[c];
        if (lp == kNegInf) continue;
        const int label = static_cast<int>(c);
        if (label == blank) {
          auto& dst = next[prefix];
          dst.blank = log_add(dst.blank, total + lp);
          continue;
        }
        GlossSeq extended = prefix;
        extended.push_back(label);
        auto& ext = next[extended];
        if (!prefix.empty() && prefix.back() == label) {
          // Repeat without a blank in between stays on the same prefix.
          ext.non_blank = log_add(ext.non_blank, sc.blank + lp);
          auto& same = next[prefix];
          same.non_blank = log_add(same.non_blank, sc.non_blank + lp);
        } else {
          ext.non_blank = log_add(ext.non_blank, total + lp);
        }
      }
    }
    beam.assign(next.begin(), next.end());
    std::erase_if(beam, [](const auto& e) { return e.second.total() == kNegInf; });
    std::sort(beam.begin(), beam.end(), ranked_before);
    if (beam.size() > beam_width) beam.resize(beam_width);
    if (beam.empty()) return DecodeResult{{}, kNegInf};
  }
  return DecodeResult{beam.front().first, beam.front().second.total()};
}

}  // namespace cvtslr
