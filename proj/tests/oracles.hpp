#pragma once

// Independent reference implementations used only by tests. None of these
// call into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <random>
#include <vector>

namespace oracle {

// Probability that a CTC model emits `target`, by recursive enumeration of
// every frame path. Blank is the last column of `probs` (row-major, T x C).
inline double ctc_path_sum(const std::vector<double>& probs, std::size_t frames, std::size_t classes,
                           const std::vector<int>& target) {
  const int blank = static_cast<int>(classes) - 1;
  double total = 0.0;
  std::vector<int> path(frames);
  std::function<void(std::size_t, double)> walk = [&](std::size_t t, double p) {
    if (p == 0.0) return;
    if (t == frames) {
      std::vector<int> out;
      int prev = -1;
      for (int c : path) {
        if (c != prev && c != blank) out.push_back(c);
        prev = c;
      }
      if (out == target) total += p;
      return;
    }
    for (std::size_t c = 0; c < classes; ++c) {
      path[t] = static_cast<int>(c);
      walk(t + 1, p * probs[t * classes + c]);
    }
  };
  walk(0, 1.0);
  return total;
}

// Sum over latent dims, mean over rows, of KL(N(mu, sigma^2) || N(0, 1)) in
// the textbook form log(1/sigma) + (sigma^2 + mu^2)/2 - 1/2.
inline double gaussian_kl(const std::vector<double>& mu, const std::vector<double>& sigma, std::size_t d_z) {
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    acc += -std::log(sigma[i]) + 0.5 * (sigma[i] * sigma[i] + mu[i] * mu[i]) - 0.5;
  }
  return acc / static_cast<double>(mu.size() / d_z);
}

// Cross-entropy of each row's softmax against the diagonal label, averaged.
inline double diagonal_ce(const std::vector<std::vector<double>>& m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    long double z = 0.0L;
    for (double x : m[i]) z += std::exp(static_cast<long double>(x));
    acc += static_cast<double>(std::log(z) - static_cast<long double>(m[i][i]));
  }
  return acc / static_cast<double>(m.size());
}

// Half the sum of the row-wise diagonal CE of S V^T and V S^T for
// unit-normalized rows.
inline double contrastive(const std::vector<std::vector<double>>& s, const std::vector<std::vector<double>>& v) {
  auto normalize = [](std::vector<std::vector<double>> rows) {
    for (auto& r : rows) {
      double n = 0.0;
      for (double x : r) n += x * x;
      n = std::sqrt(n);
      for (double& x : r) x /= n;
    }
    return rows;
  };
  const auto sn = normalize(s);
  const auto vn = normalize(v);
  const std::size_t b = sn.size();
  std::vector<std::vector<double>> s2v(b, std::vector<double>(b)), v2s(b, std::vector<double>(b));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < sn[i].size(); ++k) dot += sn[i][k] * vn[j][k];
      s2v[i][j] = dot;
      v2s[j][i] = dot;
    }
  }
  return 0.5 * (diagonal_ce(s2v) + diagonal_ce(v2s));
}

// Recursive Levenshtein distance over suffixes, memoized on (i, j).
inline std::size_t edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t w = b.size() + 1;
  std::vector<std::size_t> memo((a.size() + 1) * w, static_cast<std::size_t>(-1));
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    std::size_t& m = memo[i * w + j];
    if (m != static_cast<std::size_t>(-1)) return m;
    const std::size_t sub = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    const std::size_t del = go(i + 1, j) + 1;
    const std::size_t ins = go(i, j + 1) + 1;
    return m = std::min({sub, del, ins});
  };
  return go(0, 0);
}

// Every sequence of length <= max_len over {0..alphabet-1}.
inline std::vector<std::vector<int>> all_sequences(std::size_t max_len, int alphabet) {
  std::vector<std::vector<int>> out{{}};
  std::vector<std::vector<int>> frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& s : frontier) {
      for (int a = 0; a < alphabet; ++a) {
        auto t = s;
        t.push_back(a);
        next.push_back(t);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

// Marginal probability of every collapsed output, by enumeration.
inline std::map<std::vector<int>, double> ctc_marginals(const std::vector<double>& probs, std::size_t frames,
                                                         std::size_t classes) {
  const int blank = static_cast<int>(classes) - 1;
  std::map<std::vector<int>, double> out;
  std::vector<int> path(frames);
  std::function<void(std::size_t, double)> walk = [&](std::size_t t, double p) {
    if (t == frames) {
      std::vector<int> seq;
      int prev = -1;
      for (int c : path) {
        if (c != prev && c != blank) seq.push_back(c);
        prev = c;
      }
      out[seq] += p;
      return;
    }
    for (std::size_t c = 0; c < classes; ++c) {
      path[t] = static_cast<int>(c);
      walk(t + 1, p * probs[t * classes + c]);
    }
  };
  walk(0, 1.0);
  return out;
}

// Random row-stochastic matrix (T x C) with strictly positive entries.
inline std::vector<double> random_probs(std::size_t frames, std::size_t classes, std::mt19937_64& rng,
                                        double sharpness = 1.0) {
  std::normal_distribution<double> n(0.0, sharpness);
  std::vector<double> p(frames * classes);
  for (std::size_t t = 0; t < frames; ++t) {
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += p[t * classes + c] = std::exp(n(rng));
    for (std::size_t c = 0; c < classes; ++c) p[t * classes + c] /= z;
  }
  return p;
}

// Row-stochastic matrix whose per-frame argmax holds at least `floor` of the
// mass. A width-1 prefix beam matches greedy decoding once the argmax exceeds
// 1/sqrt(2): then re-emitting a gloss after a blank always outweighs merging
// it into the current prefix.
inline std::vector<double> peaked_probs(std::size_t frames, std::size_t classes, std::mt19937_64& rng,
                                        double floor = 0.75) {
  std::uniform_real_distribution<double> top(floor, 0.99);
  std::uniform_real_distribution<double> unit(0.01, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
  std::vector<double> p(frames * classes);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t k = pick(rng);
    const double mass = top(rng);
    double rest = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (c != k) rest += p[t * classes + c] = unit(rng);
    }
    for (std::size_t c = 0; c < classes; ++c) {
      p[t * classes + c] = c == k ? mass : (1.0 - mass) * p[t * classes + c] / rest;
    }
  }
  return p;
}

}  // namespace oracle
