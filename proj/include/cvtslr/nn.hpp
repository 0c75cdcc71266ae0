#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cvtslr/tensor.hpp"

namespace cvtslr {

using Rng = std::mt19937_64;

// Ordered, named collection of trainable leaves.
class ParameterStore {
 public:
  Tensor create_uniform(const std::string& name, Shape shape, double bound, Rng& rng);
  Tensor create_constant(const std::string& name, Shape shape, double value);

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  // Returns an undefined tensor when absent.
  Tensor find(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  void zero_grad();

 private:
  Tensor add(const std::string& name, Tensor t);
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// y = x W + b with W [in, out]; initialized uniform(+-1/sqrt(in)).
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x) const;
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }

 private:
  Tensor weight_;
  Tensor bias_;
};

// Self-attention over a [T, d] sequence followed by a residual connection and
// layer normalization.
class SelfAttentionLayer {
 public:
  SelfAttentionLayer() = default;
  SelfAttentionLayer(ParameterStore& store, const std::string& name, std::size_t d, std::size_t heads, Rng& rng);

  Tensor forward(const Tensor& x) const;

 private:
  std::size_t heads_ = 1;
  Linear query_;
  Linear key_;
  Linear value_;
  Linear output_;
};

// One direction of an LSTM; gate order is input, forget, cell, output.
class LstmDirection {
 public:
  LstmDirection() = default;
  LstmDirection(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);

  Tensor forward(const Tensor& x, bool reverse) const;

 private:
  std::size_t hidden_ = 0;
  Linear input_;
  Tensor recurrent_;
};

class BiLstmLayer {
 public:
  BiLstmLayer() = default;
  BiLstmLayer(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);

  // [T, in] -> [T, 2 * hidden]
  Tensor forward(const Tensor& x) const;

 private:
  LstmDirection forward_dir_;
  LstmDirection backward_dir_;
};

// Standard sin/cos position table [T, d].
Tensor sinusoidal_positions(std::size_t frames, std::size_t d);

}  // namespace cvtslr
