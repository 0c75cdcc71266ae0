#include "cvtslr/nn.hpp"

#include <cmath>

#include "cvtslr/error.hpp"
#include "cvtslr/ops.hpp"

namespace cvtslr {

Tensor ParameterStore::add(const std::string& name, Tensor t) {
  if (find(name).defined()) fail(ErrorCode::kInvalidConfig, "duplicate parameter name " + name);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParameterStore::create_uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(numel_of(shape));
  for (double& v : values) v = dist(rng);
  return add(name, Tensor(std::move(shape), std::move(values), true));
}

Tensor ParameterStore::create_constant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor::full(std::move(shape), value, true));
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.push_back(t);
  return out;
}

Tensor ParameterStore::find(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  return Tensor();
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = store.create_uniform(name + ".weight", {in, out}, bound, rng);
  bias_ = store.create_uniform(name + ".bias", {out}, bound, rng);
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.rank() == 0 || x.dim(-1) != in_features()) {
    fail(ErrorCode::kDimensionMismatch, "linear layer expects width " + std::to_string(in_features()) + ", got " +
                                            shape_str(x.shape()));
  }
  return add_bias(matmul(x, weight_), bias_);
}

SelfAttentionLayer::SelfAttentionLayer(ParameterStore& store, const std::string& name, std::size_t d,
                                       std::size_t heads, Rng& rng)
    : heads_(heads),
      query_(store, name + ".query", d, d, rng),
      key_(store, name + ".key", d, d, rng),
      value_(store, name + ".value", d, d, rng),
      output_(store, name + ".output", d, d, rng) {
  if (heads == 0 || d % heads != 0) fail(ErrorCode::kInvalidConfig, "model width must be divisible by head count");
}

Tensor SelfAttentionLayer::forward(const Tensor& x) const {
  const std::size_t head_dim = x.dim(1) / heads_;
  const Tensor q = split_heads(query_.forward(x), heads_);
  const Tensor k = split_heads(key_.forward(x), heads_);
  const Tensor v = split_heads(value_.forward(x), heads_);
  const Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(head_dim)));
  const Tensor context = merge_heads(matmul(softmax_last(scores), v));
  return layer_norm_last(add(x, output_.forward(context)));
}

LstmDirection::LstmDirection(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden,
                             Rng& rng)
    : hidden_(hidden), input_(store, name + ".input", in, 4 * hidden, rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  recurrent_ = store.create_uniform(name + ".recurrent", {hidden, 4 * hidden}, bound, rng);
  // Forget-gate bias starts at 1.
  Tensor bias = input_.bias();
  auto values = bias.mutable_values();
  for (std::size_t j = hidden; j < 2 * hidden; ++j) values[j] = 1.0;
}

Tensor LstmDirection::forward(const Tensor& x, bool reverse) const {
  const std::size_t frames = x.dim(0);
  const Tensor projected = input_.forward(x);
  Tensor h;
  Tensor c;
  std::vector<Tensor> outputs(frames);
  for (std::size_t step = 0; step < frames; ++step) {
    const std::size_t t = reverse ? frames - 1 - step : step;
    Tensor gates = slice_rows(projected, t, t + 1);
    if (h.defined()) gates = add(gates, matmul(h, recurrent_));
    const Tensor i = sigmoid(slice_last(gates, 0, hidden_));
    const Tensor f = sigmoid(slice_last(gates, hidden_, 2 * hidden_));
    const Tensor g = tanh(slice_last(gates, 2 * hidden_, 3 * hidden_));
    const Tensor o = sigmoid(slice_last(gates, 3 * hidden_, 4 * hidden_));
    c = c.defined() ? add(mul(f, c), mul(i, g)) : mul(i, g);
    h = mul(o, tanh(c));
    outputs[t] = h;
  }
  return concat_rows(outputs);
}

BiLstmLayer::BiLstmLayer(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng)
    : forward_dir_(store, name + ".fwd", in, hidden, rng), backward_dir_(store, name + ".bwd", in, hidden, rng) {}

Tensor BiLstmLayer::forward(const Tensor& x) const {
  const Tensor parts[] = {forward_dir_.forward(x, false), backward_dir_.forward(x, true)};
  return concat_last(parts);
}

Tensor sinusoidal_positions(std::size_t frames, std::size_t d) {
  std::vector<double> values(frames * d);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (j / 2)) / static_cast<double>(d));
      values[t * d + j] = j % 2 == 0 ? std::sin(static_cast<double>(t) * rate) : std::cos(static_cast<double>(t) * rate);
    }
  }
  return Tensor({frames, d}, std::move(values));
}

}  // namespace cvtslr
