#pragma once

#include <span>
#include <vector>

#include "cvtslr/tensor.hpp"

namespace cvtslr {

// Numerically stable log(sum(exp(x))) over raw values; -inf entries stand
// for zero probability and an all -inf input yields -inf.
double log_sum_exp(std::span<const double> xs);
double log_add(double a, double b);

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// x[..., n] + bias[n]
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor square(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Reduces the last axis: [..., n] -> [...]
Tensor sum_last(const Tensor& x);

// [..., m, k] x [..., k, n]; batch dims must agree or one side has none.
Tensor matmul(const Tensor& a, const Tensor& b);
// Swaps the last two axes.
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor softmax_last(const Tensor& x);
Tensor log_softmax_last(const Tensor& x);
Tensor log_sum_exp(const Tensor& x, int axis);
Tensor layer_norm_last(const Tensor& x, double eps = 1e-5);
// Rows scaled to unit Euclidean norm along the last axis.
Tensor l2_normalize_last(const Tensor& x);

// Slices along axis 0 / the last axis, half-open [begin, end).
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_last(std::span<const Tensor> parts);

// table[V, d], ids -> [N, d]
Tensor gather_rows(const Tensor& table, std::span<const int> ids);
// x[R, C] -> [R] with out[r] = x[r, index[r]]
Tensor pick_last(const Tensor& x, std::span<const int> index);

// [T, heads*dh] <-> [heads, T, dh]
Tensor split_heads(const Tensor& x, std::size_t heads);
Tensor merge_heads(const Tensor& x);

// Stacks [T_i, d] sequences into [B, max_len, d] with zero padding.
Tensor pad_stack(std::span<const Tensor> seqs, std::size_t max_len);

}  // namespace cvtslr
