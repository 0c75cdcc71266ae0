#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cvtslr/tensor.hpp"

namespace cvtslr {

// Plain row-major matrix for non-differentiable paths (decoders, lattices,
// diagnostics). Unlike Tensor it may hold -inf.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  static Matrix from_tensor(const Tensor& t);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

}  // namespace cvtslr
