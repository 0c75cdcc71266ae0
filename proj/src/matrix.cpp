#include "cvtslr/matrix.hpp"

#include "cvtslr/error.hpp"

namespace cvtslr {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) fail(ErrorCode::kDimensionMismatch, "matrix data does not match rows*cols");
}

Matrix Matrix::from_tensor(const Tensor& t) {
  if (t.rank() != 2) fail(ErrorCode::kDimensionMismatch, "expected a rank-2 tensor, got " + shape_str(t.shape()));
  return Matrix(t.dim(0), t.dim(1), std::vector<double>(t.values().begin(), t.values().end()));
}

}  // namespace cvtslr
