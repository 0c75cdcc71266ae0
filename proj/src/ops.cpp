#include "cvtslr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cvtslr/error.hpp"

namespace cvtslr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::kDimensionMismatch,
         std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    fail(ErrorCode::kDimensionMismatch,
         std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(x.shape()));
  }
}

Shape with_last(Shape shape, std::size_t last) {
  shape.back() = last;
  return shape;
}

// Elementwise op whose derivative is expressed through the input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return Tensor::from_op(x.shape(), std::move(out), {x}, [deriv](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    auto xs = ctx.input(0);
    auto ys = ctx.out_values();
    auto dy = ctx.out_grad();
    for (std::size_t i = 0; i < xs.size(); ++i) (*g)[i] += dy[i] * deriv(xs[i], ys[i]);
  });
}

// C[m,n] += A[m,k] B[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// dA[m,k] += dC[m,n] B[k,n]^T
void gemm_nt(const double* dc, const double* b, double* da, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* drow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += drow[j] * brow[j];
      da[i * k + p] += acc;
    }
  }
}

// dB[k,n] += A[m,k]^T dC[m,n]
void gemm_tn(const double* a, const double* dc, double* db, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* drow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* dbrow = db + p * n;
      for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * drow[j];
    }
  }
}

struct AxisSplit {
  std::size_t outer;
  std::size_t n;
  std::size_t inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return kNegInf;
  const double m = *std::max_element(xs.begin(), xs.end());
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](const BackwardContext& ctx) {
    auto dy = ctx.out_grad();
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = ctx.input_grad(k)) {
        for (std::size_t i = 0; i < dy.size(); ++i) (*g)[i] += dy[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](const BackwardContext& ctx) {
    auto dy = ctx.out_grad();
    if (auto* g = ctx.input_grad(0)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*g)[i] += dy[i];
    }
    if (auto* g = ctx.input_grad(1)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*g)[i] -= dy[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](const BackwardContext& ctx) {
    auto dy = ctx.out_grad();
    auto x0 = ctx.input(0);
    auto x1 = ctx.input(1);
    if (auto* g = ctx.input_grad(0)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*g)[i] += dy[i] * x1[i];
    }
    if (auto* g = ctx.input_grad(1)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*g)[i] += dy[i] * x0[i];
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || x.rank() == 0 || x.dim(-1) != bias.dim(0)) {
    fail(ErrorCode::kDimensionMismatch,
         "add_bias: " + shape_str(x.shape()) + " with bias " + shape_str(bias.shape()));
  }
  const std::size_t n = bias.dim(0);
  auto xv = x.values();
  auto bv = bias.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + bv[i % n];
  return Tensor::from_op(x.shape(), std::move(out), {x, bias}, [n](const BackwardContext& ctx) {
    auto dy = ctx.out_grad();
    if (auto* g = ctx.input_grad(0)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*g)[i] += dy[i];
    }
    if (auto* g = ctx.input_grad(1)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*g)[i % n] += dy[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sum(const Tensor& x) {
  auto xv = x.values();
  const double total = std::accumulate(xv.begin(), xv.end(), 0.0);
  return Tensor::from_op({}, {total}, {x}, [](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    const double dy = ctx.out_grad()[0];
    for (double& v : *g) v += dy;
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum_last(const Tensor& x) {
  if (x.rank() == 0) fail(ErrorCode::kDimensionMismatch, "sum_last on a scalar");
  const std::size_t n = x.dim(-1);
  const std::size_t rows = x.numel() / n;
  auto xv = x.values();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r] += xv[r * n + j];
  }
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  return Tensor::from_op(std::move(shape), std::move(out), {x}, [n](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    auto dy = ctx.out_grad();
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += dy[i / n];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    fail(ErrorCode::kDimensionMismatch, "matmul needs rank >= 2 operands, got " + shape_str(a.shape()) + " and " +
                                            shape_str(b.shape()));
  }
  const std::size_t m = a.dim(-2);
  const std::size_t k = a.dim(-1);
  const std::size_t n = b.dim(-1);
  if (b.dim(-2) != k) {
    fail(ErrorCode::kDimensionMismatch,
         "matmul inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  const std::size_t na = numel_of(a_batch);
  const std::size_t nb = numel_of(b_batch);
  Shape out_batch;
  if (a_batch == b_batch) {
    out_batch = a_batch;
  } else if (nb == 1) {
    out_batch = a_batch;
  } else if (na == 1) {
    out_batch = b_batch;
  } else {
    fail(ErrorCode::kDimensionMismatch,
         "matmul batch dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t batches = numel_of(out_batch);
  const std::size_t a_step = na == 1 ? 0 : m * k;
  const std::size_t b_step = nb == 1 ? 0 : k * n;

  std::vector<double> out(batches * m * n, 0.0);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::size_t i = 0; i < batches; ++i) gemm_nn(av + i * a_step, bv + i * b_step, out.data() + i * m * n, m, k, n);

  Shape shape = out_batch;
  shape.push_back(m);
  shape.push_back(n);
  return Tensor::from_op(std::move(shape), std::move(out), {a, b},
                         [=](const BackwardContext& ctx) {
                           const double* dy = ctx.out_grad().data();
                           const double* x0 = ctx.input(0).data();
                           const double* x1 = ctx.input(1).data();
                           auto* ga = ctx.input_grad(0);
                           auto* gb = ctx.input_grad(1);
                           for (std::size_t i = 0; i < batches; ++i) {
                             if (ga) gemm_nt(dy + i * m * n, x1 + i * b_step, ga->data() + i * a_step, m, k, n);
                             if (gb) gemm_tn(x0 + i * a_step, dy + i * m * n, gb->data() + i * b_step, m, k, n);
                           }
                         });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) fail(ErrorCode::kDimensionMismatch, "transpose needs rank >= 2");
  const std::size_t r = x.dim(-2);
  const std::size_t c = x.dim(-1);
  const std::size_t batches = x.numel() / (r * c);
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) out[b * r * c + j * r + i] = xv[b * r * c + i * c + j];
    }
  }
  Shape shape = x.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  return Tensor::from_op(std::move(shape), std::move(out), {x}, [=](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    auto dy = ctx.out_grad();
    for (std::size_t b = 0; b < batches; ++b) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) (*g)[b * r * c + i * c + j] += dy[b * r * c + j * r + i];
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    fail(ErrorCode::kDimensionMismatch, "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return Tensor::from_op(std::move(shape), std::move(out), {x}, [](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    auto dy = ctx.out_grad();
    for (std::size_t i = 0; i < dy.size(); ++i) (*g)[i] += dy[i];
  });
}

Tensor softmax_last(const Tensor& x) {
  if (x.rank() == 0) fail(ErrorCode::kDimensionMismatch, "softmax_last on a scalar");
  const std::size_t n = x.dim(-1);
  const std::size_t rows = x.numel() / n;
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < n; ++j) o[j] /= z;
  }
  return Tensor::from_op(x.shape(), std::move(out), {x}, [n, rows](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    auto y = ctx.out_values();
    auto dy = ctx.out_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += dy[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) (*g)[r * n + j] += y[r * n + j] * (dy[r * n + j] - dot);
    }
  });
}

Tensor log_softmax_last(const Tensor& x) {
  if (x.rank() == 0) fail(ErrorCode::kDimensionMismatch, "log_softmax_last on a scalar");
  const std::size_t n = x.dim(-1);
  const std::size_t rows = x.numel() / n;
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double lse = log_sum_exp(xv.subspan(r * n, n));
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = xv[r * n + j] - lse;
  }
  return Tensor::from_op(x.shape(), std::move(out), {x}, [n, rows](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    auto y = ctx.out_values();
    auto dy = ctx.out_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += dy[r * n + j];
      for (std::size_t j = 0; j < n; ++j) (*g)[r * n + j] += dy[r * n + j] - std::exp(y[r * n + j]) * total;
    }
  });
}

Tensor log_sum_exp(const Tensor& x, int axis) {
  const int r = static_cast<int>(x.rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) fail(ErrorCode::kDimensionMismatch, "log_sum_exp axis out of range");
  const auto s = split_axis(x.shape(), static_cast<std::size_t>(a));
  auto xv = x.values();
  std::vector<double> out(s.outer * s.inner);
  std::vector<double> column(s.n);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      for (std::size_t k = 0; k < s.n; ++k) column[k] = xv[(o * s.n + k) * s.inner + i];
      out[o * s.inner + i] = log_sum_exp(column);
    }
  }
  Shape shape = x.shape();
  shape.erase(shape.begin() + a);
  return Tensor::from_op(std::move(shape), std::move(out), {x}, [s](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    auto xs = ctx.input(0);
    auto y = ctx.out_values();
    auto dy = ctx.out_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t k = 0; k < s.n; ++k) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t idx = (o * s.n + k) * s.inner + i;
          (*g)[idx] += dy[o * s.inner + i] * std::exp(xs[idx] - y[o * s.inner + i]);
        }
      }
    }
  });
}

Tensor layer_norm_last(const Tensor& x, double eps) {
  const std::size_t n = x.dim(-1);
  const std::size_t rows = x.numel() / n;
  auto xv = x.values();
  std::vector<double> out(xv.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = (in[j] - mu) * inv_std[r];
  }
  return Tensor::from_op(x.shape(), std::move(out), {x},
                         [n, rows, inv_std = std::move(inv_std)](const BackwardContext& ctx) {
                           auto* g = ctx.input_grad(0);
                           if (!g) return;
                           auto y = ctx.out_values();
                           auto dy = ctx.out_grad();
                           const double inv_n = 1.0 / static_cast<double>(n);
                           for (std::size_t r = 0; r < rows; ++r) {
                             double mean_dy = 0.0;
                             double mean_dyy = 0.0;
                             for (std::size_t j = 0; j < n; ++j) {
                               mean_dy += dy[r * n + j];
                               mean_dyy += dy[r * n + j] * y[r * n + j];
                             }
                             mean_dy *= inv_n;
                             mean_dyy *= inv_n;
                             for (std::size_t j = 0; j < n; ++j) {
                               (*g)[r * n + j] += inv_std[r] * (dy[r * n + j] - mean_dy - y[r * n + j] * mean_dyy);
                             }
                           }
                         });
}

Tensor l2_normalize_last(const Tensor& x) {
  const std::size_t n = x.dim(-1);
  const std::size_t rows = x.numel() / n;
  auto xv = x.values();
  std::vector<double> out(xv.size());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) ss += xv[r * n + j] * xv[r * n + j];
    norms[r] = std::max(std::sqrt(ss), 1e-12);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = xv[r * n + j] / norms[r];
  }
  return Tensor::from_op(x.shape(), std::move(out), {x},
                         [n, rows, norms = std::move(norms)](const BackwardContext& ctx) {
                           auto* g = ctx.input_grad(0);
                           if (!g) return;
                           auto y = ctx.out_values();
                           auto dy = ctx.out_grad();
                           for (std::size_t r = 0; r < rows; ++r) {
                             double dot = 0.0;
                             for (std::size_t j = 0; j < n; ++j) dot += y[r * n + j] * dy[r * n + j];
                             for (std::size_t j = 0; j < n; ++j) {
                               (*g)[r * n + j] += (dy[r * n + j] - y[r * n + j] * dot) / norms[r];
                             }
                           }
                         });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin >= end || end > x.dim(0)) {
    fail(ErrorCode::kDimensionMismatch, "slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                                            ") of " + shape_str(x.shape()));
  }
  const std::size_t row = x.numel() / x.dim(0);
  auto xv = x.values();
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * row),
                          xv.begin() + static_cast<std::ptrdiff_t>(end * row));
  Shape shape = x.shape();
  shape[0] = end - begin;
  const std::size_t offset = begin * row;
  return Tensor::from_op(std::move(shape), std::move(out), {x}, [offset](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    auto dy = ctx.out_grad();
    for (std::size_t i = 0; i < dy.size(); ++i) (*g)[offset + i] += dy[i];
  });
}

Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin >= end || end > x.dim(-1)) {
    fail(ErrorCode::kDimensionMismatch, "slice_last [" + std::to_string(begin) + ", " + std::to_string(end) +
                                            ") of " + shape_str(x.shape()));
  }
  const std::size_t n = x.dim(-1);
  const std::size_t w = end - begin;
  const std::size_t rows = x.numel() / n;
  auto xv = x.values();
  std::vector<double> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(r * n + begin), w, out.begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  return Tensor::from_op(with_last(x.shape(), w), std::move(out), {x}, [=](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    auto dy = ctx.out_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < w; ++j) (*g)[r * n + begin + j] += dy[r * w + j];
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) fail(ErrorCode::kEmptySequence, "concat_rows of nothing");
  const Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t rows = 0;
  std::vector<double> out;
  for (const auto& p : parts) {
    if (p.rank() == 0 || Shape(p.shape().begin() + 1, p.shape().end()) != tail) {
      fail(ErrorCode::kDimensionMismatch, "concat_rows: incompatible " + shape_str(p.shape()));
    }
    rows += p.dim(0);
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  Shape shape = parts[0].shape();
  shape[0] = rows;
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::from_op(std::move(shape), std::move(out), std::move(inputs), [](const BackwardContext& ctx) {
    auto dy = ctx.out_grad();
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ctx.num_inputs(); ++k) {
      const std::size_t len = ctx.input(k).size();
      if (auto* g = ctx.input_grad(k)) {
        for (std::size_t i = 0; i < len; ++i) (*g)[i] += dy[offset + i];
      }
      offset += len;
    }
  });
}

Tensor concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) fail(ErrorCode::kEmptySequence, "concat_last of nothing");
  const Shape head(parts[0].shape().begin(), parts[0].shape().end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() == 0 || Shape(p.shape().begin(), p.shape().end() - 1) != head) {
      fail(ErrorCode::kDimensionMismatch, "concat_last: incompatible " + shape_str(p.shape()));
    }
    widths.push_back(p.dim(-1));
    total += p.dim(-1);
  }
  const std::size_t rows = numel_of(head);
  std::vector<double> out(rows * total);
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * widths[k]), widths[k],
                  out.begin() + static_cast<std::ptrdiff_t>(r * total + col));
    }
    col += widths[k];
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::from_op(with_last(parts[0].shape(), total), std::move(out), std::move(inputs),
                         [rows, total, widths = std::move(widths)](const BackwardContext& ctx) {
                           auto dy = ctx.out_grad();
                           std::size_t col = 0;
                           for (std::size_t k = 0; k < ctx.num_inputs(); ++k) {
                             if (auto* g = ctx.input_grad(k)) {
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t j = 0; j < widths[k]; ++j) {
                                   (*g)[r * widths[k] + j] += dy[r * total + col + j];
                                 }
                               }
                             }
                             col += widths[k];
                           }
                         });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  require_rank(table, 2, "gather_rows");
  if (ids.empty()) fail(ErrorCode::kEmptySequence, "gather_rows with no ids");
  const std::size_t vocab = table.dim(0);
  const std::size_t d = table.dim(1);
  auto tv = table.values();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      fail(ErrorCode::kUnknownGlossId, "id " + std::to_string(ids[i]) + " outside table of " + std::to_string(vocab));
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[i]) * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return Tensor::from_op({ids.size(), d}, std::move(out), {table},
                         [d, idx = std::move(idx)](const BackwardContext& ctx) {
                           auto* g = ctx.input_grad(0);
                           if (!g) return;
                           auto dy = ctx.out_grad();
                           for (std::size_t i = 0; i < idx.size(); ++i) {
                             const std::size_t row = static_cast<std::size_t>(idx[i]) * d;
                             for (std::size_t j = 0; j < d; ++j) (*g)[row + j] += dy[i * d + j];
                           }
                         });
}

Tensor pick_last(const Tensor& x, std::span<const int> index) {
  require_rank(x, 2, "pick_last");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  if (index.size() != rows) fail(ErrorCode::kLengthMismatch, "pick_last: index length differs from rows");
  auto xv = x.values();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (index[r] < 0 || static_cast<std::size_t>(index[r]) >= cols) {
      fail(ErrorCode::kDimensionMismatch, "pick_last: index " + std::to_string(index[r]) + " out of range");
    }
    out[r] = xv[r * cols + static_cast<std::size_t>(index[r])];
  }
  std::vector<int> idx(index.begin(), index.end());
  return Tensor::from_op({rows}, std::move(out), {x}, [cols, idx = std::move(idx)](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    auto dy = ctx.out_grad();
    for (std::size_t r = 0; r < idx.size(); ++r) (*g)[r * cols + static_cast<std::size_t>(idx[r])] += dy[r];
  });
}

Tensor split_heads(const Tensor& x, std::size_t heads) {
  require_rank(x, 2, "split_heads");
  const std::size_t t = x.dim(0);
  const std::size_t width = x.dim(1);
  if (heads == 0 || width % heads != 0) {
    fail(ErrorCode::kDimensionMismatch, "split_heads: width " + std::to_string(width) + " not divisible by heads");
  }
  const std::size_t dh = width / heads;
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t j = 0; j < dh; ++j) out[(h * t + i) * dh + j] = xv[i * width + h * dh + j];
    }
  }
  return Tensor::from_op({heads, t, dh}, std::move(out), {x}, [=](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    auto dy = ctx.out_grad();
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t j = 0; j < dh; ++j) (*g)[i * width + h * dh + j] += dy[(h * t + i) * dh + j];
      }
    }
  });
}

Tensor merge_heads(const Tensor& x) {
  require_rank(x, 3, "merge_heads");
  const std::size_t heads = x.dim(0);
  const std::size_t t = x.dim(1);
  const std::size_t dh = x.dim(2);
  const std::size_t width = heads * dh;
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t j = 0; j < dh; ++j) out[i * width + h * dh + j] = xv[(h * t + i) * dh + j];
    }
  }
  return Tensor::from_op({t, width}, std::move(out), {x}, [=](const BackwardContext& ctx) {
    auto* g = ctx.input_grad(0);
    if (!g) return;
    auto dy = ctx.out_grad();
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t j = 0; j < dh; ++j) (*g)[(h * t + i) * dh + j] += dy[i * width + h * dh + j];
      }
    }
  });
}

Tensor pad_stack(std::span<const Tensor> seqs, std::size_t max_len) {
  if (seqs.empty()) fail(ErrorCode::kEmptySequence, "pad_stack of nothing");
  const std::size_t d = seqs[0].dim(-1);
  std::vector<double> out(seqs.size() * max_len * d, 0.0);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const auto& s = seqs[b];
    if (s.rank() != 2 || s.dim(1) != d || s.dim(0) > max_len) {
      fail(ErrorCode::kDimensionMismatch, "pad_stack: sequence " + shape_str(s.shape()) + " does not fit");
    }
    std::copy(s.values().begin(), s.values().end(), out.begin() + static_cast<std::ptrdiff_t>(b * max_len * d));
  }
  std::vector<Tensor> inputs(seqs.begin(), seqs.end());
  return Tensor::from_op({seqs.size(), max_len, d}, std::move(out), std::move(inputs),
                         [max_len, d](const BackwardContext& ctx) {
                           auto dy = ctx.out_grad();
                           for (std::size_t b = 0; b < ctx.num_inputs(); ++b) {
                             if (auto* g = ctx.input_grad(b)) {
                               for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += dy[b * max_len * d + i];
                             }
                           }
                         });
}

}  // namespace cvtslr
