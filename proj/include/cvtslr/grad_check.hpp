#pragma once

#include <functional>
#include <vector>

#include "cvtslr/tensor.hpp"

namespace cvtslr {

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-6);

// Same measure for a closure over several leaves that already require grad
// (model parameters); the leaves are perturbed in place and restored.
double grad_check_leaves(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double h = 1e-6);

}  // namespace cvtslr
