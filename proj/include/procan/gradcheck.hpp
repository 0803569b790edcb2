#pragma once

#include <functional>

#include "procan/tensor.hpp"

namespace procan {

/// Central-difference gradient of a scalar function, one coordinate at a time.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps = 1e-5);

/// |a−b| / max(|a|, |b|, 1e-8), maximised over elements.
double max_rel_error(const Tensor& a, const Tensor& b);

}  // namespace procan
