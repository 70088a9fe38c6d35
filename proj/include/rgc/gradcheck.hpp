#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "rgc/tensor.hpp"

namespace rgc {

/// Central finite differences of a scalar function of theta's entries.
/// theta is perturbed in place and restored exactly after each coordinate.
template <typename T>
Tensor<T> finite_diff_grad(const std::function<T()>& f, Tensor<T>& theta, T eps = T(1e-5)) {
  Tensor<T> out(theta.shape(), T(0));
  auto vals = theta.mutable_values();
  auto res = out.mutable_values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const T saved = vals[i];
    vals[i] = saved + eps;
    const T fp = f();
    vals[i] = saved - eps;
    const T fm = f();
    vals[i] = saved;
    res[i] = (fp - fm) / (T(2) * eps);
  }
  return out;
}

/// max_i |a_i - b_i| / max(max_i |b_i|, floor); a scale-aware relative error.
template <typename T>
T relative_error(const Tensor<T>& a, const Tensor<T>& b, T floor = T(1e-12)) {
  return max_abs_diff(a, b) / std::max(max_abs(b), floor);
}

}  // namespace rgc
