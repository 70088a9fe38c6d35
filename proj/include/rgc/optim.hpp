#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rgc/errors.hpp"
#include "rgc/tensor.hpp"

namespace rgc {

enum class OptimizerKind { sgd, adam };

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

/// Plain SGD or Adam (beta1 0.9, beta2 0.999, eps 1e-8, bias corrected).
/// Reads the gradients accumulated on each parameter and updates in place.
template <typename T>
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, std::vector<Tensor<T>> params)
      : kind_(kind), lr_(lr), params_(std::move(params)) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (kind_ == OptimizerKind::adam)
      for (const auto& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
  }

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  std::size_t steps() const { return t_; }
  const std::vector<Tensor<T>>& params() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  /// Applies one update. Parameters without an accumulated gradient are skipped.
  void step() {
    ++t_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      if (!p.has_grad()) continue;
      auto theta = p.mutable_values();
      auto g = p.grad();
      if (g.size() != theta.size()) throw ShapeError("optimizer: gradient shape mismatch");
      if (kind_ == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= static_cast<T>(lr_ * g[i]);
        continue;
      }
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double gi = g[i];
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        const double mh = m[i] / c1, vh = v[i] / c2;
        theta[i] -= static_cast<T>(lr_ * mh / (std::sqrt(vh) + eps));
      }
    }
  }

 private:
  OptimizerKind kind_;
  double lr_;
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace rgc
