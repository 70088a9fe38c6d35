#pragma once

// Deterministic training loops: full-batch MSE for discovery tasks and
// mini-batch L1 for super-resolution.

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "rgc/conv.hpp"
#include "rgc/errors.hpp"
#include "rgc/models.hpp"
#include "rgc/optim.hpp"
#include "rgc/random.hpp"
#include "rgc/tasks.hpp"

namespace rgc {

struct TrainStats {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  double test_mae = 0;
  double wall_seconds = 0;
};

struct TrainOptions {
  std::size_t epochs = 2000;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  /// Called after every epoch with (epoch, train loss).
  std::function<void(std::size_t, double)> on_epoch;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename T>
Tensor<T> batch_of(const std::vector<Sample>& s, const std::vector<std::size_t>& idx, bool target) {
  std::vector<Tensor<T>> items;
  for (auto i : idx) items.push_back((target ? s[i].target : s[i].input).template cast<T>());
  return stack(std::span<const Tensor<T>>(items));
}

}  // namespace detail

/// Full-batch MSE on one (input, target) pair; both unbatched.
template <typename T>
TrainStats train_discovery(Model<T>& model, const Sample& sample, const TrainOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto x = unsqueeze0(sample.input.template cast<T>());
  const auto y = unsqueeze0(sample.target.template cast<T>());
  Optimizer<T> optim(opt.optimizer, opt.learning_rate, model.parameter_tensors());
  TrainStats st;
  for (std::size_t e = 0; e < opt.epochs; ++e) {
    optim.zero_grad();
    const auto loss = mse_loss(model.forward(x), y);
    const double l = static_cast<double>(loss.item());
    if (!std::isfinite(l)) throw TrainingDiverged(static_cast<int>(e));
    backward(loss);
    optim.step();
    st.train_loss.push_back(l);
    if (opt.on_epoch) opt.on_epoch(e, l);
  }
  {
    NoGradGuard ng;
    st.test_mae = static_cast<double>(l1_loss(model.forward(x), y).item());
  }
  st.wall_seconds = detail::seconds_since(t0);
  return st;
}

/// Mean L1 of the model over the chosen samples.
template <typename T>
double evaluate_l1(const Model<T>& model, const Dataset& ds, const std::vector<std::size_t>& idx, std::size_t batch = 4) {
  if (idx.empty()) return 0;
  NoGradGuard ng;
  double total = 0;
  for (std::size_t s = 0; s < idx.size(); s += batch) {
    const std::vector<std::size_t> part(idx.begin() + static_cast<long>(s),
                                        idx.begin() + static_cast<long>(std::min(idx.size(), s + batch)));
    const auto pred = model.forward(detail::batch_of<T>(ds.samples, part, false));
    total += static_cast<double>(l1_loss(pred, detail::batch_of<T>(ds.samples, part, true)).item()) *
             static_cast<double>(part.size());
  }
  return total / static_cast<double>(idx.size());
}

/// L1 of trilinearly upsampling the most recent input step.
inline double trilinear_l1(const Dataset& ds, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0;
  NoGradGuard ng;
  double total = 0;
  for (auto i : idx) {
    const auto& in = ds.samples[i].input;
    const std::size_t C = ds.samples[i].target.dim(0), n = in.dim(1), V = n * n * n;
    std::vector<double> last(in.values().end() - static_cast<long>(C * V), in.values().end());
    const Tensor<double> recent(Shape{1, C, n, n, n}, std::move(last));
    total += l1_loss(upsample_trilinear(recent, 4), unsqueeze0(ds.samples[i].target)).item();
  }
  return total / static_cast<double>(idx.size());
}

/// Mini-batch L1 with a seeded shuffle per epoch; validation L1 after every
/// epoch and test L1 at the end.
template <typename T>
TrainStats train_superres(Model<T>& model, const Dataset& ds, const TrainOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto train_idx = ds.indices(Split::train), val_idx = ds.indices(Split::val), test_idx = ds.indices(Split::test);
  if (train_idx.empty()) throw DataError("training split is empty");
  if (opt.batch_size == 0) throw ConfigError("batch size must be positive");
  Optimizer<T> optim(opt.optimizer, opt.learning_rate, model.parameter_tensors());
  Rng rng(opt.seed ^ 0x9e3779b97f4a7c15ull);
  TrainStats st;
  std::vector<std::size_t> order = train_idx;
  for (std::size_t e = 0; e < opt.epochs; ++e) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double sum = 0;
    for (std::size_t s = 0; s < order.size(); s += opt.batch_size) {
      const std::vector<std::size_t> part(order.begin() + static_cast<long>(s),
                                          order.begin() + static_cast<long>(std::min(order.size(), s + opt.batch_size)));
      optim.zero_grad();
      const auto loss = l1_loss(model.forward(detail::batch_of<T>(ds.samples, part, false)),
                                detail::batch_of<T>(ds.samples, part, true));
      const double l = static_cast<double>(loss.item());
      if (!std::isfinite(l)) throw TrainingDiverged(static_cast<int>(e));
      backward(loss);
      optim.step();
      sum += l * static_cast<double>(part.size());
    }
    st.train_loss.push_back(sum / static_cast<double>(order.size()));
    st.val_loss.push_back(evaluate_l1(model, ds, val_idx, opt.batch_size));
    if (opt.on_epoch) opt.on_epoch(e, st.train_loss.back());
  }
  st.test_mae = evaluate_l1(model, ds, test_idx, opt.batch_size);
  st.wall_seconds = detail::seconds_since(t0);
  return st;
}

}  // namespace rgc
