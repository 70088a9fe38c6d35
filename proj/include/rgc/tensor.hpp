#pragma once

// Dense row-major tensors with a reverse-mode differentiation tape.
//
// A Tensor is a cheap handle onto shared storage. Operations whose inputs
// require gradients record a node holding the parents and a backward
// closure; node ids grow monotonically with creation, so sorting reachable
// nodes by id yields a topological order (parents always precede children).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rgc/errors.hpp"

namespace rgc {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct TensorImpl;

template <typename T>
struct Node {
  std::uint64_t id = 0;
  const char* kind = "";
  std::vector<std::shared_ptr<TensorImpl<T>>> parents;
  // Receives d(loss)/d(output) and accumulates into the parents' grads.
  std::function<void(std::span<const T>)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;
  bool requires_grad = false;
  std::shared_ptr<Node<T>> node;

  T* grad_buffer() {
    if (grad.size() != values.size()) grad.assign(values.size(), T(0));
    return grad.data();
  }
};

inline std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// Disables graph recording in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T = double>
class Tensor {
 public:
  using value_type = T;
  using Impl = detail::TensorImpl<T>;

  Tensor() : Tensor(Shape{}, T(0)) {}

  explicit Tensor(Shape shape, T fill = T(0)) : impl_(std::make_shared<Impl>()) {
    impl_->values.assign(numel(shape), fill);
    impl_->shape = std::move(shape);
  }

  Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<Impl>()) {
    if (values.size() != numel(shape))
      throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
    impl_->shape = std::move(shape);
    impl_->values = std::move(values);
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, v); }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->values.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= rank()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
    return impl_->shape[axis];
  }

  std::span<const T> values() const { return impl_->values; }
  /// In-place access for leaves (optimizers, initializers, data loaders).
  std::span<T> mutable_values() { return impl_->values; }
  const T* data() const { return impl_->values.data(); }

  const T& operator[](std::size_t i) const { return impl_->values[i]; }
  T item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return impl_->values[0];
  }

  bool has_grad() const { return impl_->grad.size() == impl_->values.size() && size() > 0; }
  std::span<const T> grad() const { return impl_->grad; }
  /// Gradient as a detached tensor; zeros when nothing has flowed yet.
  Tensor grad_tensor() const {
    if (!has_grad()) return Tensor(shape(), T(0));
    return Tensor(shape(), impl_->grad);
  }
  void zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), T(0)); }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    if (impl_->node) throw ContractError("requires_grad can only be toggled on leaf tensors");
    impl_->requires_grad = on;
    return *this;
  }
  bool is_leaf() const { return !impl_->node; }

  Tensor detach() const { return Tensor(shape(), impl_->values); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(impl_->values.begin(), impl_->values.end());
    return Tensor<U>(shape(), std::move(out));
  }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<Impl>& impl() const { return impl_; }
  static Tensor from_impl(std::shared_ptr<Impl> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
  }

 private:
  std::shared_ptr<Impl> impl_;
};

namespace detail {

template <typename T, typename Backward>
Tensor<T> make_result(const char* kind, Shape shape, std::vector<T> values,
                      std::vector<std::shared_ptr<TensorImpl<T>>> parents, Backward&& backward) {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  const bool needs = grad_mode() && std::any_of(parents.begin(), parents.end(),
                                                [](const auto& p) { return p->requires_grad; });
  if (needs) {
    auto node = std::make_shared<Node<T>>();
    node->id = next_node_id();
    node->kind = kind;
    node->parents = std::move(parents);
    node->backward = std::forward<Backward>(backward);
    impl->requires_grad = true;
    impl->node = std::move(node);
  }
  return Tensor<T>::from_impl(std::move(impl));
}

}  // namespace detail

/// The recorded computation reachable from one root, parents first.
template <typename T>
class Tape {
 public:
  struct Entry {
    std::uint64_t id;
    const char* kind;
    std::vector<std::uint64_t> parent_ids;  // 0 marks a leaf parent
    detail::TensorImpl<T>* output;
  };

  static Tape record(const Tensor<T>& root) {
    Tape tape;
    std::vector<detail::TensorImpl<T>*> stack{root.impl().get()};
    std::unordered_set<const detail::TensorImpl<T>*> seen;
    std::vector<detail::TensorImpl<T>*> found;
    while (!stack.empty()) {
      auto* cur = stack.back();
      stack.pop_back();
      if (!cur->node || !seen.insert(cur).second) continue;
      found.push_back(cur);
      for (const auto& p : cur->node->parents) stack.push_back(p.get());
    }
    std::sort(found.begin(), found.end(), [](auto* a, auto* b) { return a->node->id < b->node->id; });
    tape.entries_.reserve(found.size());
    for (auto* impl : found) {
      Entry e{impl->node->id, impl->node->kind, {}, impl};
      for (const auto& p : impl->node->parents) e.parent_ids.push_back(p->node ? p->node->id : 0);
      tape.entries_.push_back(std::move(e));
    }
    return tape;
  }

  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

/// Accumulates d(loss)/d(leaf) into every reachable leaf with requires_grad.
/// Leaf gradients add up across calls; zero them between steps.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.size() != 1) throw ContractError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;
  auto* root = loss.impl().get();
  if (!root->node) {
    root->grad_buffer()[0] += T(1);
    return;
  }
  auto tape = Tape<T>::record(loss);
  // Interior buffers are allocated when the first gradient reaches them and
  // freed once propagated; nodes nothing flowed into are skipped.
  for (const auto& e : tape.entries()) std::vector<T>().swap(e.output->grad);
  root->grad_buffer()[0] = T(1);
  const auto& entries = tape.entries();
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    auto* out = it->output;
    if (out->grad.size() != out->values.size()) continue;
    out->node->backward(std::span<const T>(out->grad));
    std::vector<T>().swap(out->grad);
  }
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic. Broadcasting covers a scalar operand and an operand
// whose shape is a leading prefix of the other's (each of its entries scales a
// contiguous trailing block).

namespace detail {

enum class Broadcast { same, rhs_scalar, lhs_scalar, rhs_prefix, lhs_prefix };

inline bool is_prefix(const Shape& p, const Shape& s) {
  return p.size() <= s.size() && std::equal(p.begin(), p.end(), s.begin());
}

inline Broadcast broadcast_mode(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return Broadcast::same;
  if (numel(b) == 1 && b.size() <= 1) return Broadcast::rhs_scalar;
  if (numel(a) == 1 && a.size() <= 1) return Broadcast::lhs_scalar;
  if (is_prefix(b, a)) return Broadcast::rhs_prefix;
  if (is_prefix(a, b)) return Broadcast::lhs_prefix;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

// Forward f(a, b); backward da += g * dfa(a, b), db += g * dfb(a, b).
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary_op(const char* kind, const Tensor<T>& a, const Tensor<T>& b, F f, DA dfa, DB dfb) {
  const auto mode = broadcast_mode(a.shape(), b.shape(), kind);
  const bool lhs_big = mode == Broadcast::same || mode == Broadcast::rhs_scalar || mode == Broadcast::rhs_prefix;
  const Shape out_shape = lhs_big ? a.shape() : b.shape();
  const std::size_t n = numel(out_shape);
  const std::size_t small = lhs_big ? b.size() : a.size();
  const std::size_t block = small == 0 ? 1 : n / small;
  // Map an output position to the operand index on each side.
  auto ia = [&](std::size_t i) { return lhs_big ? i : (mode == Broadcast::lhs_scalar ? 0 : i / block); };
  auto ib = [&](std::size_t i) { return !lhs_big ? i : (mode == Broadcast::rhs_scalar ? 0 : i / block); };
  const T* pa = a.data();
  const T* pb = b.data();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(pa[ia(i)], pb[ib(i)]);

  auto* A = a.impl().get();
  auto* B = b.impl().get();
  return make_result<T>(kind, out_shape, std::move(out), {a.impl(), b.impl()},
                        [A, B, mode, lhs_big, block, dfa, dfb](std::span<const T> g) {
                          auto ja = [&](std::size_t i) {
                            return lhs_big ? i : (mode == Broadcast::lhs_scalar ? 0 : i / block);
                          };
                          auto jb = [&](std::size_t i) {
                            return !lhs_big ? i : (mode == Broadcast::rhs_scalar ? 0 : i / block);
                          };
                          const T* va = A->values.data();
                          const T* vb = B->values.data();
                          if (A->requires_grad) {
                            T* ga = A->grad_buffer();
                            for (std::size_t i = 0; i < g.size(); ++i) ga[ja(i)] += g[i] * dfa(va[ja(i)], vb[jb(i)]);
                          }
                          if (B->requires_grad) {
                            T* gb = B->grad_buffer();
                            for (std::size_t i = 0; i < g.size(); ++i) gb[jb(i)] += g[i] * dfb(va[ja(i)], vb[jb(i)]);
                          }
                        });
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_op<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_op<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_op<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  return sub(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
  return mul(a, b);
}

template <typename T>
Tensor<T> scalar_mul(T s, const Tensor<T>& x) {
  std::vector<T> out(x.values().begin(), x.values().end());
  for (auto& v : out) v *= s;
  auto* X = x.impl().get();
  return detail::make_result<T>("scalar_mul", x.shape(), std::move(out), {x.impl()}, [X, s](std::span<const T> g) {
    T* gx = X->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
  });
}

/// max(x, 0); the subgradient at 0 is 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.size());
  const T* v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > T(0) ? v[i] : T(0);
  auto* X = x.impl().get();
  return detail::make_result<T>("relu", x.shape(), std::move(out), {x.impl()}, [X](std::span<const T> g) {
    T* gx = X->grad_buffer();
    const T* v = X->values.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (v[i] > T(0)) gx[i] += g[i];
  });
}

/// Adds b[c] to every entry of channel c of x (axis 1).
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b) {
  if (x.rank() < 2 || b.rank() != 1 || b.dim(0) != x.dim(1))
    throw ShapeError("add_channel_bias: bias " + shape_str(b.shape()) + " vs input " + shape_str(x.shape()));
  const std::size_t batch = x.dim(0), channels = x.dim(1), inner = x.size() / (batch * channels);
  std::vector<T> out(x.values().begin(), x.values().end());
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      T* row = out.data() + (n * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) row[i] += b[c];
    }
  auto* X = x.impl().get();
  auto* B = b.impl().get();
  return detail::make_result<T>("add_channel_bias", x.shape(), std::move(out), {x.impl(), b.impl()},
                                [X, B, batch, channels, inner](std::span<const T> g) {
                                  if (X->requires_grad) {
                                    T* gx = X->grad_buffer();
                                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                                  }
                                  if (B->requires_grad) {
                                    T* gb = B->grad_buffer();
                                    for (std::size_t n = 0; n < batch; ++n)
                                      for (std::size_t c = 0; c < channels; ++c) {
                                        const T* row = g.data() + (n * channels + c) * inner;
                                        T acc = 0;
                                        for (std::size_t i = 0; i < inner; ++i) acc += row[i];
                                        gb[c] += acc;
                                      }
                                  }
                                });
}

// ---------------------------------------------------------------------------
// Shape manipulation.

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  std::vector<T> out(x.values().begin(), x.values().end());
  auto* X = x.impl().get();
  return detail::make_result<T>("reshape", std::move(shape), std::move(out), {x.impl()}, [X](std::span<const T> g) {
    T* gx = X->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

namespace detail {

inline std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

// For each output position of the permuted tensor, the source position.
inline std::vector<std::size_t> permutation_sources(const Shape& in, const std::vector<std::size_t>& perm) {
  const std::size_t r = in.size();
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = in[perm[i]];
  const auto in_st = strides_of(in);
  std::vector<std::size_t> src(numel(in));
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < src.size(); ++flat) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < r; ++i) s += idx[i] * in_st[perm[i]];
    src[flat] = s;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out[i]) break;
      idx[i] = 0;
    }
  }
  return src;
}

}  // namespace detail

/// out[i] = x[indices[i]]; the backward pass scatter-adds.
template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::shared_ptr<const std::vector<std::size_t>> indices, Shape out_shape) {
  if (numel(out_shape) != indices->size())
    throw ShapeError("gather: " + std::to_string(indices->size()) + " indices for shape " + shape_str(out_shape));
  std::vector<T> out(indices->size());
  const T* v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if ((*indices)[i] >= x.size()) throw IndexError("gather: index out of range");
    out[i] = v[(*indices)[i]];
  }
  auto* X = x.impl().get();
  return detail::make_result<T>("gather", std::move(out_shape), std::move(out), {x.impl()},
                                [X, indices](std::span<const T> g) {
                                  T* gx = X->grad_buffer();
                                  for (std::size_t i = 0; i < g.size(); ++i) gx[(*indices)[i]] += g[i];
                                });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
  if (perm.size() != x.rank()) throw ShapeError("permute: rank mismatch");
  std::vector<bool> used(perm.size(), false);
  for (auto p : perm) {
    if (p >= perm.size() || used[p]) throw ShapeError("permute: not a permutation");
    used[p] = true;
  }
  Shape out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out_shape[i] = x.shape()[perm[i]];
  auto src = std::make_shared<const std::vector<std::size_t>>(detail::permutation_sources(x.shape(), perm));
  return gather(x, std::move(src), std::move(out_shape));
}

/// Exchanges two axes by copying contiguous trailing blocks; no index table.
template <typename T>
Tensor<T> swap_axes(const Tensor<T>& x, std::size_t a, std::size_t b) {
  if (a >= x.rank() || b >= x.rank()) throw ShapeError("swap_axes: axis out of range");
  if (a > b) std::swap(a, b);
  Shape out_shape = x.shape();
  std::swap(out_shape[a], out_shape[b]);
  if (a == b) return reshape(x, out_shape);
  // View as [outer, na, mid, nb, inner] -> [outer, nb, mid, na, inner].
  const Shape& s = x.shape();
  std::size_t outer = 1, mid = 1, inner = 1;
  for (std::size_t i = 0; i < a; ++i) outer *= s[i];
  for (std::size_t i = a + 1; i < b; ++i) mid *= s[i];
  for (std::size_t i = b + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t na = s[a], nb = s[b];
  std::vector<T> out(x.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < na; ++i)
      for (std::size_t m = 0; m < mid; ++m)
        for (std::size_t j = 0; j < nb; ++j) {
          const T* from = x.data() + (((o * na + i) * mid + m) * nb + j) * inner;
          std::copy(from, from + inner, out.data() + (((o * nb + j) * mid + m) * na + i) * inner);
        }
  auto* X = x.impl().get();
  return detail::make_result<T>("swap_axes", std::move(out_shape), std::move(out), {x.impl()},
                                [X, outer, na, mid, nb, inner](std::span<const T> g) {
                                  T* gx = X->grad_buffer();
                                  for (std::size_t o = 0; o < outer; ++o)
                                    for (std::size_t i = 0; i < na; ++i)
                                      for (std::size_t m = 0; m < mid; ++m)
                                        for (std::size_t j = 0; j < nb; ++j) {
                                          T* to = gx + (((o * na + i) * mid + m) * nb + j) * inner;
                                          const T* from = g.data() + (((o * nb + j) * mid + m) * na + i) * inner;
                                          for (std::size_t k = 0; k < inner; ++k) to[k] += from[k];
                                        }
                                });
}

// ---------------------------------------------------------------------------
// Reductions.

template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::vector<std::size_t> axes) {
  std::sort(axes.begin(), axes.end());
  axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
  for (auto a : axes)
    if (a >= x.rank()) throw ShapeError("sum: axis " + std::to_string(a) + " invalid for " + shape_str(x.shape()));
  const Shape& in = x.shape();
  Shape out_shape;
  std::vector<bool> reduced(in.size(), false);
  for (auto a : axes) reduced[a] = true;
  for (std::size_t i = 0; i < in.size(); ++i)
    if (!reduced[i]) out_shape.push_back(in[i]);
  // Contiguous axes: out[o, i] = sum_r x[o, r, i] without an index table.
  if (!axes.empty() && axes.back() - axes.front() + 1 == axes.size()) {
    std::size_t outer = 1, red = 1, inner = 1;
    for (std::size_t i = 0; i < in.size(); ++i) (i < axes.front() ? outer : i <= axes.back() ? red : inner) *= in[i];
    std::vector<T> out(outer * inner, T(0));
    const T* v = x.data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t r = 0; r < red; ++r) {
        const T* src = v + (o * red + r) * inner;
        T* dst = out.data() + o * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    auto* X = x.impl().get();
    return detail::make_result<T>("sum", std::move(out_shape), std::move(out), {x.impl()},
                                  [X, outer, red, inner](std::span<const T> g) {
                                    T* gx = X->grad_buffer();
                                    for (std::size_t o = 0; o < outer; ++o)
                                      for (std::size_t r = 0; r < red; ++r) {
                                        T* dst = gx + (o * red + r) * inner;
                                        const T* src = g.data() + o * inner;
                                        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
                                      }
                                  });
  }
  // Output stride for every input axis (0 on reduced axes).
  const auto ost = detail::strides_of(out_shape);
  std::vector<std::size_t> map_st(in.size(), 0);
  for (std::size_t i = 0, o = 0; i < in.size(); ++i)
    if (!reduced[i]) map_st[i] = ost[o++];
  auto target = std::make_shared<std::vector<std::size_t>>(x.size());
  std::vector<std::size_t> idx(in.size(), 0);
  for (std::size_t flat = 0; flat < x.size(); ++flat) {
    std::size_t t = 0;
    for (std::size_t i = 0; i < in.size(); ++i) t += idx[i] * map_st[i];
    (*target)[flat] = t;
    for (std::size_t i = in.size(); i-- > 0;) {
      if (++idx[i] < in[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<T> out(numel(out_shape), T(0));
  const T* v = x.data();
  for (std::size_t i = 0; i < x.size(); ++i) out[(*target)[i]] += v[i];
  auto* X = x.impl().get();
  return detail::make_result<T>("sum", std::move(out_shape), std::move(out), {x.impl()},
                                [X, target](std::span<const T> g) {
                                  T* gx = X->grad_buffer();
                                  for (std::size_t i = 0; i < target->size(); ++i) gx[i] += g[(*target)[i]];
                                });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::vector<std::size_t> axes) {
  std::size_t count = 1;
  std::sort(axes.begin(), axes.end());
  axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
  for (auto a : axes) count *= x.dim(a);
  return scalar_mul(T(1) / static_cast<T>(count), sum(x, axes));
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  std::vector<std::size_t> axes(x.rank());
  std::iota(axes.begin(), axes.end(), 0);
  return sum(x, axes);
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  return scalar_mul(T(1) / static_cast<T>(x.size()), sum_all(x));
}

// ---------------------------------------------------------------------------
// Losses (means over every entry).

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse_loss: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  const std::size_t n = pred.size();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = pred[i] - target[i];
    acc += d * d;
  }
  auto* P = pred.impl().get();
  auto* Y = target.impl().get();
  return detail::make_result<T>("mse_loss", Shape{}, {acc / static_cast<T>(n)}, {pred.impl(), target.impl()},
                                [P, Y, n](std::span<const T> g) {
                                  const T s = T(2) * g[0] / static_cast<T>(n);
                                  const T* p = P->values.data();
                                  const T* y = Y->values.data();
                                  if (P->requires_grad) {
                                    T* gp = P->grad_buffer();
                                    for (std::size_t i = 0; i < n; ++i) gp[i] += s * (p[i] - y[i]);
                                  }
                                  if (Y->requires_grad) {
                                    T* gy = Y->grad_buffer();
                                    for (std::size_t i = 0; i < n; ++i) gy[i] -= s * (p[i] - y[i]);
                                  }
                                });
}

/// Mean absolute error; the subgradient at zero residual is 0.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("l1_loss: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  const std::size_t n = pred.size();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(pred[i] - target[i]);
  auto* P = pred.impl().get();
  auto* Y = target.impl().get();
  return detail::make_result<T>("l1_loss", Shape{}, {acc / static_cast<T>(n)}, {pred.impl(), target.impl()},
                                [P, Y, n](std::span<const T> g) {
                                  const T s = g[0] / static_cast<T>(n);
                                  const T* p = P->values.data();
                                  const T* y = Y->values.data();
                                  auto sgn = [](T d) { return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)); };
                                  if (P->requires_grad) {
                                    T* gp = P->grad_buffer();
                                    for (std::size_t i = 0; i < n; ++i) gp[i] += s * sgn(p[i] - y[i]);
                                  }
                                  if (Y->requires_grad) {
                                    T* gy = Y->grad_buffer();
                                    for (std::size_t i = 0; i < n; ++i) gy[i] -= s * sgn(p[i] - y[i]);
                                  }
                                });
}

// ---------------------------------------------------------------------------
// Data helpers (no graph).

/// Stacks equally shaped tensors along a new leading axis.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items) {
  if (items.empty()) throw ShapeError("stack: no tensors");
  Shape shape = items[0].shape();
  std::vector<T> out;
  out.reserve(items.size() * items[0].size());
  for (const auto& t : items) {
    if (t.shape() != shape) throw ShapeError("stack: mismatched shapes");
    out.insert(out.end(), t.values().begin(), t.values().end());
  }
  shape.insert(shape.begin(), items.size());
  return Tensor<T>(std::move(shape), std::move(out));
}

/// Entry i along the leading axis, as a detached tensor.
template <typename T>
Tensor<T> take(const Tensor<T>& x, std::size_t i) {
  if (x.rank() == 0 || i >= x.dim(0)) throw IndexError("take: index out of range");
  Shape shape(x.shape().begin() + 1, x.shape().end());
  const std::size_t n = numel(shape);
  return Tensor<T>(shape, std::vector<T>(x.values().begin() + i * n, x.values().begin() + (i + 1) * n));
}

template <typename T>
Tensor<T> unsqueeze0(const Tensor<T>& x) {
  Shape s = x.shape();
  s.insert(s.begin(), 1);
  return reshape(x, s);
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename T>
T max_abs(const Tensor<T>& a) {
  T m = 0;
  for (auto v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace rgc
