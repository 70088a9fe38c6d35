#pragma once

// Lifting, group, relaxed and separable relaxed group convolutions.
//
// Group feature maps are [B, C, |H|, spatial...]. Each layer expands its
// parameters into an ordinary grouped convolution kernel through the index
// tables of a GridActionCache and then calls conv_nd, so gradients reach
// every kernel entry and relaxed weight through the generic ops.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "rgc/conv.hpp"
#include "rgc/finite_group.hpp"
#include "rgc/random.hpp"
#include "rgc/tensor.hpp"

namespace rgc {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> tensor;
};

using GroupPtr = std::shared_ptr<const FiniteGroup>;

inline GroupPtr make_group(const std::string& name) { return std::make_shared<const FiniteGroup>(FiniteGroup::from_name(name)); }

using PermTable = std::shared_ptr<const std::vector<std::vector<std::size_t>>>;

/// out[a, h, b, q] = sum_l w[l, h] * psi[l, a, b, perm[h][q]].
/// psi is [L, A, Bd, Q] (any shape with that element count), w is [L, H].
template <typename T>
Tensor<T> relaxed_expand(const Tensor<T>& psi, const Tensor<T>& w, const PermTable& perm, std::size_t A,
                         std::size_t Bd, std::size_t Q, Shape out_shape) {
  const std::size_t L = w.dim(0), H = w.dim(1);
  if (w.rank() != 2 || psi.size() != L * A * Bd * Q || perm->size() != H)
    throw ShapeError("relaxed_expand: psi " + shape_str(psi.shape()) + " / w " + shape_str(w.shape()) +
                     " inconsistent with expansion tables");
  if (numel(out_shape) != A * H * Bd * Q) throw ShapeError("relaxed_expand: output shape mismatch");
  std::vector<T> out(A * H * Bd * Q, T(0));
  const T* P = psi.data();
  const T* W = w.data();
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t h = 0; h < H; ++h) {
      const auto& ph = (*perm)[h];
      for (std::size_t b = 0; b < Bd; ++b) {
        T* dst = out.data() + ((a * H + h) * Bd + b) * Q;
        for (std::size_t l = 0; l < L; ++l) {
          const T wl = W[l * H + h];
          const T* src = P + ((l * A + a) * Bd + b) * Q;
          for (std::size_t q = 0; q < Q; ++q) dst[q] += wl * src[ph[q]];
        }
      }
    }
  auto* Ps = psi.impl().get();
  auto* Ws = w.impl().get();
  return detail::make_result<T>(
      "relaxed_expand", std::move(out_shape), std::move(out), {psi.impl(), w.impl()},
      [Ps, Ws, perm, L, A, Bd, Q, H](std::span<const T> g) {
        T* gp = Ps->requires_grad ? Ps->grad_buffer() : nullptr;
        T* gw = Ws->requires_grad ? Ws->grad_buffer() : nullptr;
        const T* P = Ps->values.data();
        const T* W = Ws->values.data();
        for (std::size_t a = 0; a < A; ++a)
          for (std::size_t h = 0; h < H; ++h) {
            const auto& ph = (*perm)[h];
            for (std::size_t b = 0; b < Bd; ++b) {
              const T* gr = g.data() + ((a * H + h) * Bd + b) * Q;
              for (std::size_t l = 0; l < L; ++l) {
                const std::size_t base = ((l * A + a) * Bd + b) * Q;
                if (gp) {
                  const T wl = W[l * H + h];
                  for (std::size_t q = 0; q < Q; ++q) gp[base + ph[q]] += wl * gr[q];
                }
                if (gw) {
                  T acc = 0;
                  for (std::size_t q = 0; q < Q; ++q) acc += gr[q] * P[base + ph[q]];
                  gw[l * H + h] += acc;
                }
              }
            }
          }
      });
}

/// Mean over the group axis: [B, C, |H|, spatial...] -> [B, C, spatial...].
template <typename T>
Tensor<T> group_pool(const Tensor<T>& f) {
  if (f.rank() < 3) throw ShapeError("group_pool: expected [B, C, |H|, ...], got " + shape_str(f.shape()));
  return mean(f, {2});
}

namespace detail {

inline Shape kernel_shape(std::initializer_list<std::size_t> lead, std::size_t S, int d) {
  Shape s(lead);
  for (int a = 0; a < d; ++a) s.push_back(S);
  return s;
}

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double bound) {
  for (auto& v : t.mutable_values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

inline void check_feature_map(const Shape& s, const FiniteGroup& G, std::size_t c_in, const char* op) {
  if (s.size() != 3 + static_cast<std::size_t>(G.dim()))
    throw ShapeError(std::string(op) + ": expected [B, C, |H|, spatial], got " + shape_str(s));
  if (s[2] != G.order()) throw ConfigError(std::string(op) + ": feature map group axis does not match the layer group");
  if (s[1] != c_in)
    throw ShapeError(std::string(op) + ": expected " + std::to_string(c_in) + " input channels, got " + shape_str(s));
}

inline Shape with_spatial_of(Shape lead, const Shape& src, std::size_t first) {
  for (std::size_t a = first; a < src.size(); ++a) lead.push_back(src[a]);
  return lead;
}

}  // namespace detail

/// Common state of every layer acting on a group.
template <typename T>
class GroupLayerBase {
 public:
  virtual ~GroupLayerBase() = default;
  virtual const char* kind() const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x) const = 0;
  /// Trainable tensors.
  virtual std::vector<Param<T>> parameters() const = 0;
  /// Everything needed to restore the layer (trainable or frozen).
  virtual std::vector<Param<T>> state() const = 0;
  virtual void init(Rng& rng) = 0;

  const FiniteGroup& group() const { return *group_; }
  const GroupPtr& group_ptr() const { return group_; }
  const GridActionCache& cache() const { return cache_; }
  bool relaxed() const { return relaxed_; }
  std::size_t banks() const { return L_; }
  std::size_t c_in() const { return c_in_; }
  std::size_t c_out() const { return c_out_; }
  std::size_t kernel_size() const { return S_; }
  const Tensor<T>& relaxed_weights() const { return w_; }
  Tensor<T>& relaxed_weights() { return w_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.size();
    return n;
  }

 protected:
  GroupLayerBase(GroupPtr G, GridActionCache cache, std::size_t c_in, std::size_t c_out, std::size_t S, std::size_t L,
                 bool relaxed)
      : group_(std::move(G)), cache_(std::move(cache)), c_in_(c_in), c_out_(c_out), S_(S), L_(L), relaxed_(relaxed) {
    if (L_ == 0) throw ConfigError("filter bank count must be at least 1");
    if (c_in_ == 0 || c_out_ == 0) throw ConfigError("channel counts must be positive");
    w_ = Tensor<T>(Shape{L_, group_->order()}, T(1));
    w_.set_requires_grad(relaxed_);
  }

  void reset_weights() {
    for (auto& v : w_.mutable_values()) v = T(1);
  }

  std::size_t volume() const { return cache_.volume; }
  int d() const { return group_->dim(); }

  GroupPtr group_;
  GridActionCache cache_;
  std::size_t c_in_, c_out_, S_, L_;
  bool relaxed_;
  Tensor<T> w_;
};

/// Lifting convolution from scalar grids to group feature maps. In strict
/// mode the relaxed weights stay frozen at 1.
template <typename T>
class LiftingLayer final : public GroupLayerBase<T> {
  using Base = GroupLayerBase<T>;

 public:
  LiftingLayer(GroupPtr G, std::size_t c_in, std::size_t c_out, std::size_t S, std::size_t L = 1, bool relaxed = false)
      : Base(G, build_action_cache(*G, S), c_in, c_out, S, L, relaxed) {
    psi_ = Tensor<T>(detail::kernel_shape({L, c_out, c_in}, S, G->dim()), T(0));
    psi_.set_requires_grad(true);
    perm_ = std::make_shared<const std::vector<std::vector<std::size_t>>>(this->cache_.pi);
  }

  const char* kind() const override { return relaxed_ ? "lift_relaxed" : "lift"; }

  void init(Rng& rng) override {
    this->reset_weights();
    detail::fill_uniform(psi_, rng, 1.0 / std::sqrt(static_cast<double>(c_in_ * this->volume())));
  }

  Tensor<T> effective_kernel() const {
    const std::size_t H = group_->order();
    return relaxed_expand(psi_, w_, perm_, c_out_, c_in_, this->volume(),
                          detail::kernel_shape({c_out_ * H, c_in_}, S_, this->d()));
  }

  Tensor<T> forward(const Tensor<T>& x) const override {
    if (x.rank() != 2 + static_cast<std::size_t>(this->d()) || x.dim(1) != c_in_)
      throw ShapeError("lift: expected [B, " + std::to_string(c_in_) + ", spatial], got " + shape_str(x.shape()));
    const auto y = conv_nd(x, effective_kernel(), Padding::circular);
    return reshape(y, detail::with_spatial_of({x.dim(0), c_out_, group_->order()}, x.shape(), 2));
  }

  std::vector<Param<T>> parameters() const override {
    std::vector<Param<T>> p{{"psi", psi_}};
    if (relaxed_) p.push_back({"w", w_});
    return p;
  }
  std::vector<Param<T>> state() const override { return {{"psi", psi_}, {"w", w_}}; }

  Tensor<T>& kernels() { return psi_; }
  const Tensor<T>& kernels() const { return psi_; }

 private:
  using Base::c_in_;
  using Base::c_out_;
  using Base::group_;
  using Base::relaxed_;
  using Base::S_;
  using Base::w_;
  Tensor<T> psi_;
  PermTable perm_;
};

/// Relaxed group convolution over L filter banks, kernels [L, Co, Ci, |H|, S...].
/// relaxed = false freezes w at 1 (a strict group convolution when L = 1).
template <typename T>
class RelaxedGConvLayer final : public GroupLayerBase<T> {
  using Base = GroupLayerBase<T>;

 public:
  RelaxedGConvLayer(GroupPtr G, std::size_t c_in, std::size_t c_out, std::size_t S, std::size_t L = 1,
                    bool relaxed = true)
      : Base(G, build_action_cache(*G, S), c_in, c_out, S, L, relaxed) {
    const std::size_t H = G->order();
    psi_ = Tensor<T>(detail::kernel_shape({L, c_out, c_in, H}, S, G->dim()), T(0));
    psi_.set_requires_grad(true);
    const std::size_t V = this->volume();
    std::vector<std::vector<std::size_t>> perm(H, std::vector<std::size_t>(H * V));
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t hp = 0; hp < H; ++hp)
        for (std::size_t o = 0; o < V; ++o)
          perm[h][hp * V + o] = this->cache_.sigma[h][hp] * V + this->cache_.pi[h][o];
    perm_ = std::make_shared<const std::vector<std::vector<std::size_t>>>(std::move(perm));
  }

  const char* kind() const override { return relaxed_ ? "gconv_relaxed" : "gconv"; }

  void init(Rng& rng) override {
    this->reset_weights();
    detail::fill_uniform(psi_, rng, 1.0 / std::sqrt(static_cast<double>(c_in_ * group_->order() * this->volume())));
  }

  /// Kernel [Co*|H|, Ci*|H|, S...] of the equivalent ordinary convolution.
  Tensor<T> effective_kernel() const {
    const std::size_t H = group_->order();
    return relaxed_expand(psi_, w_, perm_, c_out_, c_in_, H * this->volume(),
                          detail::kernel_shape({c_out_ * H, c_in_ * H}, S_, this->d()));
  }

  Tensor<T> forward(const Tensor<T>& f) const override {
    detail::check_feature_map(f.shape(), *group_, c_in_, kind());
    const std::size_t H = group_->order(), B = f.dim(0);
    const auto x = reshape(f, detail::with_spatial_of({B, c_in_ * H}, f.shape(), 3));
    const auto y = conv_nd(x, effective_kernel(), Padding::circular);
    return reshape(y, detail::with_spatial_of({B, c_out_, H}, f.shape(), 3));
  }

  std::vector<Param<T>> parameters() const override {
    std::vector<Param<T>> p{{"psi", psi_}};
    if (relaxed_) p.push_back({"w", w_});
    return p;
  }
  std::vector<Param<T>> state() const override { return {{"psi", psi_}, {"w", w_}}; }

  Tensor<T>& kernels() { return psi_; }
  const Tensor<T>& kernels() const { return psi_; }

 private:
  using Base::c_in_;
  using Base::c_out_;
  using Base::group_;
  using Base::relaxed_;
  using Base::S_;
  using Base::w_;
  Tensor<T> psi_;
  PermTable perm_;
};

/// Strictly equivariant group convolution: a frozen-weight relaxed layer
/// with one filter bank.
template <typename T>
Tensor<T> gconv_forward(const RelaxedGConvLayer<T>& layer, const Tensor<T>& f) {
  if (layer.banks() != 1) throw ConfigError("gconv_forward: needs a single filter bank");
  const auto w = layer.relaxed_weights().values();
  for (auto v : w)
    if (v != w[0]) throw ConfigError("gconv_forward: relaxed weights are not all equal");
  return layer.forward(f);
}

/// Separable relaxed group convolution: group/channel factor
/// psi_o [L, Co, Ci, |H|] and scalar stencil psi_t [L, S...] shared across
/// channels. Evaluated as a pointwise mixing convolution followed by a
/// depthwise spatial convolution and a sum over filter banks.
template <typename T>
class SeparableRelaxedGConvLayer final : public GroupLayerBase<T> {
  using Base = GroupLayerBase<T>;

 public:
  SeparableRelaxedGConvLayer(GroupPtr G, std::size_t c_in, std::size_t c_out, std::size_t S, std::size_t L = 1,
                             bool relaxed = true)
      : Base(G, build_action_cache(*G, S), c_in, c_out, S, L, relaxed) {
    const std::size_t H = G->order(), V = this->volume();
    psi_o_ = Tensor<T>(Shape{L, c_out, c_in, H}, T(0));
    psi_o_.set_requires_grad(true);
    psi_t_ = Tensor<T>(detail::kernel_shape({L}, S, G->dim()), T(0));
    psi_t_.set_requires_grad(true);

    // Pointwise kernel [L, Co, H, Ci, H'] <- psi_o[l, co, ci, sigma_h(h')].
    auto mix = std::make_shared<std::vector<std::size_t>>();
    mix->reserve(L * c_out * H * c_in * H);
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t co = 0; co < c_out; ++co)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t ci = 0; ci < c_in; ++ci)
            for (std::size_t hp = 0; hp < H; ++hp)
              mix->push_back(((l * c_out + co) * c_in + ci) * H + this->cache_.sigma[h][hp]);
    mix_index_ = mix;

    // Rotated stencils [L, H, V] <- psi_t[l, pi_h(o)].
    auto rot = std::make_shared<std::vector<std::size_t>>();
    rot->reserve(L * H * V);
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t o = 0; o < V; ++o) rot->push_back(l * V + this->cache_.pi[h][o]);
    stencil_index_ = rot;

    // Depthwise kernel [L, Co, H, V] <- weighted stencils [L, H, V].
    auto bc = std::make_shared<std::vector<std::size_t>>();
    bc->reserve(L * c_out * H * V);
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t co = 0; co < c_out; ++co)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t o = 0; o < V; ++o) bc->push_back((l * H + h) * V + o);
    broadcast_index_ = bc;
  }

  const char* kind() const override { return relaxed_ ? "sep_relaxed" : "sep"; }

  void init(Rng& rng) override {
    this->reset_weights();
    detail::fill_uniform(psi_o_, rng, 1.0 / std::sqrt(static_cast<double>(c_in_ * group_->order())));
    detail::fill_uniform(psi_t_, rng, 1.0 / std::sqrt(static_cast<double>(this->volume())));
  }

  /// Kernel entries only: L * (Co * Ci * |H| + S^d).
  std::size_t kernel_parameter_count() const { return psi_o_.size() + psi_t_.size(); }

  Tensor<T> mixing_kernel() const {
    const std::size_t H = group_->order();
    return gather(psi_o_, mix_index_, detail::kernel_shape({L_ * c_out_ * H, c_in_ * H}, 1, this->d()));
  }

  Tensor<T> depthwise_kernel() const {
    const std::size_t H = group_->order(), V = this->volume();
    const auto rotated = gather(psi_t_, stencil_index_, Shape{L_, H, V});
    const auto weighted = mul(rotated, w_);
    return gather(weighted, broadcast_index_, detail::kernel_shape({L_ * c_out_ * H, 1}, S_, this->d()));
  }

  Tensor<T> forward(const Tensor<T>& f) const override {
    detail::check_feature_map(f.shape(), *group_, c_in_, kind());
    const std::size_t H = group_->order(), B = f.dim(0);
    const auto x = reshape(f, detail::with_spatial_of({B, c_in_ * H}, f.shape(), 3));
    const auto mixed = conv_nd(x, mixing_kernel(), Padding::circular);
    const auto y = conv_nd(mixed, depthwise_kernel(), Padding::circular, L_ * c_out_ * H);
    if (L_ == 1) return reshape(y, detail::with_spatial_of({B, c_out_, H}, f.shape(), 3));
    const auto banks = reshape(y, Shape{B, L_, y.size() / (B * L_)});
    return reshape(sum(banks, {1}), detail::with_spatial_of({B, c_out_, H}, f.shape(), 3));
  }

  std::vector<Param<T>> parameters() const override {
    std::vector<Param<T>> p{{"psi_o", psi_o_}, {"psi_t", psi_t_}};
    if (relaxed_) p.push_back({"w", w_});
    return p;
  }
  std::vector<Param<T>> state() const override { return {{"psi_o", psi_o_}, {"psi_t", psi_t_}, {"w", w_}}; }

  Tensor<T>& group_factor() { return psi_o_; }
  Tensor<T>& spatial_factor() { return psi_t_; }
  const Tensor<T>& group_factor() const { return psi_o_; }
  const Tensor<T>& spatial_factor() const { return psi_t_; }

 private:
  using Base::c_in_;
  using Base::c_out_;
  using Base::group_;
  using Base::L_;
  using Base::relaxed_;
  using Base::S_;
  using Base::w_;
  Tensor<T> psi_o_, psi_t_;
  std::shared_ptr<const std::vector<std::size_t>> mix_index_, stencil_index_, broadcast_index_;
};

/// Stride-2 transposed convolution applied to every group slice with the
/// slice's transformed kernel (no mixing along the group axis). Kernels
/// [L, Ci, Co, S...]; even S act about the half-cell centre so coarse and
/// fine grids share their centre.
template <typename T>
class GroupUpsampleLayer final : public GroupLayerBase<T> {
  using Base = GroupLayerBase<T>;

 public:
  GroupUpsampleLayer(GroupPtr G, std::size_t c_in, std::size_t c_out, std::size_t S, std::size_t L = 1,
                     bool relaxed = false)
      : Base(G, build_upsampling_action_cache(*G, S), c_in, c_out, S, L, relaxed) {
    psi_ = Tensor<T>(detail::kernel_shape({L, c_in, c_out}, S, G->dim()), T(0));
    psi_.set_requires_grad(true);
    perm_ = std::make_shared<const std::vector<std::vector<std::size_t>>>(this->cache_.pi);
  }

  const char* kind() const override { return relaxed_ ? "upconv_relaxed" : "upconv"; }

  void init(Rng& rng) override {
    this->reset_weights();
    detail::fill_uniform(psi_, rng, 1.0 / std::sqrt(static_cast<double>(c_in_ * this->volume())));
  }

  Tensor<T> forward(const Tensor<T>& f) const override {
    detail::check_feature_map(f.shape(), *group_, c_in_, kind());
    const std::size_t H = group_->order(), B = f.dim(0);
    // Slice-major channels so each slice is one convolution group.
    const auto by_slice = reshape(swap_axes(f, 1, 2), detail::with_spatial_of({B, H * c_in_}, f.shape(), 3));
    const auto K = relaxed_expand(psi_, w_, perm_, 1, c_in_ * c_out_, this->volume(),
                                  detail::kernel_shape({H * c_in_, c_out_}, S_, this->d()));
    const auto up = conv_transpose_nd(by_slice, K, H);
    Shape s{B, H, c_out_};
    for (std::size_t a = 2; a < up.rank(); ++a) s.push_back(up.dim(a));
    return swap_axes(reshape(up, s), 1, 2);
  }

  std::vector<Param<T>> parameters() const override {
    std::vector<Param<T>> p{{"psi", psi_}};
    if (relaxed_) p.push_back({"w", w_});
    return p;
  }
  std::vector<Param<T>> state() const override { return {{"psi", psi_}, {"w", w_}}; }

  Tensor<T>& kernels() { return psi_; }

 private:
  using Base::c_in_;
  using Base::c_out_;
  using Base::group_;
  using Base::relaxed_;
  using Base::S_;
  using Base::w_;
  Tensor<T> psi_;
  PermTable perm_;
};

}  // namespace rgc
