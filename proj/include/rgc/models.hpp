#pragma once

// Networks built from the layers: the 3-layer discovery net and the
// super-resolution net with its plain-convolution baseline.

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rgc/conv.hpp"
#include "rgc/gconv.hpp"
#include "rgc/grid_transform.hpp"
#include "rgc/io.hpp"
#include "rgc/symmetry_probe.hpp"
#include "rgc/tensor.hpp"

namespace rgc {

/// Anything trainable: forward map plus named parameter tensors.
template <typename T>
class Model {
 public:
  virtual ~Model() = default;
  virtual Tensor<T> forward(const Tensor<T>& x) const = 0;
  virtual std::vector<Param<T>> parameters() const = 0;
  /// Everything saved in a checkpoint, frozen tensors included.
  virtual std::vector<Param<T>> state() const = 0;
  virtual std::vector<LayerWeights<T>> relaxed_weights() const { return {}; }
  virtual void init(Rng& rng) = 0;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.size();
    return n;
  }
  std::vector<Tensor<T>> parameter_tensors() const {
    std::vector<Tensor<T>> out;
    for (const auto& p : parameters()) out.push_back(p.tensor);
    return out;
  }
};

namespace detail {

template <typename T>
void append_prefixed(std::vector<Param<T>>& out, const std::string& prefix, const std::vector<Param<T>>& ps) {
  for (const auto& p : ps) out.push_back({prefix + "." + p.name, p.tensor});
}

// Signed channel permutation of each vector triplet (pair in 2D), one per
// group element: row c of element h reads channel src[h][c] with sign sgn[h][c].
struct VectorAction {
  std::size_t H = 0, channels = 0;
  std::vector<std::vector<std::size_t>> src;
  std::vector<std::vector<int>> sgn;
};

inline VectorAction vector_action(const FiniteGroup& G, std::size_t channels) {
  const std::size_t d = static_cast<std::size_t>(G.dim());
  if (channels % d) throw ConfigError("vector channels must be a multiple of the spatial dimension");
  VectorAction a;
  a.H = G.order();
  a.channels = channels;
  a.src.assign(a.H, std::vector<std::size_t>(channels));
  a.sgn.assign(a.H, std::vector<int>(channels));
  for (std::size_t h = 0; h < a.H; ++h) {
    const Mat3& M = G.matrix(h);
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = c - c % d, row = c % d;
      for (std::size_t col = 0; col < d; ++col)
        if (M[row][col] != 0) {
          a.src[h][c] = base + col;
          a.sgn[h][c] = M[row][col];
        }
    }
  }
  return a;
}

// x viewed as [A, H, C, V]: out[a, h, c, v] = sgn[h][c] * x[a, h, src[h][c], v].
template <typename T>
Tensor<T> slice_signed_permute(const Tensor<T>& x, std::shared_ptr<const VectorAction> act) {
  const std::size_t H = act->H, C = act->channels;
  const std::size_t inner = x.size() / (x.dim(0) * H * C);
  const std::size_t A = x.dim(0);
  std::vector<T> out(x.size());
  const auto& xv = x.values();
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t c = 0; c < C; ++c) {
        const T s = static_cast<T>(act->sgn[h][c]);
        const T* in = xv.data() + ((a * H + h) * C + act->src[h][c]) * inner;
        T* o = out.data() + ((a * H + h) * C + c) * inner;
        for (std::size_t v = 0; v < inner; ++v) o[v] = s * in[v];
      }
  auto* X = x.impl().get();
  return make_result<T>("slice_signed_permute", x.shape(), std::move(out), {x.impl()},
                        [X, act, A, H, C, inner](std::span<const T> g) {
                          T* gx = X->grad_buffer();
                          for (std::size_t a = 0; a < A; ++a)
                            for (std::size_t h = 0; h < H; ++h)
                              for (std::size_t c = 0; c < C; ++c) {
                                const T s = static_cast<T>(act->sgn[h][c]);
                                const T* go = g.data() + ((a * H + h) * C + c) * inner;
                                T* gi = gx + ((a * H + h) * C + act->src[h][c]) * inner;
                                for (std::size_t v = 0; v < inner; ++v) gi[v] += s * go[v];
                              }
                        });
}

// y [B, C, H, V...] -> out[b, c, V...] = (1/H) sum_h sgn[h][c] * y[b, src[h][c], h, V...].
template <typename T>
Tensor<T> vector_group_pool(const Tensor<T>& y, std::shared_ptr<const VectorAction> act) {
  const std::size_t B = y.dim(0), C = act->channels, H = act->H;
  if (y.rank() < 3 || y.dim(1) != C || y.dim(2) != H) throw ShapeError("vector_group_pool: bad input " + shape_str(y.shape()));
  const std::size_t inner = y.size() / (B * C * H);
  Shape s{B, C};
  for (std::size_t a = 3; a < y.rank(); ++a) s.push_back(y.dim(a));
  std::vector<T> out(B * C * inner, T(0));
  const T inv = T(1) / static_cast<T>(H);
  const auto& yv = y.values();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      T* o = out.data() + (b * C + c) * inner;
      for (std::size_t h = 0; h < H; ++h) {
        const T sc = inv * static_cast<T>(act->sgn[h][c]);
        const T* in = yv.data() + ((b * C + act->src[h][c]) * H + h) * inner;
        for (std::size_t v = 0; v < inner; ++v) o[v] += sc * in[v];
      }
    }
  auto* Y = y.impl().get();
  return make_result<T>("vector_group_pool", std::move(s), std::move(out), {y.impl()},
                        [Y, act, B, C, H, inner, inv](std::span<const T> g) {
                          T* gy = Y->grad_buffer();
                          for (std::size_t b = 0; b < B; ++b)
                            for (std::size_t c = 0; c < C; ++c) {
                              const T* go = g.data() + (b * C + c) * inner;
                              for (std::size_t h = 0; h < H; ++h) {
                                const T sc = inv * static_cast<T>(act->sgn[h][c]);
                                T* gi = gy + ((b * C + act->src[h][c]) * H + h) * inner;
                                for (std::size_t v = 0; v < inner; ++v) gi[v] += sc * go[v];
                              }
                            }
                        });
}

template <typename T>
Tensor<T> zero_param(Shape s) {
  Tensor<T> t(std::move(s), T(0));
  t.set_requires_grad(true);
  return t;
}

}  // namespace detail

/// Transforms a field whose channels are stacked vectors: the grid moves as
/// a scalar field and every channel triplet is rotated by the element's matrix.
template <typename T>
Tensor<T> transform_vector_grid(const FiniteGroup& G, std::size_t g, const Tensor<T>& x, std::size_t channel_axis) {
  const auto moved = transform_grid(G, g, x);
  const std::size_t C = x.dim(channel_axis);
  const auto act = detail::vector_action(G, C);
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < channel_axis; ++a) outer *= x.dim(a);
  for (std::size_t a = channel_axis + 1; a < x.rank(); ++a) inner *= x.dim(a);
  Tensor<T> out(x.shape());
  auto ov = out.mutable_values();
  const auto& mv = moved.values();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t c = 0; c < C; ++c) {
      const T s = static_cast<T>(act.sgn[g][c]);
      for (std::size_t i = 0; i < inner; ++i) ov[(o * C + c) * inner + i] = s * mv[(o * C + act.src[g][c]) * inner + i];
    }
  return out;
}

// ---------------------------------------------------------------------------
// Discovery network

struct DiscoveryConfig {
  std::string group = "C4";
  std::size_t in_channels = 1;
  std::size_t hidden = 8;
  std::size_t out_channels = 1;
  std::size_t kernel_size = 3;
  std::size_t banks = 1;
};

/// Relaxed lifting -> relaxed gconv -> relaxed gconv -> group pool, with
/// relu and a per-channel bias after the first two layers.
template <typename T>
class DiscoveryNet final : public Model<T> {
 public:
  explicit DiscoveryNet(DiscoveryConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.kernel_size % 2 == 0 || cfg_.kernel_size == 0) throw ConfigError("kernel size must be odd");
    const auto G = make_group(cfg_.group);
    lift_ = std::make_unique<LiftingLayer<T>>(G, cfg_.in_channels, cfg_.hidden, cfg_.kernel_size, cfg_.banks, true);
    mid_ = std::make_unique<RelaxedGConvLayer<T>>(G, cfg_.hidden, cfg_.hidden, cfg_.kernel_size, cfg_.banks, true);
    out_ = std::make_unique<RelaxedGConvLayer<T>>(G, cfg_.hidden, cfg_.out_channels, cfg_.kernel_size, cfg_.banks, true);
    b1_ = detail::zero_param<T>({cfg_.hidden});
    b2_ = detail::zero_param<T>({cfg_.hidden});
  }

  const DiscoveryConfig& config() const { return cfg_; }
  const FiniteGroup& group() const { return lift_->group(); }

  void init(Rng& rng) override {
    lift_->init(rng);
    mid_->init(rng);
    out_->init(rng);
    for (auto* b : {&b1_, &b2_})
      for (auto& v : b->mutable_values()) v = T(0);
  }

  Tensor<T> forward(const Tensor<T>& x) const override {
    auto f = relu(add_channel_bias(lift_->forward(x), b1_));
    f = relu(add_channel_bias(mid_->forward(f), b2_));
    return group_pool(out_->forward(f));
  }

  std::vector<Param<T>> parameters() const override {
    std::vector<Param<T>> p;
    detail::append_prefixed(p, "lift", lift_->parameters());
    detail::append_prefixed(p, "gconv1", mid_->parameters());
    detail::append_prefixed(p, "gconv2", out_->parameters());
    p.push_back({"bias1", b1_});
    p.push_back({"bias2", b2_});
    return p;
  }

  std::vector<Param<T>> state() const override {
    std::vector<Param<T>> p;
    detail::append_prefixed(p, "lift", lift_->state());
    detail::append_prefixed(p, "gconv1", mid_->state());
    detail::append_prefixed(p, "gconv2", out_->state());
    p.push_back({"bias1", b1_});
    p.push_back({"bias2", b2_});
    return p;
  }

  std::vector<LayerWeights<T>> relaxed_weights() const override {
    const std::string label = group().label();
    return {{"lift", label, lift_->relaxed_weights()},
            {"gconv1", label, mid_->relaxed_weights()},
            {"gconv2", label, out_->relaxed_weights()}};
  }

  LiftingLayer<T>& lift() { return *lift_; }
  RelaxedGConvLayer<T>& gconv1() { return *mid_; }
  RelaxedGConvLayer<T>& gconv2() { return *out_; }

 private:
  DiscoveryConfig cfg_;
  std::unique_ptr<LiftingLayer<T>> lift_;
  std::unique_ptr<RelaxedGConvLayer<T>> mid_, out_;
  Tensor<T> b1_, b2_;
};

// ---------------------------------------------------------------------------
// Super-resolution network

enum class LayerKind { conv, equiv, relaxed };

inline LayerKind parse_layer_kind(const std::string& s) {
  if (s == "conv") return LayerKind::conv;
  if (s == "equiv") return LayerKind::equiv;
  if (s == "relaxed" || s == "relaxed_equiv") return LayerKind::relaxed;
  throw ConfigError("unknown layer kind '" + s + "' (expected conv, equiv or relaxed)");
}

inline std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::equiv: return "equiv";
    default: return "relaxed";
  }
}

struct SuperResConfig {
  LayerKind kind = LayerKind::relaxed;
  std::string group = "octahedral_24";
  std::size_t in_channels = 9;   // three stacked 3-vectors
  std::size_t out_channels = 3;  // one 3-vector
  std::size_t channels = 8;
  std::size_t up_channels1 = 4;
  std::size_t up_channels2 = 2;
  std::size_t blocks = 4;
  std::size_t kernel_size = 3;
  std::size_t up_kernel_size = 4;
  std::size_t banks = 1;
  bool separable = true;
  bool relax_lift = true;
};

/// input layer -> residual blocks -> two x2 transposed-convolution stages,
/// the second one linear -> (group pool) -> 3-channel output, plus a
/// trilinear skip from the last input step. Group kinds treat channels as stacked vectors, so the whole
/// map commutes with rotating the velocity field.
template <typename T>
class SuperResNet final : public Model<T> {
 public:
  explicit SuperResNet(SuperResConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.blocks == 0) throw ConfigError("super-resolution net needs at least one residual block");
    if (cfg_.kernel_size % 2 == 0) throw ConfigError("kernel size must be odd");
    if (cfg_.in_channels < cfg_.out_channels) throw ConfigError("input must contain the output step");
    const std::size_t S = cfg_.kernel_size, U = cfg_.up_kernel_size, C = cfg_.channels;
    if (cfg_.kind == LayerKind::conv) {
      conv_w_.push_back(detail::zero_param<T>(detail::kernel_shape({C, cfg_.in_channels}, S, 3)));
      for (std::size_t b = 0; b < 2 * cfg_.blocks; ++b) conv_w_.push_back(detail::zero_param<T>(detail::kernel_shape({C, C}, S, 3)));
      up_w_.push_back(detail::zero_param<T>(detail::kernel_shape({C, cfg_.up_channels1}, U, 3)));
      up_w_.push_back(detail::zero_param<T>(detail::kernel_shape({cfg_.up_channels1, cfg_.up_channels2}, U, 3)));
    } else {
      G_ = make_group(cfg_.group);
      if (G_->dim() != 3) throw ConfigError("super-resolution needs a 3D group");
      const bool rel = cfg_.kind == LayerKind::relaxed;
      const std::size_t L = rel ? cfg_.banks : 1;
      lift_ = std::make_unique<LiftingLayer<T>>(G_, cfg_.in_channels, C, S, rel && cfg_.relax_lift ? L : 1,
                                                rel && cfg_.relax_lift);
      for (std::size_t b = 0; b < 2 * cfg_.blocks; ++b) {
        if (cfg_.separable)
          blocks_.push_back(std::make_unique<SeparableRelaxedGConvLayer<T>>(G_, C, C, S, L, rel));
        else
          blocks_.push_back(std::make_unique<RelaxedGConvLayer<T>>(G_, C, C, S, L, rel));
      }
      ups_.push_back(std::make_unique<GroupUpsampleLayer<T>>(G_, C, cfg_.up_channels1, U, L, rel));
      ups_.push_back(std::make_unique<GroupUpsampleLayer<T>>(G_, cfg_.up_channels1, cfg_.up_channels2, U, L, rel));
      in_act_ = std::make_shared<const detail::VectorAction>(detail::vector_action(*G_, cfg_.in_channels));
      out_act_ = std::make_shared<const detail::VectorAction>(detail::vector_action(*G_, cfg_.out_channels));
    }
    biases_.push_back(detail::zero_param<T>({C}));
    for (std::size_t b = 0; b < 2 * cfg_.blocks; ++b) biases_.push_back(detail::zero_param<T>({C}));
    biases_.push_back(detail::zero_param<T>({cfg_.up_channels1}));
    biases_.push_back(detail::zero_param<T>({cfg_.up_channels2}));
    head_ = detail::zero_param<T>(Shape{cfg_.out_channels, cfg_.up_channels2, 1});
  }

  const SuperResConfig& config() const { return cfg_; }
  bool is_group() const { return cfg_.kind != LayerKind::conv; }
  const FiniteGroup* group() const { return G_.get(); }

  void init(Rng& rng) override {
    if (!is_group()) {
      for (auto& w : conv_w_) detail::fill_uniform(w, rng, 1.0 / std::sqrt(static_cast<double>(w.size() / w.dim(0))));
      for (auto& w : up_w_) detail::fill_uniform(w, rng, 1.0 / std::sqrt(static_cast<double>(w.size() / w.dim(1))));
    } else {
      lift_->init(rng);
      for (auto& l : blocks_) l->init(rng);
      for (auto& l : ups_) l->init(rng);
    }
    for (auto& b : biases_)
      for (auto& v : b.mutable_values()) v = T(0);
    // Output head starts at zero so the initial prediction is the trilinear skip.
    for (auto& v : head_.mutable_values()) v = T(0);
  }

  Tensor<T> forward(const Tensor<T>& x) const override {
    if (x.rank() != 5 || x.dim(1) != cfg_.in_channels)
      throw ShapeError("superres: expected [B, " + std::to_string(cfg_.in_channels) + ", n, n, n], got " + shape_str(x.shape()));
    const std::size_t B = x.dim(0), n = x.dim(2), C_out = cfg_.out_channels;
    // Skip connection: trilinear upsampling of the most recent step.
    std::vector<std::size_t> last;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = cfg_.in_channels - C_out; c < cfg_.in_channels; ++c)
        for (std::size_t v = 0; v < n * n * n; ++v) last.push_back((b * cfg_.in_channels + c) * n * n * n + v);
    const auto recent = gather(x, std::make_shared<const std::vector<std::size_t>>(std::move(last)), Shape{B, C_out, n, n, n});
    const auto skip = upsample_trilinear(recent, 4);

    Tensor<T> y;
    if (!is_group()) {
      auto f = relu(add_channel_bias(conv_nd(x, conv_w_[0]), biases_[0]));
      for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        auto h = relu(add_channel_bias(conv_nd(f, conv_w_[1 + 2 * b]), biases_[1 + 2 * b]));
        h = add_channel_bias(conv_nd(h, conv_w_[2 + 2 * b]), biases_[2 + 2 * b]);
        f = relu(add(f, h));
      }
      f = relu(add_channel_bias(conv_transpose_nd(f, up_w_[0]), biases_[2 * cfg_.blocks + 1]));
      f = add_channel_bias(conv_transpose_nd(f, up_w_[1]), biases_[2 * cfg_.blocks + 2]);
      y = conv_nd(f, head_kernel());
    } else {
      auto f = relu(add_channel_bias(lift_vector(x), biases_[0]));
      for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        auto h = relu(add_channel_bias(blocks_[2 * b]->forward(f), biases_[1 + 2 * b]));
        h = add_channel_bias(blocks_[2 * b + 1]->forward(h), biases_[2 + 2 * b]);
        f = relu(add(f, h));
      }
      f = relu(add_channel_bias(ups_[0]->forward(f), biases_[2 * cfg_.blocks + 1]));
      f = add_channel_bias(ups_[1]->forward(f), biases_[2 * cfg_.blocks + 2]);
      // Pointwise head on every slice, then vector-valued pooling.
      const std::size_t H = G_->order(), N = f.dim(3);
      const auto flat = reshape(f, Shape{B, cfg_.up_channels2, H * N, N, N});
      const auto z = reshape(conv_nd(flat, head_kernel()), Shape{B, C_out, H, N, N, N});
      y = detail::vector_group_pool(z, out_act_);
    }
    return add(y, skip);
  }

  std::vector<Param<T>> parameters() const override { return collect(false); }
  std::vector<Param<T>> state() const override { return collect(true); }

  std::vector<LayerWeights<T>> relaxed_weights() const override {
    std::vector<LayerWeights<T>> out;
    if (!is_group() || cfg_.kind != LayerKind::relaxed) return out;
    const std::string label = G_->label();
    if (lift_->relaxed()) out.push_back({"lift", label, lift_->relaxed_weights()});
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      out.push_back({"block" + std::to_string(i / 2) + "." + std::to_string(i % 2), label, blocks_[i]->relaxed_weights()});
    for (std::size_t i = 0; i < ups_.size(); ++i) out.push_back({"up" + std::to_string(i), label, ups_[i]->relaxed_weights()});
    return out;
  }

 private:
  Tensor<T> head_kernel() const { return reshape(head_, Shape{cfg_.out_channels, cfg_.up_channels2, 1, 1, 1}); }

  // Lifting with vector-typed input: slice h sees its kernel with the input
  // channels rotated by h, K_h[c] = sum_c' rho(h)[c, c'] (h.K)[c'].
  Tensor<T> lift_vector(const Tensor<T>& x) const {
    const std::size_t H = G_->order(), C = cfg_.channels, Ci = cfg_.in_channels, S = cfg_.kernel_size;
    const auto K = lift_->effective_kernel();  // [C*H, Ci, S, S, S]
    const auto Kr = detail::slice_signed_permute(reshape(K, Shape{C, H, Ci, S * S * S}), in_act_);
    const auto y = conv_nd(x, reshape(Kr, K.shape()), Padding::circular);
    Shape s{x.dim(0), C, H};
    for (std::size_t a = 2; a < x.rank(); ++a) s.push_back(x.dim(a));
    return reshape(y, s);
  }

  std::vector<Param<T>> collect(bool all) const {
    std::vector<Param<T>> p;
    if (!is_group()) {
      for (std::size_t i = 0; i < conv_w_.size(); ++i) p.push_back({"conv" + std::to_string(i), conv_w_[i]});
      for (std::size_t i = 0; i < up_w_.size(); ++i) p.push_back({"up" + std::to_string(i) + ".psi", up_w_[i]});
    } else {
      detail::append_prefixed(p, "lift", all ? lift_->state() : lift_->parameters());
      for (std::size_t i = 0; i < blocks_.size(); ++i)
        detail::append_prefixed(p, "block" + std::to_string(i / 2) + "." + std::to_string(i % 2),
                                all ? blocks_[i]->state() : blocks_[i]->parameters());
      for (std::size_t i = 0; i < ups_.size(); ++i)
        detail::append_prefixed(p, "up" + std::to_string(i), all ? ups_[i]->state() : ups_[i]->parameters());
    }
    for (std::size_t i = 0; i < biases_.size(); ++i) p.push_back({"bias" + std::to_string(i), biases_[i]});
    p.push_back({"head", head_});
    return p;
  }

  SuperResConfig cfg_;
  GroupPtr G_;
  std::vector<Tensor<T>> conv_w_, up_w_;
  std::unique_ptr<LiftingLayer<T>> lift_;
  std::vector<std::unique_ptr<GroupLayerBase<T>>> blocks_, ups_;
  std::vector<Tensor<T>> biases_;
  Tensor<T> head_;
  std::shared_ptr<const detail::VectorAction> in_act_, out_act_;
};

/// Parameter count of a freshly built net.
inline std::size_t count_parameters(const SuperResConfig& cfg) { return SuperResNet<double>(cfg).parameter_count(); }

/// Plain-convolution config whose width gives the parameter count closest
/// to `target`, with upsampling widths scaled alongside.
inline SuperResConfig matched_conv_config(SuperResConfig base, std::size_t target) {
  base.kind = LayerKind::conv;
  SuperResConfig best = base;
  std::size_t best_gap = static_cast<std::size_t>(-1);
  for (std::size_t c = 1; c <= 256; ++c) {
    SuperResConfig t = base;
    t.channels = c;
    const auto n = count_parameters(t);
    const std::size_t gap = n > target ? n - target : target - n;
    if (gap < best_gap) {
      best_gap = gap;
      best = t;
    }
    if (n > target) break;
  }
  return best;
}

/// Copies checkpoint tensors into the model's state by name. The checkpoint
/// must hold exactly the model's tensors.
template <typename T>
void load_state(Model<T>& m, const std::vector<NamedTensor>& items) {
  auto st = m.state();
  if (items.size() != st.size())
    throw DataError("checkpoint holds " + std::to_string(items.size()) + " tensors, model expects " +
                    std::to_string(st.size()));
  for (auto& p : st) {
    const auto src = find_tensor(items, p.name).as_double();
    if (src.shape() != p.tensor.shape())
      throw DataError("checkpoint tensor '" + p.name + "' has shape " + shape_str(src.shape()) + ", model expects " +
                      shape_str(p.tensor.shape()));
    auto dst = p.tensor.mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src[i]);
  }
}

template <typename T>
std::vector<NamedTensor> save_state(const Model<T>& m) {
  std::vector<NamedTensor> out;
  for (const auto& p : m.state()) out.push_back({p.name, p.tensor});
  return out;
}

}  // namespace rgc
