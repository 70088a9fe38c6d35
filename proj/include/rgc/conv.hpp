#pragma once

// Convolution primitives on 2D/3D grids.
//
// Layout: input [B, C, n0, n1(, n2)], kernel [C_out, C_in / groups, k0, k1(, k2)].
// Spatial axis a carries coordinate a. Convolution is cross-correlation,
//   out[b, co, p] = sum_{ci, t} in[b, ci, p + t - (k - 1) / 2] * kernel[co, ci, t],
// evaluated through im2col and a dense matrix product per group.
//
// Transposed convolution inverts a stride-2 circular convolution. Tap t of
// input position p lands on output position (2p + t - pad) mod 2n, with
// pad = (k - 1) / 2 for odd k (footprint centred on 2p) and pad = (k - 2) / 2
// for even k (footprint centred on 2p + 1/2). Even kernels keep a coarse cell
// and the two fine cells it covers sharing a centre.

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <vector>

#include "rgc/errors.hpp"
#include "rgc/tensor.hpp"

namespace rgc {

enum class Padding { circular, zero };

namespace detail {

constexpr std::size_t kMaxSpatial = 3;

struct Grid3 {
  std::size_t rank = 0;                         // 2 or 3 real spatial axes
  std::array<std::size_t, kMaxSpatial> n{1, 1, 1};  // padded with 1
  std::size_t volume() const { return n[0] * n[1] * n[2]; }
};

inline Grid3 spatial_part(const Shape& s, std::size_t lead, const char* op) {
  if (s.size() < lead + 2 || s.size() > lead + kMaxSpatial)
    throw ShapeError(std::string(op) + ": expected 2 or 3 spatial axes, got shape " + shape_str(s));
  Grid3 g;
  g.rank = s.size() - lead;
  for (std::size_t a = 0; a < g.rank; ++a) g.n[a] = s[lead + a];
  return g;
}

// For each axis, source index of (tap t, output position p); -1 marks zero padding.
struct TapTable {
  std::array<std::vector<std::ptrdiff_t>, kMaxSpatial> src;
  std::array<std::size_t, kMaxSpatial> k{1, 1, 1};
  std::size_t taps() const { return k[0] * k[1] * k[2]; }
};

inline TapTable conv_taps(const Grid3& g, const Grid3& kern, Padding pad) {
  TapTable tt;
  for (std::size_t a = 0; a < kMaxSpatial; ++a) {
    const std::size_t k = kern.n[a], n = g.n[a];
    tt.k[a] = k;
    const auto half = static_cast<std::ptrdiff_t>((k - 1) / 2);
    tt.src[a].resize(k * n);
    for (std::size_t t = 0; t < k; ++t)
      for (std::size_t p = 0; p < n; ++p) {
        std::ptrdiff_t s = static_cast<std::ptrdiff_t>(p + t) - half;
        const auto N = static_cast<std::ptrdiff_t>(n);
        if (pad == Padding::circular)
          s = ((s % N) + N) % N;
        else if (s < 0 || s >= N)
          s = -1;
        tt.src[a][t * n + p] = s;
      }
  }
  return tt;
}

// Rows (c, t0, t1, t2), columns output positions. Circular or zero padded.
template <typename T>
void im2col(const T* x, std::size_t channels, const Grid3& g, const TapTable& tt, T* col) {
  const std::size_t V = g.volume(), n1n2 = g.n[1] * g.n[2], n2 = g.n[2];
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* xc = x + c * V;
    for (std::size_t t0 = 0; t0 < tt.k[0]; ++t0)
      for (std::size_t t1 = 0; t1 < tt.k[1]; ++t1)
        for (std::size_t t2 = 0; t2 < tt.k[2]; ++t2, ++row) {
          T* r = col + row * V;
          const auto* s0 = tt.src[0].data() + t0 * g.n[0];
          const auto* s1 = tt.src[1].data() + t1 * g.n[1];
          const auto* s2 = tt.src[2].data() + t2 * g.n[2];
          for (std::size_t p0 = 0; p0 < g.n[0]; ++p0)
            for (std::size_t p1 = 0; p1 < g.n[1]; ++p1) {
              T* out = r + p0 * n1n2 + p1 * n2;
              if (s0[p0] < 0 || s1[p1] < 0) {
                for (std::size_t p2 = 0; p2 < n2; ++p2) out[p2] = T(0);
                continue;
              }
              const T* src = xc + static_cast<std::size_t>(s0[p0]) * n1n2 + static_cast<std::size_t>(s1[p1]) * n2;
              for (std::size_t p2 = 0; p2 < n2; ++p2) out[p2] = s2[p2] < 0 ? T(0) : src[s2[p2]];
            }
        }
  }
}

template <typename T>
void col2im_add(const T* col, std::size_t channels, const Grid3& g, const TapTable& tt, T* x) {
  const std::size_t V = g.volume(), n1n2 = g.n[1] * g.n[2], n2 = g.n[2];
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    T* xc = x + c * V;
    for (std::size_t t0 = 0; t0 < tt.k[0]; ++t0)
      for (std::size_t t1 = 0; t1 < tt.k[1]; ++t1)
        for (std::size_t t2 = 0; t2 < tt.k[2]; ++t2, ++row) {
          const T* r = col + row * V;
          const auto* s0 = tt.src[0].data() + t0 * g.n[0];
          const auto* s1 = tt.src[1].data() + t1 * g.n[1];
          const auto* s2 = tt.src[2].data() + t2 * g.n[2];
          for (std::size_t p0 = 0; p0 < g.n[0]; ++p0)
            for (std::size_t p1 = 0; p1 < g.n[1]; ++p1) {
              if (s0[p0] < 0 || s1[p1] < 0) continue;
              const T* in = r + p0 * n1n2 + p1 * n2;
              T* dst = xc + static_cast<std::size_t>(s0[p0]) * n1n2 + static_cast<std::size_t>(s1[p1]) * n2;
              for (std::size_t p2 = 0; p2 < n2; ++p2)
                if (s2[p2] >= 0) dst[s2[p2]] += in[p2];
            }
        }
  }
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

struct ConvPlan {
  std::size_t batch, c_in, c_out, groups, cin_g, cout_g;
  Grid3 grid, kern;
  TapTable taps;
  bool pointwise;
};

// Stride-2 transposed geometry: tap t of coarse position p -> fine position.
struct UpTable {
  std::array<std::vector<std::size_t>, kMaxSpatial> dst;
  std::array<std::size_t, kMaxSpatial> k{1, 1, 1};
  std::size_t taps() const { return k[0] * k[1] * k[2]; }
};

inline std::size_t upconv_pad(std::size_t k) { return k % 2 == 1 ? (k - 1) / 2 : (k - 2) / 2; }

inline UpTable up_taps(const Grid3& coarse, const Grid3& kern) {
  UpTable ut;
  for (std::size_t a = 0; a < kMaxSpatial; ++a) {
    const std::size_t k = kern.n[a], n = coarse.n[a];
    ut.k[a] = k;
    ut.dst[a].resize(k * n);
    const bool real = a < coarse.rank;
    const std::size_t fine = real ? 2 * n : n;
    const auto F = static_cast<std::ptrdiff_t>(fine);
    for (std::size_t t = 0; t < k; ++t)
      for (std::size_t p = 0; p < n; ++p) {
        std::ptrdiff_t q = real ? static_cast<std::ptrdiff_t>(2 * p + t) - static_cast<std::ptrdiff_t>(upconv_pad(k))
                                : static_cast<std::ptrdiff_t>(p);
        q = ((q % F) + F) % F;
        ut.dst[a][t * n + p] = static_cast<std::size_t>(q);
      }
  }
  return ut;
}

// col rows (c, t), columns coarse positions; scatter-add onto the fine grid.
template <typename T>
void upcol_scatter(const T* col, std::size_t channels, const Grid3& coarse, const Grid3& fine, const UpTable& ut,
                   T* out) {
  const std::size_t V = coarse.volume(), W = fine.volume();
  const std::size_t fn1n2 = fine.n[1] * fine.n[2], fn2 = fine.n[2];
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    T* oc = out + c * W;
    for (std::size_t t0 = 0; t0 < ut.k[0]; ++t0)
      for (std::size_t t1 = 0; t1 < ut.k[1]; ++t1)
        for (std::size_t t2 = 0; t2 < ut.k[2]; ++t2, ++row) {
          const T* r = col + row * V;
          const auto* d0 = ut.dst[0].data() + t0 * coarse.n[0];
          const auto* d1 = ut.dst[1].data() + t1 * coarse.n[1];
          const auto* d2 = ut.dst[2].data() + t2 * coarse.n[2];
          std::size_t p = 0;
          for (std::size_t p0 = 0; p0 < coarse.n[0]; ++p0)
            for (std::size_t p1 = 0; p1 < coarse.n[1]; ++p1) {
              T* dst = oc + d0[p0] * fn1n2 + d1[p1] * fn2;
              for (std::size_t p2 = 0; p2 < coarse.n[2]; ++p2, ++p) dst[d2[p2]] += r[p];
            }
        }
  }
}

template <typename T>
void upcol_gather(const T* fine_data, std::size_t channels, const Grid3& coarse, const Grid3& fine,
                  const UpTable& ut, T* col) {
  const std::size_t V = coarse.volume(), W = fine.volume();
  const std::size_t fn1n2 = fine.n[1] * fine.n[2], fn2 = fine.n[2];
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* fc = fine_data + c * W;
    for (std::size_t t0 = 0; t0 < ut.k[0]; ++t0)
      for (std::size_t t1 = 0; t1 < ut.k[1]; ++t1)
        for (std::size_t t2 = 0; t2 < ut.k[2]; ++t2, ++row) {
          T* r = col + row * V;
          const auto* d0 = ut.dst[0].data() + t0 * coarse.n[0];
          const auto* d1 = ut.dst[1].data() + t1 * coarse.n[1];
          const auto* d2 = ut.dst[2].data() + t2 * coarse.n[2];
          std::size_t p = 0;
          for (std::size_t p0 = 0; p0 < coarse.n[0]; ++p0)
            for (std::size_t p1 = 0; p1 < coarse.n[1]; ++p1) {
              const T* src = fc + d0[p0] * fn1n2 + d1[p1] * fn2;
              for (std::size_t p2 = 0; p2 < coarse.n[2]; ++p2, ++p) r[p] = src[d2[p2]];
            }
        }
  }
}

struct UpPlan {
  std::size_t batch, c_in, c_out, groups, cin_g, cout_g;
  Grid3 coarse, fine, kern;
  UpTable taps;
};

inline UpPlan make_up_plan(const Shape& xs, const Shape& ks, std::size_t groups, const char* op,
                           bool input_is_fine) {
  const Grid3 g = spatial_part(xs, 2, op);
  const Grid3 kern = spatial_part(ks, 2, op);
  if (g.rank != kern.rank) throw ShapeError(std::string(op) + ": kernel/input spatial rank mismatch");
  if (groups == 0 || ks[0] % groups != 0) throw ShapeError(std::string(op) + ": kernel rows not divisible by groups");
  UpPlan up;
  up.batch = xs[0];
  up.groups = groups;
  up.cin_g = ks[0] / groups;
  up.cout_g = ks[1];
  up.c_in = ks[0];
  up.c_out = groups * up.cout_g;
  up.kern = kern;
  if (input_is_fine) {
    up.fine = g;
    up.coarse = g;
    for (std::size_t a = 0; a < g.rank; ++a) {
      if (g.n[a] % 2 != 0) throw ShapeError(std::string(op) + ": fine grid must have even extents");
      up.coarse.n[a] = g.n[a] / 2;
    }
    if (xs[1] != up.c_out) throw ShapeError(std::string(op) + ": channel mismatch");
  } else {
    up.coarse = g;
    up.fine = g;
    for (std::size_t a = 0; a < g.rank; ++a) up.fine.n[a] = 2 * g.n[a];
    if (xs[1] != up.c_in)
      throw ShapeError(std::string(op) + ": input has " + std::to_string(xs[1]) + " channels, kernel expects " +
                       std::to_string(up.c_in));
  }
  up.taps = up_taps(up.coarse, kern);
  return up;
}

inline Shape with_spatial(std::size_t batch, std::size_t channels, const Grid3& g) {
  Shape s{batch, channels};
  for (std::size_t a = 0; a < g.rank; ++a) s.push_back(g.n[a]);
  return s;
}

}  // namespace detail

/// Grouped cross-correlation with stride 1. Same spatial size for both
/// paddings (circular wraps, zero uses a symmetric (k-1)/2 halo).
template <typename T>
Tensor<T> conv_nd(const Tensor<T>& input, const Tensor<T>& kernel, Padding padding = Padding::circular,
                  std::size_t groups = 1) {
  using namespace detail;
  const Grid3 g = spatial_part(input.shape(), 2, "conv_nd");
  const Grid3 kern = spatial_part(kernel.shape(), 2, "conv_nd");
  if (g.rank != kern.rank) throw ShapeError("conv_nd: kernel " + shape_str(kernel.shape()) + " vs input " + shape_str(input.shape()));
  for (std::size_t a = 0; a < g.rank; ++a) {
    if (kern.n[a] % 2 == 0) throw ConfigError("conv_nd: kernel extents must be odd");
    if (kern.n[a] > g.n[a]) throw ShapeError("conv_nd: kernel larger than input");
  }
  ConvPlan pl;
  pl.batch = input.dim(0);
  pl.c_in = input.dim(1);
  pl.c_out = kernel.dim(0);
  pl.groups = groups;
  if (groups == 0 || pl.c_out % groups != 0 || kernel.dim(1) * groups != pl.c_in)
    throw ShapeError("conv_nd: channel mismatch, input " + shape_str(input.shape()) + " kernel " +
                     shape_str(kernel.shape()) + " groups " + std::to_string(groups));
  pl.cin_g = kernel.dim(1);
  pl.cout_g = pl.c_out / groups;
  pl.grid = g;
  pl.kern = kern;
  pl.taps = conv_taps(g, kern, padding);
  pl.pointwise = pl.taps.taps() == 1;

  const std::size_t V = g.volume(), K = pl.taps.taps(), rows = pl.cin_g * K;
  std::vector<T> out(pl.batch * pl.c_out * V);
  std::vector<T> col(pl.pointwise ? 0 : rows * V);
  for (std::size_t b = 0; b < pl.batch; ++b)
    for (std::size_t gr = 0; gr < groups; ++gr) {
      const T* x = input.data() + (b * pl.c_in + gr * pl.cin_g) * V;
      const T* colp = x;
      if (!pl.pointwise) {
        im2col(x, pl.cin_g, g, pl.taps, col.data());
        colp = col.data();
      }
      CMapMat<T> C(colp, rows, V);
      CMapMat<T> Kg(kernel.data() + gr * pl.cout_g * rows, pl.cout_g, rows);
      MapMat<T> O(out.data() + (b * pl.c_out + gr * pl.cout_g) * V, pl.cout_g, V);
      O.noalias() = Kg * C;
    }

  auto* X = input.impl().get();
  auto* W = kernel.impl().get();
  return make_result<T>("conv_nd", with_spatial(pl.batch, pl.c_out, g), std::move(out), {input.impl(), kernel.impl()},
                        [X, W, pl](std::span<const T> gout) {
                          const std::size_t V = pl.grid.volume(), K = pl.taps.taps(), rows = pl.cin_g * K;
                          std::vector<T> col(pl.pointwise ? 0 : rows * V);
                          std::vector<T> dcol(pl.pointwise ? 0 : rows * V);
                          T* gx = X->requires_grad ? X->grad_buffer() : nullptr;
                          T* gw = W->requires_grad ? W->grad_buffer() : nullptr;
                          for (std::size_t b = 0; b < pl.batch; ++b)
                            for (std::size_t gr = 0; gr < pl.groups; ++gr) {
                              const std::size_t xoff = (b * pl.c_in + gr * pl.cin_g) * V;
                              CMapMat<T> G(gout.data() + (b * pl.c_out + gr * pl.cout_g) * V, pl.cout_g, V);
                              CMapMat<T> Kg(W->values.data() + gr * pl.cout_g * rows, pl.cout_g, rows);
                              if (gw) {
                                const T* colp = X->values.data() + xoff;
                                if (!pl.pointwise) {
                                  im2col(colp, pl.cin_g, pl.grid, pl.taps, col.data());
                                  colp = col.data();
                                }
                                MapMat<T> GW(gw + gr * pl.cout_g * rows, pl.cout_g, rows);
                                GW.noalias() += G * CMapMat<T>(colp, rows, V).transpose();
                              }
                              if (gx) {
                                if (pl.pointwise) {
                                  MapMat<T> GX(gx + xoff, rows, V);
                                  GX.noalias() += Kg.transpose() * G;
                                } else {
                                  MapMat<T> DC(dcol.data(), rows, V);
                                  DC.noalias() = Kg.transpose() * G;
                                  col2im_add(dcol.data(), pl.cin_g, pl.grid, pl.taps, gx + xoff);
                                }
                              }
                            }
                        });
}

/// Stride-2 circular transposed convolution; kernel [C_in, C_out / groups, k...].
/// Output spatial extents are exactly twice the input's.
template <typename T>
Tensor<T> conv_transpose_nd(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t groups = 1) {
  using namespace detail;
  const UpPlan up = make_up_plan(input.shape(), kernel.shape(), groups, "conv_transpose_nd", false);
  const std::size_t V = up.coarse.volume(), Wf = up.fine.volume(), K = up.taps.taps();
  const std::size_t rows = up.cout_g * K;
  std::vector<T> out(up.batch * up.c_out * Wf, T(0));
  std::vector<T> col(rows * V);
  for (std::size_t b = 0; b < up.batch; ++b)
    for (std::size_t gr = 0; gr < groups; ++gr) {
      CMapMat<T> Xg(input.data() + (b * up.c_in + gr * up.cin_g) * V, up.cin_g, V);
      CMapMat<T> Kg(kernel.data() + gr * up.cin_g * rows, up.cin_g, rows);
      MapMat<T> C(col.data(), rows, V);
      C.noalias() = Kg.transpose() * Xg;
      upcol_scatter(col.data(), up.cout_g, up.coarse, up.fine, up.taps,
                    out.data() + (b * up.c_out + gr * up.cout_g) * Wf);
    }
  auto* X = input.impl().get();
  auto* W = kernel.impl().get();
  return make_result<T>("conv_transpose_nd", with_spatial(up.batch, up.c_out, up.fine), std::move(out),
                        {input.impl(), kernel.impl()}, [X, W, up](std::span<const T> gout) {
                          const std::size_t V = up.coarse.volume(), Wf = up.fine.volume();
                          const std::size_t rows = up.cout_g * up.taps.taps();
                          std::vector<T> dcol(rows * V);
                          T* gx = X->requires_grad ? X->grad_buffer() : nullptr;
                          T* gw = W->requires_grad ? W->grad_buffer() : nullptr;
                          for (std::size_t b = 0; b < up.batch; ++b)
                            for (std::size_t gr = 0; gr < up.groups; ++gr) {
                              upcol_gather(gout.data() + (b * up.c_out + gr * up.cout_g) * Wf, up.cout_g, up.coarse,
                                           up.fine, up.taps, dcol.data());
                              CMapMat<T> DC(dcol.data(), rows, V);
                              const std::size_t xoff = (b * up.c_in + gr * up.cin_g) * V;
                              if (gx) {
                                MapMat<T> GX(gx + xoff, up.cin_g, V);
                                GX.noalias() += CMapMat<T>(W->values.data() + gr * up.cin_g * rows, up.cin_g, rows) * DC;
                              }
                              if (gw) {
                                MapMat<T> GW(gw + gr * up.cin_g * rows, up.cin_g, rows);
                                GW.noalias() += CMapMat<T>(X->values.data() + xoff, up.cin_g, V) * DC.transpose();
                              }
                            }
                        });
}

/// Stride-2 circular convolution, the exact adjoint of conv_transpose_nd
/// for the same kernel: <conv_transpose(x), y> = <x, conv_stride2(y)>.
/// Forward only.
template <typename T>
Tensor<T> conv_stride2_nd(const Tensor<T>& fine, const Tensor<T>& kernel, std::size_t groups = 1) {
  using namespace detail;
  const UpPlan up = make_up_plan(fine.shape(), kernel.shape(), groups, "conv_stride2_nd", true);
  const std::size_t V = up.coarse.volume(), Wf = up.fine.volume();
  const std::size_t rows = up.cout_g * up.taps.taps();
  std::vector<T> out(up.batch * up.c_in * V);
  std::vector<T> col(rows * V);
  for (std::size_t b = 0; b < up.batch; ++b)
    for (std::size_t gr = 0; gr < groups; ++gr) {
      upcol_gather(fine.data() + (b * up.c_out + gr * up.cout_g) * Wf, up.cout_g, up.coarse, up.fine, up.taps,
                   col.data());
      MapMat<T> O(out.data() + (b * up.c_in + gr * up.cin_g) * V, up.cin_g, V);
      O.noalias() = CMapMat<T>(kernel.data() + gr * up.cin_g * rows, up.cin_g, rows) * CMapMat<T>(col.data(), rows, V);
    }
  return Tensor<T>(with_spatial(up.batch, up.c_in, up.coarse), std::move(out));
}

// ---------------------------------------------------------------------------
// Separable linear resampling.

/// Applies the row-major matrix M [m x n] along one axis: the axis of length n
/// becomes length m. Differentiable in x.
template <typename T>
Tensor<T> linear_map_axis(const Tensor<T>& x, std::size_t axis, std::shared_ptr<const std::vector<T>> M,
                          std::size_t m) {
  if (axis >= x.rank()) throw ShapeError("linear_map_axis: axis out of range");
  const std::size_t n = x.dim(axis);
  if (M->size() != m * n) throw ShapeError("linear_map_axis: matrix size mismatch");
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= x.dim(a);
  for (std::size_t a = axis + 1; a < x.rank(); ++a) inner *= x.dim(a);
  Shape out_shape = x.shape();
  out_shape[axis] = m;
  std::vector<T> out(outer * m * inner, T(0));
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const T c = (*M)[i * n + j];
        if (c == T(0)) continue;
        const T* src = x.data() + (o * n + j) * inner;
        T* dst = out.data() + (o * m + i) * inner;
        for (std::size_t k = 0; k < inner; ++k) dst[k] += c * src[k];
      }
  auto* X = x.impl().get();
  return detail::make_result<T>("linear_map_axis", std::move(out_shape), std::move(out), {x.impl()},
                                [X, M, outer, inner, n, m](std::span<const T> g) {
                                  T* gx = X->grad_buffer();
                                  for (std::size_t o = 0; o < outer; ++o)
                                    for (std::size_t i = 0; i < m; ++i)
                                      for (std::size_t j = 0; j < n; ++j) {
                                        const T c = (*M)[i * n + j];
                                        if (c == T(0)) continue;
                                        const T* src = g.data() + (o * m + i) * inner;
                                        T* dst = gx + (o * n + j) * inner;
                                        for (std::size_t k = 0; k < inner; ++k) dst[k] += c * src[k];
                                      }
                                });
}

/// Corner-aligned linear interpolation weights from n samples to m samples.
template <typename T>
std::vector<T> corner_aligned_interp(std::size_t n, std::size_t m) {
  std::vector<T> M(m * n, T(0));
  for (std::size_t j = 0; j < m; ++j) {
    if (n == 1 || m == 1) {
      M[j * n] = T(1);
      continue;
    }
    const double s = static_cast<double>(j) * static_cast<double>(n - 1) / static_cast<double>(m - 1);
    std::size_t i0 = static_cast<std::size_t>(s);
    if (i0 >= n - 1) i0 = n - 2;
    const double f = s - static_cast<double>(i0);
    M[j * n + i0] += static_cast<T>(1.0 - f);
    M[j * n + i0 + 1] += static_cast<T>(f);
  }
  return M;
}

/// Trilinear (bilinear for 2D) upsampling of [B, C, spatial...] with aligned
/// corners. factor must be 2 or 4.
template <typename T>
Tensor<T> upsample_trilinear(const Tensor<T>& x, std::size_t factor) {
  if (factor != 2 && factor != 4) throw ConfigError("upsample_trilinear: factor must be 2 or 4");
  const auto g = detail::spatial_part(x.shape(), 2, "upsample_trilinear");
  Tensor<T> cur = x;
  for (std::size_t a = 0; a < g.rank; ++a) {
    const std::size_t n = g.n[a];
    auto M = std::make_shared<const std::vector<T>>(corner_aligned_interp<T>(n, n * factor));
    cur = linear_map_axis(cur, 2 + a, M, n * factor);
  }
  return cur;
}

}  // namespace rgc
