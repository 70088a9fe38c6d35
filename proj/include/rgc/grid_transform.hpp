#pragma once

// Group actions on sampled grids, about the grid centre (N - 1) / 2.
//   scalar grid:   (g.x)[p]    = x[g^-1 (p - c) + c]
//   group map:     (g.f)[h, p] = f[g^-1 h, g^-1 (p - c) + c]
// Both are index gathers, so they are exact and differentiable.

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

#include "rgc/finite_group.hpp"
#include "rgc/tensor.hpp"

namespace rgc {

namespace detail {

inline std::array<std::size_t, 3> cube_extents(const Shape& s, std::size_t first_spatial, const FiniteGroup& G,
                                               const char* op) {
  const std::size_t d = static_cast<std::size_t>(G.dim());
  if (s.size() != first_spatial + d)
    throw ShapeError(std::string(op) + ": expected " + std::to_string(d) + " spatial axes after " +
                     std::to_string(first_spatial) + " leading axes, got " + shape_str(s));
  std::array<std::size_t, 3> n{1, 1, 1};
  for (std::size_t a = 0; a < d; ++a) {
    n[a] = s[first_spatial + a];
    if (n[a] != n[0]) throw ShapeError(std::string(op) + ": spatial axes must have equal length, got " + shape_str(s));
  }
  return n;
}

// src[p] = flat index of g^-1 (p - c) + c, in doubled coordinates.
inline std::vector<std::size_t> spatial_sources(const FiniteGroup& G, std::size_t g, const std::array<std::size_t, 3>& n) {
  const Mat3 ginv = G.matrix(G.inverse(g));
  const std::size_t d = static_cast<std::size_t>(G.dim());
  const std::size_t V = n[0] * n[1] * n[2];
  std::vector<std::size_t> src(V);
  const int span = static_cast<int>(n[0]) - 1;
  for (std::size_t p = 0; p < V; ++p) {
    const std::array<std::size_t, 3> t{p / (n[1] * n[2]), (p / n[2]) % n[1], p % n[2]};
    Vec3 o{0, 0, 0};
    for (std::size_t a = 0; a < d; ++a) o[a] = 2 * static_cast<int>(t[a]) - span;
    const Vec3 q = mat_apply(ginv, o);
    std::array<std::size_t, 3> u{0, 0, 0};
    for (std::size_t a = 0; a < d; ++a) u[a] = static_cast<std::size_t>((q[a] + span) / 2);
    src[p] = (u[0] * n[1] + u[1]) * n[2] + u[2];
  }
  return src;
}

}  // namespace detail

/// Transforms a tensor whose trailing G.dim() axes are spatial. Every
/// leading axis is treated as a scalar channel.
template <typename T>
Tensor<T> transform_grid(const FiniteGroup& G, std::size_t g, const Tensor<T>& x) {
  const std::size_t d = static_cast<std::size_t>(G.dim());
  if (x.rank() < d) throw ShapeError("transform_grid: rank too small for a " + std::to_string(d) + "D group");
  const auto n = detail::cube_extents(x.shape(), x.rank() - d, G, "transform_grid");
  const auto src = detail::spatial_sources(G, g, n);
  const std::size_t V = src.size(), outer = x.size() / V;
  auto idx = std::make_shared<std::vector<std::size_t>>(x.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t p = 0; p < V; ++p) (*idx)[o * V + p] = o * V + src[p];
  return gather(x, std::shared_ptr<const std::vector<std::size_t>>(idx), x.shape());
}

/// Transforms a group feature map [B, C, |G|, spatial...] by the regular
/// representation on the group axis and the grid action on space.
template <typename T>
Tensor<T> transform_group_map(const FiniteGroup& G, std::size_t g, const Tensor<T>& f) {
  const std::size_t d = static_cast<std::size_t>(G.dim());
  if (f.rank() != 3 + d) throw ShapeError("transform_group_map: expected [B, C, |G|, spatial], got " + shape_str(f.shape()));
  if (f.dim(2) != G.order()) throw ConfigError("transform_group_map: group axis length differs from group order");
  const auto n = detail::cube_extents(f.shape(), 3, G, "transform_group_map");
  const auto src = detail::spatial_sources(G, g, n);
  const std::size_t V = src.size(), H = G.order(), outer = f.dim(0) * f.dim(1);
  const std::size_t ginv = G.inverse(g);
  auto idx = std::make_shared<std::vector<std::size_t>>(f.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t hs = G.compose(ginv, h);
      for (std::size_t p = 0; p < V; ++p) (*idx)[(o * H + h) * V + p] = (o * H + hs) * V + src[p];
    }
  return gather(f, std::shared_ptr<const std::vector<std::size_t>>(idx), f.shape());
}

struct StabilizerResult {
  std::vector<std::size_t> elements;  // sorted ids
  bool is_subgroup = false;
};

/// Elements fixing the grid about its centre to absolute tolerance tol.
/// Spatial axes (the trailing G.dim()) must be odd and equal.
template <typename T>
StabilizerResult stabilizer_of_grid(const FiniteGroup& G, const Tensor<T>& grid, double tol = 1e-9) {
  const std::size_t d = static_cast<std::size_t>(G.dim());
  if (grid.rank() < d) throw ShapeError("stabilizer_of_grid: rank too small");
  for (std::size_t a = grid.rank() - d; a < grid.rank(); ++a)
    if (grid.dim(a) % 2 == 0) throw ConfigError("stabilizer_of_grid: spatial dimensions must be odd, got " + shape_str(grid.shape()));
  NoGradGuard ng;
  StabilizerResult r;
  for (std::size_t g = 0; g < G.order(); ++g) {
    const auto t = transform_grid(G, g, grid);
    if (static_cast<double>(max_abs_diff(t, grid)) <= tol) r.elements.push_back(g);
  }
  r.is_subgroup = closure(G, r.elements).was_closed;
  return r;
}

}  // namespace rgc
