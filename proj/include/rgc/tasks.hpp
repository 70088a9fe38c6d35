#pragma once

// Synthetic data for the three experiment families: 2D shape deformations,
// perovskite-like voxel scenes and spectral flow fields.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "rgc/errors.hpp"
#include "rgc/finite_group.hpp"
#include "rgc/grid_transform.hpp"
#include "rgc/random.hpp"
#include "rgc/tensor.hpp"

namespace rgc {

struct Sample {
  Tensor<double> input;
  Tensor<double> target;
};

enum class Split { train, val, test };

/// Time-ordered samples split 80/10/10 by index.
struct Dataset {
  std::vector<Sample> samples;

  std::size_t n_train() const { return samples.size() * 8 / 10; }
  std::size_t n_val() const { return (samples.size() - n_train()) / 2; }
  Split split_of(std::size_t i) const {
    if (i < n_train()) return Split::train;
    return i < n_train() + n_val() ? Split::val : Split::test;
  }
  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (split_of(i) == s) out.push_back(i);
    return out;
  }
};

// ---------------------------------------------------------------------------
// 2D shapes

enum class ShapeTask { square_to_square, square_to_rectangle, square_to_asymmetric };

inline ShapeTask parse_shape_task(const std::string& s) {
  if (s == "square_to_square") return ShapeTask::square_to_square;
  if (s == "square_to_rectangle") return ShapeTask::square_to_rectangle;
  if (s == "square_to_asymmetric") return ShapeTask::square_to_asymmetric;
  throw ConfigError("unknown shape task '" + s + "'");
}

/// Expected stabilizer order under C4 for each target.
inline std::size_t shape_task_stabilizer_order(ShapeTask t) {
  switch (t) {
    case ShapeTask::square_to_square: return 4;
    case ShapeTask::square_to_rectangle: return 2;
    default: return 1;
  }
}

/// Input: filled square of half-side 3. Targets: square of half-side 4,
/// 9 x 5 rectangle, or an L-shaped blob. Tensors are [1, size, size].
inline Sample gen_shape2d(ShapeTask task, std::size_t size = 15) {
  if (size % 2 == 0 || size < 9) throw ConfigError("shape grid size must be odd and at least 9");
  const long c = static_cast<long>(size / 2);
  auto paint = [&](auto inside) {
    Tensor<double> t(Shape{1, size, size});
    auto v = t.mutable_values();
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = 0; j < size; ++j)
        v[i * size + j] = inside(static_cast<long>(i) - c, static_cast<long>(j) - c) ? 1.0 : 0.0;
    return t;
  };
  Sample s;
  s.input = paint([](long a, long b) { return std::abs(a) <= 3 && std::abs(b) <= 3; });
  switch (task) {
    case ShapeTask::square_to_square:
      s.target = paint([](long a, long b) { return std::abs(a) <= 4 && std::abs(b) <= 4; });
      break;
    case ShapeTask::square_to_rectangle:
      s.target = paint([](long a, long b) { return std::abs(a) <= 4 && std::abs(b) <= 2; });
      break;
    case ShapeTask::square_to_asymmetric:
      // An L: a vertical bar on the left plus a shorter foot at the bottom.
      s.target = paint([](long a, long b) {
        const bool bar = a >= -4 && a <= 4 && b >= -3 && b <= -1;
        const bool foot = a >= 2 && a <= 4 && b >= -3 && b <= 3;
        return bar || foot;
      });
      break;
  }
  const auto G = FiniteGroup::from_name("C4");
  if (stabilizer_of_grid(G, s.input).elements.size() != 4 ||
      stabilizer_of_grid(G, s.target).elements.size() != shape_task_stabilizer_order(task))
    throw ConsistencyError("shape task stabilizer differs from its documented value");
  return s;
}

// ---------------------------------------------------------------------------
// Voxel scenes

using Pos3 = std::array<double, 3>;

struct Atom {
  std::string species;
  std::size_t channel = 0;
  Pos3 position{};  // fractional, in [0, 1)^3
  double amplitude = 1;
  double sigma = 1.5;  // voxels
};

struct VoxelScene {
  std::size_t grid = 17;
  std::size_t channels = 3;
  std::vector<Atom> atoms;
};

enum class Phase { cubic, tetragonal, orthorhombic };

inline Phase parse_phase(const std::string& s) {
  if (s == "cubic") return Phase::cubic;
  if (s == "tetragonal") return Phase::tetragonal;
  if (s == "orthorhombic") return Phase::orthorhombic;
  throw ConfigError("unknown perovskite phase '" + s + "'");
}

inline double wrap_unit(double x) {
  x -= std::floor(x);
  return x >= 1.0 ? 0.0 : x;
}

/// One ABO3 cell filling the grid: A at the corner, B at the centre and O on
/// the three face centres, one channel per species. Non-cubic phases move B
/// by delta voxels along +z (tetragonal) or by delta/sqrt(2) along +y and +z
/// (orthorhombic).
inline VoxelScene gen_perovskite(Phase phase, double delta = 1.0, std::size_t grid = 17, double sigma = 1.5) {
  if (grid % 2 == 0) throw ConfigError("perovskite grid must be odd");
  if (phase != Phase::cubic && !(delta > 0 && delta < 2)) throw ConfigError("displacement must lie in (0, 2) voxels");
  if (!(sigma > 0)) throw ConfigError("gaussian width must be positive");
  VoxelScene s;
  s.grid = grid;
  const double step = 1.0 / static_cast<double>(grid);
  Pos3 b{0.5, 0.5, 0.5};
  if (phase == Phase::tetragonal) b[2] += delta * step;
  if (phase == Phase::orthorhombic) {
    b[1] += delta * step / std::sqrt(2.0);
    b[2] += delta * step / std::sqrt(2.0);
  }
  s.atoms.push_back({"A", 0, {0, 0, 0}, 1, sigma});
  s.atoms.push_back({"B", 1, b, 1, sigma});
  s.atoms.push_back({"O", 2, {0.5, 0.5, 0}, 1, sigma});
  s.atoms.push_back({"O", 2, {0.5, 0, 0.5}, 1, sigma});
  s.atoms.push_back({"O", 2, {0, 0.5, 0.5}, 1, sigma});
  return s;
}

/// Maps atom positions by element g about the cell centre.
inline VoxelScene transform_scene(const FiniteGroup& G, std::size_t g, const VoxelScene& scene) {
  if (G.dim() != 3) throw ConfigError("voxel scenes need a 3D group");
  VoxelScene out = scene;
  for (auto& a : out.atoms) {
    const Mat3& M = G.matrix(g);
    Pos3 p{};
    for (int r = 0; r < 3; ++r) {
      double acc = 0.5;
      for (int c = 0; c < 3; ++c) acc += M[r][c] * (a.position[c] - 0.5);
      p[r] = wrap_unit(acc);
    }
    a.position = p;
  }
  return out;
}

/// Periodic Gaussian splats sampled at voxel centres (i + 0.5) / D. The
/// Gaussian factorises over axes, so each atom needs three 1D profiles.
inline Tensor<double> rasterize(const VoxelScene& scene) {
  const std::size_t D = scene.grid;
  Tensor<double> out(Shape{scene.channels, D, D, D}, 0.0);
  auto v = out.mutable_values();
  const double Dd = static_cast<double>(D);
  for (const auto& a : scene.atoms) {
    if (a.channel >= scene.channels) throw ShapeError("atom channel outside scene channels");
    if (!(a.sigma > 0)) throw ConfigError("gaussian width must be positive");
    std::array<std::vector<double>, 3> prof;
    for (int ax = 0; ax < 3; ++ax) {
      prof[ax].assign(D, 0.0);
      for (std::size_t i = 0; i < D; ++i) {
        const double u = (static_cast<double>(i) + 0.5) / Dd - a.position[ax];
        for (int k = -2; k <= 2; ++k) {
          const double r = (u + k) * Dd;
          prof[ax][i] += std::exp(-r * r / (2 * a.sigma * a.sigma));
        }
      }
    }
    double* base = v.data() + a.channel * D * D * D;
    for (std::size_t i = 0; i < D; ++i)
      for (std::size_t j = 0; j < D; ++j) {
        const double pij = a.amplitude * prof[0][i] * prof[1][j];
        for (std::size_t k = 0; k < D; ++k) base[(i * D + j) * D + k] += pij * prof[2][k];
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flows

enum class FlowMode { isotropic, channel };

inline FlowMode parse_flow_mode(const std::string& s) {
  if (s == "isotropic") return FlowMode::isotropic;
  if (s == "channel") return FlowMode::channel;
  throw ConfigError("unknown flow mode '" + s + "'");
}

/// Non-overlapping block mean over the trailing `spatial` axes.
template <typename T>
Tensor<T> downsample_mean(const Tensor<T>& x, std::size_t factor, std::size_t spatial = 3) {
  if (factor == 0 || x.rank() < spatial) throw ShapeError("downsample_mean: bad factor or rank");
  const std::size_t lead_rank = x.rank() - spatial;
  Shape out_shape(x.shape().begin(), x.shape().begin() + static_cast<long>(lead_rank));
  for (std::size_t a = lead_rank; a < x.rank(); ++a) {
    if (x.dim(a) % factor) throw ShapeError("downsample_mean: " + shape_str(x.shape()) + " not divisible by " + std::to_string(factor));
    out_shape.push_back(x.dim(a) / factor);
  }
  // Gather index lists: each output voxel averages factor^spatial inputs.
  const std::size_t block = [&] {
    std::size_t b = 1;
    for (std::size_t a = 0; a < spatial; ++a) b *= factor;
    return b;
  }();
  const std::size_t n_out = numel(out_shape);
  auto idx = std::make_shared<std::vector<std::size_t>>(n_out * block);
  const auto in_strides = detail::strides_of(x.shape());
  const auto out_strides = detail::strides_of(out_shape);
  for (std::size_t o = 0; o < n_out; ++o) {
    std::size_t base = 0, rem = o;
    std::vector<std::size_t> pos(x.rank());
    for (std::size_t a = 0; a < x.rank(); ++a) {
      pos[a] = rem / out_strides[a];
      rem %= out_strides[a];
      base += (a < lead_rank ? pos[a] : pos[a] * factor) * in_strides[a];
    }
    for (std::size_t b = 0; b < block; ++b) {
      std::size_t off = 0, r = b;
      for (std::size_t a = x.rank(); a-- > lead_rank;) {
        off += (r % factor) * in_strides[a];
        r /= factor;
      }
      (*idx)[o * block + b] = base + off;
    }
  }
  Shape g_shape = out_shape;
  g_shape.push_back(block);
  return mean(gather(x, std::shared_ptr<const std::vector<std::size_t>>(idx), g_shape), {g_shape.size() - 1});
}

struct FlowParams {
  std::size_t size = 32;
  FlowMode mode = FlowMode::isotropic;
  int k_max = 4;
  double k_peak = 2.0;
  double wave_speed = 0.35;      // omega = c |k|
  double dt = 1.0;               // time between consecutive steps
  double advection = 0.6;        // channel mode: phase drift along x
  double shear = 0.8;            // channel mode: U0 sin(y) e_x
  double wall_damping = 3.0;     // channel mode: amplitude exp(-beta k_y^2 / k^2)
};

/// A random solenoidal field u(x, t) = sum_k a_k cos(k.x - omega_k t + phi_k)
/// with a_k orthogonal to k, on the periodic box [0, 2 pi)^3.
class SpectralFlow {
 public:
  SpectralFlow(std::uint64_t seed, FlowParams p) : p_(p) {
    if (p_.size == 0 || p_.size % 4) throw ConfigError("flow grid size must be divisible by 4");
    if (2 * p_.k_max >= static_cast<int>(p_.size)) throw ConfigError("flow k_max must stay below Nyquist");
    Rng rng(seed);
    const int K = p_.k_max;
    double energy = 0;
    for (int a = -K; a <= K; ++a)
      for (int b = -K; b <= K; ++b)
        for (int c = -K; c <= K; ++c) {
          const double k2 = a * a + b * b + c * c;
          if (k2 == 0 || k2 > K * K) continue;
          // Keep one of each +-k pair; cos with a random phase covers both.
          if (a < 0 || (a == 0 && (b < 0 || (b == 0 && c < 0)))) continue;
          const double k = std::sqrt(k2);
          double amp = std::pow(k / p_.k_peak, 2) * std::exp(-k2 / (p_.k_peak * p_.k_peak));
          if (p_.mode == FlowMode::channel) amp *= std::exp(-p_.wall_damping * b * b / k2);
          Pos3 dir{rng.normal(), rng.normal(), rng.normal()};
          const double dot = (dir[0] * a + dir[1] * b + dir[2] * c) / k2;
          dir = {dir[0] - dot * a, dir[1] - dot * b, dir[2] - dot * c};
          Mode m;
          m.k = {a, b, c};
          m.amp = {amp * dir[0], amp * dir[1], amp * dir[2]};
          m.phase = rng.uniform(0, 2 * std::numbers::pi);
          m.omega = p_.wave_speed * k + (p_.mode == FlowMode::channel ? p_.advection * a : 0.0);
          energy += amp * amp * (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]) / 2;
          modes_.push_back(m);
        }
    // Unit mean kinetic energy per component for the fluctuating part.
    const double scale = energy > 0 ? std::sqrt(1.5 / energy) : 1.0;
    for (auto& m : modes_)
      for (auto& x : m.amp) x *= scale;
  }

  const FlowParams& params() const { return p_; }

  /// Velocity [3, D, D, D] at time t.
  Tensor<double> field(double t) const {
    const std::size_t D = p_.size;
    const double h = 2 * std::numbers::pi / static_cast<double>(D);
    Tensor<double> u(Shape{3, D, D, D}, 0.0);
    auto v = u.mutable_values();
    const std::size_t V = D * D * D;
    std::vector<std::complex<double>> ex(D), ey(D), ez(D);
    for (const auto& m : modes_) {
      for (std::size_t i = 0; i < D; ++i) {
        const double x = h * static_cast<double>(i);
        ex[i] = std::polar(1.0, m.k[0] * x);
        ey[i] = std::polar(1.0, m.k[1] * x);
        ez[i] = std::polar(1.0, m.k[2] * x);
      }
      const auto ph = std::polar(1.0, m.phase - m.omega * t);
      for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = 0; j < D; ++j) {
          const auto eij = ph * ex[i] * ey[j];
          for (std::size_t k = 0; k < D; ++k) {
            const double c = (eij * ez[k]).real();
            const std::size_t o = (i * D + j) * D + k;
            v[o] += m.amp[0] * c;
            v[V + o] += m.amp[1] * c;
            v[2 * V + o] += m.amp[2] * c;
          }
        }
    }
    if (p_.mode == FlowMode::channel)
      for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = 0; j < D; ++j) {
          const double s = p_.shear * std::sin(h * static_cast<double>(j));
          for (std::size_t k = 0; k < D; ++k) v[(i * D + j) * D + k] += s;
        }
    return u;
  }

  /// Input: steps t0, t0+dt, t0+2dt block-averaged by 4 and stacked as
  /// [9, D/4, D/4, D/4]. Target: the following step at full resolution.
  Sample sample(double t0) const {
    std::vector<Tensor<double>> steps;
    for (int s = 0; s < 3; ++s) steps.push_back(downsample_mean(field(t0 + s * p_.dt), 4));
    const std::size_t d = p_.size / 4;
    Tensor<double> in(Shape{9, d, d, d});
    auto iv = in.mutable_values();
    const std::size_t block = 3 * d * d * d;
    for (int s = 0; s < 3; ++s) std::copy(steps[s].values().begin(), steps[s].values().end(), iv.begin() + s * static_cast<long>(block));
    return {in, field(t0 + 3 * p_.dt)};
  }

 private:
  struct Mode {
    std::array<int, 3> k;
    Pos3 amp;
    double phase;
    double omega;
  };
  FlowParams p_;
  std::vector<Mode> modes_;
};

inline Sample gen_flow(std::uint64_t seed, FlowParams p = {}) { return SpectralFlow(seed, p).sample(0.0); }

/// n consecutive, non-overlapping windows of one flow realisation.
inline Dataset gen_flow_dataset(std::uint64_t seed, std::size_t n, FlowParams p = {}) {
  const SpectralFlow flow(seed, p);
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) ds.samples.push_back(flow.sample(static_cast<double>(4 * i) * p.dt));
  return ds;
}

namespace detail {

// Naive DFT along one axis of a complex [.., n, ..] block; sign -1 forward.
inline void dft_axis(std::vector<std::complex<double>>& a, std::size_t D, int axis, int sign) {
  const std::size_t stride = axis == 0 ? D * D : axis == 1 ? D : 1;
  std::vector<std::complex<double>> tw(D), line(D);
  for (std::size_t k = 0; k < D; ++k) tw[k] = std::polar(1.0, sign * 2 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(D));
  for (std::size_t base = 0; base < D * D * D; ++base) {
    if ((base / stride) % D != 0) continue;
    for (std::size_t k = 0; k < D; ++k) {
      std::complex<double> s = 0;
      for (std::size_t i = 0; i < D; ++i) s += a[base + i * stride] * tw[(i * k) % D];
      line[k] = s;
    }
    for (std::size_t k = 0; k < D; ++k) a[base + k * stride] = line[k];
  }
}

}  // namespace detail

/// max |div u| with derivatives taken in Fourier space on [0, 2 pi)^3.
inline double spectral_divergence_max(const Tensor<double>& u) {
  if (u.rank() != 4 || u.dim(0) != 3 || u.dim(1) != u.dim(2) || u.dim(2) != u.dim(3))
    throw ShapeError("spectral_divergence_max: expected [3, D, D, D]");
  const std::size_t D = u.dim(1), V = D * D * D;
  std::vector<std::complex<double>> div(V, 0.0);
  for (int c = 0; c < 3; ++c) {
    std::vector<std::complex<double>> a(u.values().begin() + c * static_cast<long>(V), u.values().begin() + (c + 1) * static_cast<long>(V));
    for (int ax = 0; ax < 3; ++ax) detail::dft_axis(a, D, ax, -1);
    for (std::size_t i = 0; i < V; ++i) {
      const std::size_t idx[3] = {i / (D * D), (i / D) % D, i % D};
      const long n = static_cast<long>(idx[c]);
      const long k = 2 * n == static_cast<long>(D) ? 0 : (2 * n < static_cast<long>(D) ? n : n - static_cast<long>(D));
      div[i] += std::complex<double>(0, static_cast<double>(k)) * a[i];
    }
  }
  for (int ax = 0; ax < 3; ++ax) detail::dft_axis(div, D, ax, +1);
  double worst = 0;
  for (const auto& z : div) worst = std::max(worst, std::abs(z) / static_cast<double>(V));
  return worst;
}

}  // namespace rgc
