#pragma once

// Reading symmetry out of relaxed models: equivariance gaps, relaxed-weight
// deviation reports, irrep power spectra and the gradient-equality test.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "rgc/finite_group.hpp"
#include "rgc/grid_transform.hpp"
#include "rgc/io.hpp"
#include "rgc/random.hpp"
#include "rgc/tensor.hpp"

namespace rgc {

/// Relaxed weights of one layer, [L, |G|], tagged with the group they index.
template <typename T>
struct LayerWeights {
  std::string layer;
  std::string group_label;
  Tensor<T> w;
};

// ---------------------------------------------------------------------------
// Equivariance

struct EquivarianceError {
  std::vector<double> per_element;
  double max = 0;
  std::string input;  // description of the test input(s)
};

namespace detail {

inline void require_odd_spatial(const Shape& s, int d, const char* op) {
  for (std::size_t a = s.size() - static_cast<std::size_t>(d); a < s.size(); ++a)
    if (s[a] % 2 == 0) throw ConfigError(std::string(op) + ": spatial dimensions must be odd, got " + shape_str(s));
}

}  // namespace detail

/// max |model(g.x) - g.model(x)| for each g. The model maps scalar-channel
/// grids [B, C, spatial...] to scalar-channel grids.
template <typename T>
EquivarianceError equivariance_error(const std::function<Tensor<T>(const Tensor<T>&)>& model, const FiniteGroup& G,
                                     const Tensor<T>& x) {
  detail::require_odd_spatial(x.shape(), G.dim(), "equivariance_error");
  NoGradGuard ng;
  EquivarianceError e;
  e.input = "grid " + shape_str(x.shape());
  const auto y = model(x);
  for (std::size_t g = 0; g < G.order(); ++g) {
    const double d = static_cast<double>(max_abs_diff(model(transform_grid(G, g, x)), transform_grid(G, g, y)));
    e.per_element.push_back(d);
    e.max = std::max(e.max, d);
  }
  return e;
}

/// Worst case over `trials` uniform(-1, 1) inputs of the given shape.
template <typename T>
EquivarianceError equivariance_error_random(const std::function<Tensor<T>(const Tensor<T>&)>& model,
                                            const FiniteGroup& G, const Shape& shape, Rng& rng, int trials = 3) {
  EquivarianceError worst;
  worst.per_element.assign(G.order(), 0.0);
  for (int t = 0; t < trials; ++t) {
    Tensor<T> x(shape);
    for (auto& v : x.mutable_values()) v = static_cast<T>(rng.uniform(-1, 1));
    const auto e = equivariance_error(model, G, x);
    for (std::size_t g = 0; g < G.order(); ++g) worst.per_element[g] = std::max(worst.per_element[g], e.per_element[g]);
    worst.max = std::max(worst.max, e.max);
  }
  worst.input = std::to_string(trials) + " random grids " + shape_str(shape);
  return worst;
}

// ---------------------------------------------------------------------------
// Irrep spectra

/// (P_rho w)(g) = (d / |G|) sum_h conj(chi(h)) w(h^-1 g).
inline std::vector<std::complex<double>> irrep_projection(const std::vector<std::complex<double>>& w,
                                                          const FiniteGroup& G, const CharacterTable& t,
                                                          std::size_t rho) {
  const std::size_t n = G.order();
  if (w.size() != n) throw ShapeError("irrep_projection: weight vector length differs from group order");
  std::vector<std::complex<double>> out(n);
  const double scale = static_cast<double>(t.irreps.at(rho).dim) / static_cast<double>(n);
  for (std::size_t g = 0; g < n; ++g) {
    std::complex<double> acc = 0;
    for (std::size_t h = 0; h < n; ++h) acc += std::conj(t.character(rho, h)) * w[G.compose(G.inverse(h), g)];
    out[g] = scale * acc;
  }
  return out;
}

/// Power of w in each isotypic component; sums to sum_g w(g)^2.
inline std::vector<double> irrep_power(const std::vector<double>& w, const FiniteGroup& G, const CharacterTable& t) {
  if (w.size() != G.order())
    throw ShapeError("irrep_power: " + std::to_string(w.size()) + " weights for a group of order " +
                     std::to_string(G.order()));
  const std::vector<std::complex<double>> wc(w.begin(), w.end());
  std::vector<double> power;
  for (std::size_t r = 0; r < t.irreps.size(); ++r) {
    double p = 0;
    for (const auto& v : irrep_projection(wc, G, t, r)) p += std::norm(v);
    power.push_back(p);
  }
  return power;
}

// ---------------------------------------------------------------------------
// Weight report

struct SymmetryReport {
  struct Row {
    std::string layer;
    std::size_t bank;
    std::size_t element;
    double weight;
    double deviation;  // |w_l(g) - w_l(e)|
  };
  struct LayerSpectrum {
    std::string layer;
    std::vector<double> power;  // summed over filter banks
  };

  std::string group_label;
  std::vector<std::string> element_names;
  std::vector<std::string> irrep_names;
  std::vector<Row> rows;
  std::vector<double> deviation;  // d(g), max over layers and banks
  double tau = 0;
  std::vector<std::size_t> raw_preserved;  // {g : d(g) < tau}
  bool raw_closed = false;
  std::vector<std::size_t> preserved;  // largest subgroup found inside raw_preserved
  std::vector<LayerSpectrum> spectra;
  std::vector<double> total_power;  // summed over layers

  double max_deviation() const { return deviation.empty() ? 0 : *std::max_element(deviation.begin(), deviation.end()); }
  double mean_deviation() const {
    double s = 0;
    for (auto d : deviation) s += d;
    return deviation.empty() ? 0 : s / static_cast<double>(deviation.size());
  }

  std::string preserved_names() const {
    std::string s;
    for (auto g : preserved) s += (s.empty() ? "" : ",") + element_names[g];
    return s;
  }

  /// layer,l,element_id,element_name,weight,deviation
  CsvTable weights_csv() const {
    CsvTable t({"layer", "l", "element_id", "element_name", "weight", "deviation"});
    for (const auto& r : rows)
      t.add_row({r.layer, std::to_string(r.bank), std::to_string(r.element), element_names[r.element],
                 format_number(r.weight), format_number(r.deviation)});
    return t;
  }

  /// layer,irrep_name,power,power_fraction, with an "all" block summed over layers.
  CsvTable spectrum_csv() const {
    CsvTable t({"layer", "irrep_name", "power", "power_fraction"});
    auto emit = [&](const std::string& layer, const std::vector<double>& p) {
      double total = 0;
      for (auto v : p) total += v;
      for (std::size_t r = 0; r < p.size(); ++r)
        t.add_row({layer, irrep_names[r], format_number(p[r]), format_number(total > 0 ? p[r] / total : 0.0)});
    };
    for (const auto& s : spectra) emit(s.layer, s.power);
    emit("all", total_power);
    return t;
  }

  /// element_id,element_name,deviation,preserved plus a summary row.
  CsvTable summary_csv() const {
    CsvTable t({"element_id", "element_name", "deviation", "preserved"});
    for (std::size_t g = 0; g < deviation.size(); ++g) {
      const bool in = std::binary_search(preserved.begin(), preserved.end(), g);
      t.add_row({std::to_string(g), element_names[g], format_number(deviation[g]), in ? "1" : "0"});
    }
    return t;
  }
};

/// Largest subgroup inside `set` found by dropping the highest-deviation
/// element until the remainder is closed. The identity is never dropped.
inline std::vector<std::size_t> greedy_subgroup(const FiniteGroup& G, std::vector<std::size_t> set,
                                                const std::vector<double>& deviation) {
  while (true) {
    if (closure(G, set).was_closed) return set;
    auto worst = set.end();
    for (auto it = set.begin(); it != set.end(); ++it)
      if (*it != FiniteGroup::identity_id() && (worst == set.end() || deviation[*it] > deviation[*worst])) worst = it;
    if (worst == set.end()) return {FiniteGroup::identity_id()};
    set.erase(worst);
  }
}

/// tau <= 0 selects the adaptive threshold max(0.05 * max_g d(g), 1e-6).
template <typename T>
SymmetryReport weight_report(const std::vector<LayerWeights<T>>& layers, const FiniteGroup& G, double tau = 0) {
  if (layers.empty()) throw ContractError("weight_report: no layers");
  SymmetryReport rep;
  rep.group_label = G.label();
  const std::size_t n = G.order();
  for (const auto& e : G.elements()) rep.element_names.push_back(e.name);
  const auto table = character_table(G);
  for (const auto& r : table.irreps) rep.irrep_names.push_back(r.name);
  rep.deviation.assign(n, 0.0);
  rep.total_power.assign(table.irreps.size(), 0.0);
  for (const auto& lw : layers) {
    if (lw.group_label != G.label())
      throw ConfigError("weight_report: layer '" + lw.layer + "' uses group " + lw.group_label + ", expected " + G.label());
    if (lw.w.rank() != 2 || lw.w.dim(1) != n) throw ShapeError("weight_report: weights must be [L, |G|]");
    SymmetryReport::LayerSpectrum spec{lw.layer, std::vector<double>(table.irreps.size(), 0.0)};
    for (std::size_t l = 0; l < lw.w.dim(0); ++l) {
      std::vector<double> row(n);
      for (std::size_t g = 0; g < n; ++g) row[g] = static_cast<double>(lw.w[l * n + g]);
      for (std::size_t g = 0; g < n; ++g) {
        const double dev = std::abs(row[g] - row[0]);
        rep.rows.push_back({lw.layer, l, g, row[g], dev});
        rep.deviation[g] = std::max(rep.deviation[g], dev);
      }
      const auto p = irrep_power(row, G, table);
      for (std::size_t r = 0; r < p.size(); ++r) {
        spec.power[r] += p[r];
        rep.total_power[r] += p[r];
      }
    }
    rep.spectra.push_back(std::move(spec));
  }
  rep.tau = tau > 0 ? tau : std::max(0.05 * rep.max_deviation(), 1e-6);
  for (std::size_t g = 0; g < n; ++g)
    if (rep.deviation[g] < rep.tau) rep.raw_preserved.push_back(g);
  rep.raw_closed = closure(G, rep.raw_preserved).was_closed;
  rep.preserved = greedy_subgroup(G, rep.raw_preserved, rep.deviation);
  return rep;
}

// ---------------------------------------------------------------------------
// Gradient symmetry at equivariant initialisation

struct GradientSymmetryResult {
  std::vector<std::vector<std::size_t>> classes;  // first class holds the identity
  std::vector<std::size_t> identity_class;
  std::vector<std::size_t> oracle;  // Stab(X) intersected with Stab(Y)
  std::vector<std::vector<double>> gradients;  // per element, over layers and banks
  bool matches = false;
};

/// Relative equality used for gradient classes.
inline bool gradients_equal(const std::vector<double>& a, const std::vector<double>& b, double rel_tol) {
  double scale = 0, diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return diff <= rel_tol * std::max(scale, 1e-300);
}

/// Computes dL/dw(k) for every element with L = mse(model(X), Y), partitions
/// the elements by equal gradients and compares the identity's class with the
/// brute-force oracle Stab(X) n Stab(Y). `weights` are the model's relaxed
/// weights; they must all be equal.
template <typename T>
GradientSymmetryResult gradient_symmetry_check(const std::function<Tensor<T>(const Tensor<T>&)>& model,
                                               const std::vector<LayerWeights<T>>& weights, const FiniteGroup& G,
                                               const Tensor<T>& X, const Tensor<T>& Y, double rel_tol = 1e-10) {
  if (weights.empty()) throw ContractError("gradient_symmetry_check: model has no relaxed weights");
  const T w0 = weights[0].w[0];
  for (const auto& lw : weights) {
    if (!lw.w.requires_grad()) throw ContractError("gradient_symmetry_check: layer '" + lw.layer + "' is not relaxed");
    for (auto v : lw.w.values())
      if (v != w0) throw ContractError("gradient_symmetry_check: relaxed weights are not all equal");
  }
  const std::size_t n = G.order();
  for (auto lw : weights) lw.w.zero_grad();
  backward(mse_loss(model(X), Y));

  GradientSymmetryResult res;
  res.gradients.assign(n, {});
  for (const auto& lw : weights) {
    const auto g = lw.w.grad_tensor();
    for (std::size_t l = 0; l < lw.w.dim(0); ++l)
      for (std::size_t k = 0; k < n; ++k) res.gradients[k].push_back(static_cast<double>(g[l * n + k]));
  }
  std::vector<bool> assigned(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    if (assigned[k]) continue;
    std::vector<std::size_t> cls;
    for (std::size_t j = k; j < n; ++j)
      if (!assigned[j] && gradients_equal(res.gradients[k], res.gradients[j], rel_tol)) {
        cls.push_back(j);
        assigned[j] = true;
      }
    res.classes.push_back(std::move(cls));
  }
  res.identity_class = res.classes.front();

  const auto sx = stabilizer_of_grid(G, X).elements;
  const auto sy = stabilizer_of_grid(G, Y).elements;
  std::set_intersection(sx.begin(), sx.end(), sy.begin(), sy.end(), std::back_inserter(res.oracle));
  res.matches = res.identity_class == res.oracle;
  return res;
}

}  // namespace rgc
