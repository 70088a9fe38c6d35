#pragma once

// Finite point groups acting on square and cubic grids.
//
// Every element is stored as a 3x3 signed permutation matrix. Planar groups
// embed as rotations of the first two coordinates with m[2][2] = 1, so the
// same grid code serves both dimensions (2D grids carry an implicit trailing
// axis of length 1).

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rgc/errors.hpp"

namespace rgc {

using Mat3 = std::array<std::array<int, 3>, 3>;
using Vec3 = std::array<int, 3>;

inline Mat3 mat_identity() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

inline Mat3 mat_mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Mat3 mat_transpose(const Mat3& a) {
  Mat3 t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = a[j][i];
  return t;
}

inline Vec3 mat_apply(const Mat3& m, const Vec3& v) {
  Vec3 r{};
  for (int i = 0; i < 3; ++i) r[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
  return r;
}

inline int mat_det(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline int mat_trace(const Mat3& m) { return m[0][0] + m[1][1] + m[2][2]; }

inline bool mat_is_diagonal(const Mat3& m) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j && m[i][j] != 0) return false;
  return true;
}

enum class GroupKind { octahedral_24, octahedral_48, cyclic_2d };

struct GroupElement {
  std::size_t id = 0;
  Mat3 matrix{};
  std::string name;
};

namespace detail {

inline std::string axis_label(const Vec3& a) {
  std::string s = "[";
  for (int v : a) s += v < 0 ? "-1" : (v > 0 ? "1" : "0");
  return s + "]";
}

inline int sgn(int v) { return (v > 0) - (v < 0); }

// Names from the matrix alone: "e", "Rz90", "R[111]120", "R[1-10]180",
// "inv", "reflXY", "refl[1-10]", "inv_Rz90", ...
inline std::string rotation_name(const Mat3& r) {
  const int tr = mat_trace(r);
  if (tr == 3) return "e";
  static const char* axis_names = "xyz";
  if (tr == -1) {
    // Half turn: the axis spans the columns of R + I.
    Vec3 n{};
    for (int j = 0; j < 3 && n == Vec3{}; ++j)
      for (int i = 0; i < 3; ++i) n[i] = r[i][j] + (i == j ? 1 : 0);
    for (auto& v : n) v = sgn(v);
    int first = n[0] != 0 ? n[0] : (n[1] != 0 ? n[1] : n[2]);
    if (first < 0)
      for (auto& v : n) v = -v;
    const int nz = std::abs(n[0]) + std::abs(n[1]) + std::abs(n[2]);
    if (nz == 1) {
      for (int i = 0; i < 3; ++i)
        if (n[i] != 0) return std::string("R") + axis_names[i] + "180";
    }
    return "R" + axis_label(n) + "180";
  }
  // Axial vector of the antisymmetric part is 2 sin(theta) n.
  const Vec3 a{sgn(r[2][1] - r[1][2]), sgn(r[0][2] - r[2][0]), sgn(r[1][0] - r[0][1])};
  if (tr == 1) {
    for (int i = 0; i < 3; ++i)
      if (a[i] != 0) return std::string("R") + axis_names[i] + (a[i] > 0 ? "90" : "270");
  }
  return "R" + axis_label(a) + "120";
}

inline std::string octahedral_name(const Mat3& m) {
  if (mat_det(m) > 0) return rotation_name(m);
  Mat3 r = m;
  for (auto& row : r)
    for (auto& v : row) v = -v;
  const std::string rn = rotation_name(r);
  if (rn == "e") return "inv";
  if (rn == "Rx180") return "reflYZ";
  if (rn == "Ry180") return "reflXZ";
  if (rn == "Rz180") return "reflXY";
  if (rn.size() > 4 && rn.compare(rn.size() - 3, 3, "180") == 0 && rn[1] == '[')
    return "refl" + rn.substr(1, rn.size() - 4);
  return "inv_" + rn;
}

}  // namespace detail

class FiniteGroup {
 public:
  /// n is only read for cyclic_2d and must be 2 or 4.
  static FiniteGroup build(GroupKind kind, int n = 4) {
    FiniteGroup g;
    g.kind_ = kind;
    std::vector<Mat3> mats;
    if (kind == GroupKind::cyclic_2d) {
      if (n != 2 && n != 4) throw ConfigError("cyclic_2d: n must be 2 or 4, got " + std::to_string(n));
      g.dim_ = 2;
      const Mat3 quarter{{{0, 1, 0}, {-1, 0, 0}, {0, 0, 1}}};
      const Mat3 gen = n == 4 ? quarter : mat_mul(quarter, quarter);
      Mat3 cur = mat_identity();
      for (int k = 0; k < n; ++k) {
        mats.push_back(cur);
        cur = mat_mul(cur, gen);
      }
      for (int k = 0; k < n; ++k) g.names_.push_back(k == 0 ? "e" : (k == 1 ? "g" : "g" + std::to_string(k)));
    } else {
      g.dim_ = 3;
      std::array<int, 3> perm{0, 1, 2};
      do {
        for (int s = 0; s < 8; ++s) {
          Mat3 m{};
          for (int i = 0; i < 3; ++i) m[i][perm[i]] = (s >> i) & 1 ? -1 : 1;
          if (kind == GroupKind::octahedral_24 && mat_det(m) != 1) continue;
          mats.push_back(m);
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
      std::sort(mats.begin(), mats.end());
      auto it = std::find(mats.begin(), mats.end(), mat_identity());
      std::rotate(mats.begin(), it, it + 1);
      for (const auto& m : mats) g.names_.push_back(detail::octahedral_name(m));
    }
    g.label_ = kind == GroupKind::cyclic_2d ? "C" + std::to_string(n)
                                            : (kind == GroupKind::octahedral_24 ? "octahedral_24" : "octahedral_48");
    g.finish(mats);
    return g;
  }

  /// Accepts "octahedral_24", "octahedral_48", "cyclic_2d(n)", "C2", "C4", "O", "Oh".
  static FiniteGroup from_name(const std::string& s) {
    if (s == "octahedral_24" || s == "O") return build(GroupKind::octahedral_24);
    if (s == "octahedral_48" || s == "Oh") return build(GroupKind::octahedral_48);
    if (s == "C4" || s == "c4" || s == "cyclic_2d(4)" || s == "cyclic_2d") return build(GroupKind::cyclic_2d, 4);
    if (s == "C2" || s == "c2" || s == "cyclic_2d(2)") return build(GroupKind::cyclic_2d, 2);
    throw ConfigError("unsupported group '" + s + "'");
  }

  GroupKind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  int dim() const { return dim_; }
  std::size_t order() const { return elements_.size(); }
  static constexpr std::size_t identity_id() { return 0; }
  const std::vector<GroupElement>& elements() const { return elements_; }
  const GroupElement& element(std::size_t id) const {
    check(id);
    return elements_[id];
  }
  const Mat3& matrix(std::size_t id) const { return element(id).matrix; }
  const std::string& name(std::size_t id) const { return element(id).name; }

  std::size_t compose(std::size_t a, std::size_t b) const {
    check(a);
    check(b);
    return cayley_[a * order() + b];
  }
  std::size_t inverse(std::size_t a) const {
    check(a);
    return inverse_[a];
  }
  const std::vector<std::size_t>& cayley() const { return cayley_; }

  std::optional<std::size_t> find(const Mat3& m) const {
    auto it = index_.find(m);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::size_t> find_name(const std::string& n) const {
    for (const auto& e : elements_)
      if (e.name == n) return e.id;
    return std::nullopt;
  }

  std::vector<int> act_on_offset(std::size_t g, const std::vector<int>& o) const {
    if (o.size() != static_cast<std::size_t>(dim_))
      throw ShapeError("act_on_offset: offset of length " + std::to_string(o.size()) + " for a " +
                       std::to_string(dim_) + "D group");
    Vec3 v{0, 0, 0};
    for (int i = 0; i < dim_; ++i) v[i] = o[i];
    const Vec3 r = mat_apply(matrix(g), v);
    return std::vector<int>(r.begin(), r.begin() + dim_);
  }

  bool operator==(const FiniteGroup& other) const { return label_ == other.label_; }

 private:
  void check(std::size_t id) const {
    if (id >= elements_.size())
      throw IndexError("group element id " + std::to_string(id) + " out of range for order " +
                       std::to_string(elements_.size()));
  }

  void finish(const std::vector<Mat3>& mats) {
    const std::size_t n = mats.size();
    for (std::size_t i = 0; i < n; ++i) {
      elements_.push_back({i, mats[i], names_[i]});
      index_[mats[i]] = i;
    }
    cayley_.assign(n * n, 0);
    inverse_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        auto it = index_.find(mat_mul(mats[i], mats[j]));
        if (it == index_.end()) throw ConsistencyError(label_ + ": product leaves the element set");
        cayley_[i * n + j] = it->second;
        if (it->second == 0) inverse_[i] = j;
      }
  }

  GroupKind kind_ = GroupKind::cyclic_2d;
  std::string label_;
  int dim_ = 2;
  std::vector<std::string> names_;
  std::vector<GroupElement> elements_;
  std::map<Mat3, std::size_t> index_;
  std::vector<std::size_t> cayley_;
  std::vector<std::size_t> inverse_;
};

/// Smallest subgroup containing subset, and whether subset already was one.
struct ClosureResult {
  std::vector<std::size_t> subgroup;  // sorted ids
  bool was_closed = false;
};

inline ClosureResult closure(const FiniteGroup& G, const std::vector<std::size_t>& subset) {
  if (subset.empty()) throw ContractError("closure: empty subset");
  std::set<std::size_t> start(subset.begin(), subset.end());
  for (auto id : start) (void)G.element(id);
  std::set<std::size_t> cur = start;
  cur.insert(FiniteGroup::identity_id());
  for (bool grew = true; grew;) {
    grew = false;
    const std::vector<std::size_t> snap(cur.begin(), cur.end());
    for (auto a : snap)
      for (auto b : snap)
        if (cur.insert(G.compose(a, b)).second) grew = true;
  }
  return {std::vector<std::size_t>(cur.begin(), cur.end()), cur == start};
}

/// Kernel-index and group-axis permutations for one kernel size.
///
/// Operator convention: transformed[p] = original[pi[g][p]] realises
/// k'(o) = k(g^-1 o), and transformed[j] = original[sigma[g][j]] realises
/// f'(h) = f(g^-1 h). Composition reads pi(gh)[p] = pi(h)[pi(g)[p]].
struct GridActionCache {
  std::size_t kernel_size = 1;
  int dim = 2;
  std::size_t volume = 1;  // kernel_size^dim
  std::vector<std::vector<std::size_t>> pi;
  std::vector<std::vector<std::size_t>> sigma;
};

namespace detail {

// Works in doubled coordinates (2t - (S - 1)) so even sizes act about their
// half-integer centre.
inline GridActionCache make_action_cache(const FiniteGroup& G, std::size_t S) {
  if (S == 0) throw ConfigError("kernel size must be positive");
  GridActionCache c;
  c.kernel_size = S;
  c.dim = G.dim();
  const std::size_t d = static_cast<std::size_t>(G.dim());
  std::array<std::size_t, 3> ext{1, 1, 1};
  for (std::size_t a = 0; a < d; ++a) ext[a] = S;
  c.volume = ext[0] * ext[1] * ext[2];
  const int span = static_cast<int>(S) - 1;
  auto offset_of = [&](std::size_t p) {
    Vec3 o{0, 0, 0};
    const std::size_t t2 = p % ext[2], t1 = (p / ext[2]) % ext[1], t0 = p / (ext[1] * ext[2]);
    const std::array<std::size_t, 3> t{t0, t1, t2};
    for (std::size_t a = 0; a < d; ++a) o[a] = 2 * static_cast<int>(t[a]) - span;
    return o;
  };
  auto index_of = [&](const Vec3& o) {
    std::array<std::size_t, 3> t{0, 0, 0};
    for (std::size_t a = 0; a < d; ++a) t[a] = static_cast<std::size_t>((o[a] + span) / 2);
    return (t[0] * ext[1] + t[1]) * ext[2] + t[2];
  };
  c.pi.resize(G.order());
  c.sigma.resize(G.order());
  for (std::size_t g = 0; g < G.order(); ++g) {
    const Mat3 ginv = G.matrix(G.inverse(g));
    c.pi[g].resize(c.volume);
    for (std::size_t p = 0; p < c.volume; ++p) c.pi[g][p] = index_of(mat_apply(ginv, offset_of(p)));
    c.sigma[g].resize(G.order());
    for (std::size_t j = 0; j < G.order(); ++j) c.sigma[g][j] = G.compose(G.inverse(g), j);
  }
  return c;
}

}  // namespace detail

/// Centred action on odd kernels.
inline GridActionCache build_action_cache(const FiniteGroup& G, std::size_t S) {
  if (S % 2 == 0) throw ConfigError("build_action_cache: kernel size must be odd, got " + std::to_string(S));
  return detail::make_action_cache(G, S);
}

/// Same permutations for any kernel size, even sizes acting about the
/// half-integer centre. Used by stride-2 transposed kernels.
inline GridActionCache build_upsampling_action_cache(const FiniteGroup& G, std::size_t S) {
  return detail::make_action_cache(G, S);
}

// ---------------------------------------------------------------------------
// Character tables

struct Irrep {
  std::string name;
  int dim = 1;
  std::vector<std::complex<double>> chi;  // one value per conjugacy class
};

struct CharacterTable {
  std::vector<std::size_t> class_of;
  std::vector<std::size_t> class_sizes;
  std::vector<Irrep> irreps;

  std::complex<double> character(std::size_t irrep, std::size_t element) const {
    return irreps.at(irrep).chi.at(class_of.at(element));
  }
};

namespace detail {

// O classes in the order E, 8C3, 3C2, 6C4, 6C2'.
inline std::size_t rotation_class(const Mat3& r) {
  switch (mat_trace(r)) {
    case 3: return 0;
    case 0: return 1;
    case 1: return 3;
    default: return mat_is_diagonal(r) ? 2 : 4;
  }
}

inline void verify_table(const CharacterTable& t, std::size_t n, const std::string& label) {
  const double tol = 1e-10;
  double dims = 0;
  for (const auto& r : t.irreps) dims += static_cast<double>(r.dim) * r.dim;
  if (std::abs(dims - static_cast<double>(n)) > tol)
    throw ConsistencyError(label + ": sum of squared irrep dimensions is not the group order");
  if (t.irreps.size() != t.class_sizes.size())
    throw ConsistencyError(label + ": irrep count differs from class count");
  for (std::size_t a = 0; a < t.irreps.size(); ++a)
    for (std::size_t b = 0; b < t.irreps.size(); ++b) {
      std::complex<double> acc = 0;
      for (std::size_t k = 0; k < t.class_sizes.size(); ++k)
        acc += static_cast<double>(t.class_sizes[k]) * t.irreps[a].chi[k] * std::conj(t.irreps[b].chi[k]);
      const double want = a == b ? static_cast<double>(n) : 0.0;
      if (std::abs(acc - want) > tol) throw ConsistencyError(label + ": character rows are not orthogonal");
    }
  for (std::size_t k = 0; k < t.class_sizes.size(); ++k)
    for (std::size_t l = 0; l < t.class_sizes.size(); ++l) {
      std::complex<double> acc = 0;
      for (const auto& r : t.irreps) acc += r.chi[k] * std::conj(r.chi[l]);
      const double want = k == l ? static_cast<double>(n) / static_cast<double>(t.class_sizes[k]) : 0.0;
      if (std::abs(acc - want) > tol) throw ConsistencyError(label + ": character columns are not orthogonal");
    }
}

}  // namespace detail

/// Hard-coded standard tables; classes found by brute-force conjugation.
inline CharacterTable character_table(const FiniteGroup& G) {
  const std::size_t n = G.order();
  CharacterTable t;
  t.class_of.assign(n, n);
  std::size_t next = 0;
  for (std::size_t g = 0; g < n; ++g) {
    if (t.class_of[g] != n) continue;
    std::size_t count = 0;
    for (std::size_t h = 0; h < n; ++h) {
      const std::size_t c = G.compose(G.compose(h, g), G.inverse(h));
      if (t.class_of[c] == n) {
        t.class_of[c] = next;
        ++count;
      }
    }
    t.class_sizes.push_back(count);
    ++next;
  }
  // Representative of each class.
  std::vector<std::size_t> rep(next, n);
  for (std::size_t g = n; g-- > 0;) rep[t.class_of[g]] = g;

  using C = std::complex<double>;
  if (G.kind() == GroupKind::cyclic_2d) {
    // Abelian: one class per element; element k is g^k.
    const std::vector<std::string> names4{"A", "B", "E1", "E2"};
    const std::vector<std::string> names2{"A", "B"};
    // Exact powers of i (or of -1 for C2).
    const C quarter[4] = {C(1, 0), C(0, 1), C(-1, 0), C(0, -1)};
    const std::size_t stride = 4 / n;
    for (std::size_t k = 0; k < n; ++k) {
      Irrep r{n == 4 ? names4[k == 0 ? 0 : (k == 2 ? 1 : (k == 1 ? 2 : 3))] : names2[k], 1, {}};
      r.chi.resize(next);
      for (std::size_t c = 0; c < next; ++c) r.chi[c] = quarter[(k * rep[c] * stride) % 4];
      t.irreps.push_back(r);
    }
    // Trivial, sign, then the two complex irreps.
    if (n == 4) std::swap(t.irreps[1], t.irreps[2]);
  } else {
    const double o_table[5][5] = {{1, 1, 1, 1, 1}, {1, 1, 1, -1, -1}, {2, -1, 2, 0, 0}, {3, 0, -1, 1, -1}, {3, 0, -1, -1, 1}};
    const char* o_names[5] = {"A1", "A2", "E", "T1", "T2"};
    const bool full = G.kind() == GroupKind::octahedral_48;
    for (int parity = 0; parity < (full ? 2 : 1); ++parity)
      for (int i = 0; i < 5; ++i) {
        Irrep r{std::string(o_names[i]) + (full ? (parity == 0 ? "g" : "u") : ""), static_cast<int>(o_table[i][0]), {}};
        r.chi.resize(next);
        for (std::size_t c = 0; c < next; ++c) {
          Mat3 m = G.matrix(rep[c]);
          const int det = mat_det(m);
          if (det < 0)
            for (auto& row : m)
              for (auto& v : row) v = -v;
          const double sign = parity == 1 && det < 0 ? -1.0 : 1.0;
          r.chi[c] = sign * o_table[i][detail::rotation_class(m)];
        }
        t.irreps.push_back(r);
      }
    // Every class member must agree with its representative's character.
    for (std::size_t g = 0; g < n; ++g) {
      Mat3 m = G.matrix(g), mr = G.matrix(rep[t.class_of[g]]);
      if (mat_det(m) != mat_det(mr)) throw ConsistencyError(G.label() + ": class mixes determinants");
      if (mat_det(m) < 0)
        for (auto* x : {&m, &mr})
          for (auto& row : *x)
            for (auto& v : row) v = -v;
      if (detail::rotation_class(m) != detail::rotation_class(mr))
        throw ConsistencyError(G.label() + ": class mixes rotation types");
    }
  }
  detail::verify_table(t, n, G.label());
  return t;
}

/// One CSV row per element: id, name, the matrix rows flattened.
inline std::string group_csv(const FiniteGroup& G) {
  std::ostringstream os;
  os << "id,name";
  for (int i = 0; i < G.dim(); ++i)
    for (int j = 0; j < G.dim(); ++j) os << ",m" << i << j;
  os << "\n";
  for (const auto& e : G.elements()) {
    os << e.id << "," << e.name;
    for (int i = 0; i < G.dim(); ++i)
      for (int j = 0; j < G.dim(); ++j) os << "," << e.matrix[i][j];
    os << "\n";
  }
  return os.str();
}

}  // namespace rgc
