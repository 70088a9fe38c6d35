#include <gtest/gtest.h>

#include <set>

#include "rgc/finite_group.hpp"
#include "rgc/grid_transform.hpp"

using namespace rgc;

namespace {

std::vector<FiniteGroup> all_groups() {
  return {FiniteGroup::build(GroupKind::cyclic_2d, 2), FiniteGroup::build(GroupKind::cyclic_2d, 4),
          FiniteGroup::build(GroupKind::octahedral_24), FiniteGroup::build(GroupKind::octahedral_48)};
}

std::size_t id_of(const FiniteGroup& G, const std::string& name) {
  auto id = G.find_name(name);
  EXPECT_TRUE(id.has_value()) << name;
  return id.value_or(0);
}

Tensor<double> filled_rect(std::size_t n, std::size_t half0, std::size_t half1) {
  Tensor<double> t(Shape{n, n});
  const std::size_t c = n / 2;
  for (std::size_t i = c - half0; i <= c + half0; ++i)
    for (std::size_t j = c - half1; j <= c + half1; ++j) t.mutable_values()[i * n + j] = 1.0;
  return t;
}

}  // namespace

TEST(BuildGroup, Orders) {
  EXPECT_EQ(FiniteGroup::build(GroupKind::octahedral_24).order(), 24u);
  EXPECT_EQ(FiniteGroup::build(GroupKind::octahedral_48).order(), 48u);
  const auto c4 = FiniteGroup::build(GroupKind::cyclic_2d, 4);
  EXPECT_EQ(c4.order(), 4u);
  EXPECT_EQ(c4.matrix(0), mat_identity());
  EXPECT_EQ(FiniteGroup::build(GroupKind::cyclic_2d, 2).order(), 2u);
  EXPECT_THROW(FiniteGroup::build(GroupKind::cyclic_2d, 3), ConfigError);
  EXPECT_THROW(FiniteGroup::from_name("icosahedral"), ConfigError);
}

TEST(BuildGroup, AxiomsHoldExhaustively) {
  for (const auto& G : all_groups()) {
    const std::size_t n = G.order();
    EXPECT_EQ(G.matrix(0), mat_identity()) << G.label();
    for (std::size_t a = 0; a < n; ++a) {
      const int det = mat_det(G.matrix(a));
      EXPECT_TRUE(det == 1 || det == -1);
      if (G.kind() != GroupKind::octahedral_48) {
        EXPECT_EQ(det, 1);
      }
      EXPECT_EQ(G.compose(0, a), a);
      EXPECT_EQ(G.compose(a, 0), a);
      EXPECT_EQ(G.compose(a, G.inverse(a)), 0u);
      EXPECT_EQ(G.compose(G.inverse(a), a), 0u);
      EXPECT_EQ(G.matrix(G.inverse(a)), mat_transpose(G.matrix(a)));
      for (std::size_t b = 0; b < n; ++b) {
        EXPECT_LT(G.compose(a, b), n);
        EXPECT_EQ(G.matrix(G.compose(a, b)), mat_mul(G.matrix(a), G.matrix(b)));
        for (std::size_t c = 0; c < n; ++c)
          ASSERT_EQ(G.compose(G.compose(a, b), c), G.compose(a, G.compose(b, c)));
      }
    }
  }
}

TEST(BuildGroup, SignedPermutationMatrices) {
  for (const auto& G : all_groups())
    for (const auto& e : G.elements())
      for (int i = 0; i < 3; ++i) {
        int row = 0, col = 0;
        for (int j = 0; j < 3; ++j) {
          row += std::abs(e.matrix[i][j]);
          col += std::abs(e.matrix[j][i]);
        }
        EXPECT_EQ(row, 1);
        EXPECT_EQ(col, 1);
      }
}

TEST(BuildGroup, OctahedralOrderingIsLexicographic) {
  const auto G = FiniteGroup::build(GroupKind::octahedral_48);
  for (std::size_t i = 2; i < G.order(); ++i) EXPECT_LT(G.matrix(i - 1), G.matrix(i));
}

TEST(BuildGroup, NamesAreUnique) {
  for (const auto& G : all_groups()) {
    std::set<std::string> names;
    for (const auto& e : G.elements()) names.insert(e.name);
    EXPECT_EQ(names.size(), G.order()) << G.label();
  }
  const auto c4 = FiniteGroup::build(GroupKind::cyclic_2d, 4);
  EXPECT_EQ(c4.name(0), "e");
  EXPECT_EQ(c4.name(1), "g");
  EXPECT_EQ(c4.name(2), "g2");
  const auto oh = FiniteGroup::build(GroupKind::octahedral_48);
  for (const char* n : {"e", "Rx90", "Ry180", "Rz270", "inv", "reflXY", "reflYZ", "reflXZ", "R[111]120", "refl[1-10]"})
    EXPECT_TRUE(oh.find_name(n).has_value()) << n;
}

TEST(Compose, Examples) {
  const auto G = FiniteGroup::build(GroupKind::octahedral_24);
  const auto rz90 = id_of(G, "Rz90"), rz180 = id_of(G, "Rz180");
  EXPECT_EQ(G.matrix(rz90), (Mat3{{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}}));
  EXPECT_EQ(G.compose(rz90, rz90), rz180);
  const auto rx = id_of(G, "Rx90"), ry = id_of(G, "Ry90");
  EXPECT_NE(G.compose(rx, ry), G.compose(ry, rx));
  EXPECT_THROW(G.compose(0, 24), IndexError);
  EXPECT_THROW(G.inverse(99), IndexError);
}

TEST(Inverse, Examples) {
  const auto G = FiniteGroup::build(GroupKind::octahedral_48);
  EXPECT_EQ(G.inverse(0), 0u);
  EXPECT_EQ(G.inverse(id_of(G, "Rz90")), id_of(G, "Rz270"));
  EXPECT_EQ(G.inverse(id_of(G, "reflXY")), id_of(G, "reflXY"));
}

TEST(ActOnOffset, Examples) {
  const auto G = FiniteGroup::build(GroupKind::octahedral_48);
  EXPECT_EQ(G.act_on_offset(0, {1, 0, 0}), (std::vector<int>{1, 0, 0}));
  EXPECT_EQ(G.act_on_offset(id_of(G, "Rz90"), {1, 0, 0}), (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(G.act_on_offset(id_of(G, "reflXY"), {0, 0, 1}), (std::vector<int>{0, 0, -1}));
  EXPECT_THROW(G.act_on_offset(0, {1, 0}), ShapeError);
  const auto c4 = FiniteGroup::build(GroupKind::cyclic_2d, 4);
  EXPECT_EQ(c4.act_on_offset(1, {1, 1}).size(), 2u);
}

TEST(ActionCache, SingleCellIsIdentity) {
  const auto G = FiniteGroup::build(GroupKind::octahedral_48);
  const auto c = build_action_cache(G, 1);
  for (const auto& p : c.pi) EXPECT_EQ(p, std::vector<std::size_t>{0});
}

TEST(ActionCache, CyclicCornerExample) {
  const auto G = FiniteGroup::build(GroupKind::cyclic_2d, 4);
  const auto c = build_action_cache(G, 3);
  // Offset (1,1) is index (2,2) = 8; it reads from (-1,1), index (0,2) = 2.
  EXPECT_EQ(c.pi[1][8], 2u);
}

TEST(ActionCache, EvenSizeRejected) {
  const auto G = FiniteGroup::build(GroupKind::cyclic_2d, 4);
  EXPECT_THROW(build_action_cache(G, 4), ConfigError);
  EXPECT_NO_THROW(build_upsampling_action_cache(G, 4));
}

TEST(ActionCache, OperatorHomomorphism) {
  for (const auto& G : all_groups())
    for (std::size_t S : {1u, 2u, 3u, 4u, 5u}) {
      const auto c = build_upsampling_action_cache(G, S);
      for (std::size_t p = 0; p < c.volume; ++p) EXPECT_EQ(c.pi[0][p], p);
      for (std::size_t j = 0; j < G.order(); ++j) EXPECT_EQ(c.sigma[0][j], j);
      for (std::size_t g = 0; g < G.order(); ++g)
        for (std::size_t h = 0; h < G.order(); ++h) {
          const auto& pgh = c.pi[G.compose(g, h)];
          for (std::size_t p = 0; p < c.volume; ++p) ASSERT_EQ(pgh[p], c.pi[h][c.pi[g][p]]);
          const auto& sgh = c.sigma[G.compose(g, h)];
          for (std::size_t j = 0; j < G.order(); ++j) ASSERT_EQ(sgh[j], c.sigma[h][c.sigma[g][j]]);
        }
    }
}

TEST(Closure, Examples) {
  const auto G = FiniteGroup::build(GroupKind::octahedral_24);
  auto r = closure(G, {0});
  EXPECT_EQ(r.subgroup, std::vector<std::size_t>{0});
  EXPECT_TRUE(r.was_closed);
  r = closure(G, {0, id_of(G, "Rz90")});
  EXPECT_EQ(r.subgroup.size(), 4u);
  EXPECT_FALSE(r.was_closed);
  std::vector<std::size_t> all(24);
  std::iota(all.begin(), all.end(), 0);
  r = closure(G, all);
  EXPECT_EQ(r.subgroup, all);
  EXPECT_TRUE(r.was_closed);
}

TEST(CharacterTable, InvariantsAndShapes) {
  for (const auto& G : all_groups()) {
    const auto t = character_table(G);
    EXPECT_EQ(t.irreps.size(), t.class_sizes.size());
    for (std::size_t c = 0; c < t.class_sizes.size(); ++c) EXPECT_EQ(t.irreps[0].chi[c], std::complex<double>(1.0));
    int sq = 0;
    for (const auto& r : t.irreps) sq += r.dim * r.dim;
    EXPECT_EQ(static_cast<std::size_t>(sq), G.order());
  }
  const auto o = character_table(FiniteGroup::build(GroupKind::octahedral_24));
  std::vector<int> dims;
  for (const auto& r : o.irreps) dims.push_back(r.dim);
  EXPECT_EQ(dims, (std::vector<int>{1, 1, 2, 3, 3}));
  std::multiset<std::size_t> sizes(o.class_sizes.begin(), o.class_sizes.end());
  EXPECT_EQ(sizes, (std::multiset<std::size_t>{1, 3, 6, 6, 8}));
  EXPECT_EQ(character_table(FiniteGroup::build(GroupKind::octahedral_48)).irreps.size(), 10u);
}

TEST(CharacterTable, CyclicSignIrrep) {
  const auto G = FiniteGroup::build(GroupKind::cyclic_2d, 4);
  const auto t = character_table(G);
  ASSERT_EQ(t.irreps[1].name, "B");
  EXPECT_EQ(t.character(1, 1), std::complex<double>(-1.0));
  EXPECT_EQ(t.character(1, 2), std::complex<double>(1.0));
  EXPECT_NEAR(std::abs(t.character(2, 1) - std::complex<double>(0, 1)), 0.0, 1e-15);
}

TEST(Stabilizer, ZeroGridIsFullGroup) {
  const auto G = FiniteGroup::build(GroupKind::octahedral_48);
  const auto s = stabilizer_of_grid(G, Tensor<double>(Shape{5, 5, 5}));
  EXPECT_EQ(s.elements.size(), 48u);
  EXPECT_TRUE(s.is_subgroup);
}

TEST(Stabilizer, SquareAndRectangle) {
  const auto G = FiniteGroup::build(GroupKind::cyclic_2d, 4);
  EXPECT_EQ(stabilizer_of_grid(G, filled_rect(15, 3, 3)).elements.size(), 4u);
  const auto r = stabilizer_of_grid(G, filled_rect(15, 4, 2));
  EXPECT_EQ(r.elements, (std::vector<std::size_t>{0, 2}));
  EXPECT_TRUE(r.is_subgroup);
  EXPECT_THROW(stabilizer_of_grid(G, Tensor<double>(Shape{4, 4})), ConfigError);
}

TEST(GridTransform, IsAGroupAction) {
  const auto G = FiniteGroup::build(GroupKind::octahedral_48);
  Tensor<double> x(Shape{2, 3, 3, 3});
  for (std::size_t i = 0; i < x.size(); ++i) x.mutable_values()[i] = double(i) * 0.37 - 4;
  for (std::size_t g = 0; g < G.order(); g += 5)
    for (std::size_t h = 0; h < G.order(); h += 7) {
      const auto lhs = transform_grid(G, G.compose(g, h), x);
      const auto rhs = transform_grid(G, g, transform_grid(G, h, x));
      EXPECT_EQ(max_abs_diff(lhs, rhs), 0.0);
    }
}

TEST(GroupCsv, Header) {
  const auto csv = group_csv(FiniteGroup::build(GroupKind::cyclic_2d, 4));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,name,m00,m01,m10,m11");
  EXPECT_NE(csv.find("1,g,0,1,-1,0\n"), std::string::npos);
}
