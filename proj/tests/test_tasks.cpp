#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rgc/grid_transform.hpp"
#include "rgc/tasks.hpp"

using namespace rgc;
using Td = Tensor<double>;

TEST(Shapes, StabilizersMatchDocumentedOrders) {
  const auto G = FiniteGroup::from_name("C4");
  EXPECT_EQ(stabilizer_of_grid(G, gen_shape2d(ShapeTask::square_to_square).target).elements.size(), 4u);
  EXPECT_EQ(stabilizer_of_grid(G, gen_shape2d(ShapeTask::square_to_rectangle).target).elements,
            (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(stabilizer_of_grid(G, gen_shape2d(ShapeTask::square_to_asymmetric).target).elements,
            (std::vector<std::size_t>{0}));
  const auto s = gen_shape2d(ShapeTask::square_to_square);
  EXPECT_EQ(s.input.shape(), (Shape{1, 15, 15}));
  EXPECT_THROW(gen_shape2d(ShapeTask::square_to_square, 14), ConfigError);
  EXPECT_THROW(parse_shape_task("circle"), ConfigError);
}

TEST(Perovskite, OracleStabilizers) {
  const auto G = FiniteGroup::from_name("octahedral_48");
  EXPECT_EQ(stabilizer_of_grid(G, rasterize(gen_perovskite(Phase::cubic))).elements.size(), 48u);
  const auto tet = stabilizer_of_grid(G, rasterize(gen_perovskite(Phase::tetragonal, 1.0)));
  EXPECT_EQ(tet.elements.size(), 8u);
  EXPECT_TRUE(tet.is_subgroup);
  // Every stabilizing element fixes the z axis.
  for (auto g : tet.elements) EXPECT_EQ(G.matrix(g)[2][2], 1) << G.name(g);
  const auto ort = stabilizer_of_grid(G, rasterize(gen_perovskite(Phase::orthorhombic, 1.0)));
  EXPECT_EQ(ort.elements.size(), 4u);
  EXPECT_TRUE(ort.is_subgroup);
}

TEST(Perovskite, RejectsBadParameters) {
  EXPECT_THROW(gen_perovskite(Phase::tetragonal, 0.0), ConfigError);
  EXPECT_THROW(gen_perovskite(Phase::tetragonal, 2.0), ConfigError);
  EXPECT_THROW(gen_perovskite(Phase::cubic, 0.0, 16), ConfigError);
  EXPECT_NO_THROW(gen_perovskite(Phase::cubic, 0.0));
}

TEST(Rasterize, EmptyPeakAndMass) {
  VoxelScene empty;
  empty.grid = 9;
  EXPECT_EQ(max_abs(rasterize(empty)), 0.0);

  VoxelScene one;
  one.grid = 21;
  one.channels = 1;
  // Voxel 10 has centre (10 + 0.5) / 21 = 0.5.
  one.atoms.push_back({"X", 0, {0.5, 0.5, 0.5}, 2.0, 1.5});
  const auto r = rasterize(one);
  EXPECT_NEAR(r[(10 * 21 + 10) * 21 + 10], 2.0, 1e-12);
  double mass = 0;
  for (auto v : r.values()) mass += v;
  const double expect = 2.0 * std::pow(2 * std::numbers::pi * 1.5 * 1.5, 1.5);
  EXPECT_LT(std::abs(mass - expect) / expect, 0.01);
}

TEST(Rasterize, CommutesWithGroupAction) {
  const auto G = FiniteGroup::from_name("octahedral_48");
  const auto scene = gen_perovskite(Phase::orthorhombic, 0.7, 11);
  const auto base = rasterize(scene);
  for (std::size_t g = 0; g < G.order(); ++g)
    EXPECT_LT(max_abs_diff(rasterize(transform_scene(G, g, scene)), transform_grid(G, g, base)), 1e-9) << G.name(g);
}

TEST(Downsample, Examples) {
  EXPECT_EQ(max_abs_diff(downsample_mean(Td(Shape{2, 8, 8, 8}, 3.0), 4), Td(Shape{2, 2, 2, 2}, 3.0)), 0.0);
  Td one(Shape{1, 4, 4, 4}, 0.0);
  one.mutable_values()[21] = 1.0;
  EXPECT_DOUBLE_EQ(downsample_mean(one, 4).item(), 1.0 / 64);
  EXPECT_EQ(downsample_mean(Td(Shape{1, 64, 64, 64}, 0.0), 4).shape(), (Shape{1, 16, 16, 16}));
  EXPECT_THROW(downsample_mean(Td(Shape{1, 6, 6, 6}, 0.0), 4), ShapeError);
}

TEST(Downsample, CommutesWithOctahedralTransforms) {
  const auto G = FiniteGroup::from_name("octahedral_48");
  Rng rng(1);
  Td x(Shape{2, 8, 8, 8});
  for (auto& v : x.mutable_values()) v = rng.uniform(-1, 1);
  const auto d = downsample_mean(x, 4);
  for (std::size_t g = 0; g < G.order(); ++g)
    EXPECT_LT(max_abs_diff(downsample_mean(transform_grid(G, g, x), 4), transform_grid(G, g, d)), 1e-12);
}

TEST(Flow, ShapesDivergenceAndDeterminism) {
  for (auto mode : {FlowMode::isotropic, FlowMode::channel}) {
    FlowParams p;
    p.mode = mode;
    const auto s = gen_flow(7, p);
    EXPECT_EQ(s.input.shape(), (Shape{9, 8, 8, 8}));
    EXPECT_EQ(s.target.shape(), (Shape{3, 32, 32, 32}));
    EXPECT_LT(spectral_divergence_max(s.target), 1e-10);
    EXPECT_EQ(max_abs_diff(gen_flow(7, p).target, s.target), 0.0);
    EXPECT_GT(max_abs_diff(gen_flow(8, p).target, s.target), 0.1);
  }
  FlowParams bad;
  bad.size = 30;
  EXPECT_THROW(gen_flow(1, bad), ConfigError);
}

TEST(Flow, SpectralDivergenceDetectsCompressibleFields) {
  const std::size_t D = 8;
  Td u(Shape{3, D, D, D}, 0.0);
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D * D; ++j) u.mutable_values()[i * D * D + j] = std::sin(2 * std::numbers::pi * i / D);
  // div u = cos(x), so the maximum is 1.
  EXPECT_NEAR(spectral_divergence_max(u), 1.0, 1e-10);
}

TEST(Flow, ChannelModeIsAnisotropic) {
  FlowParams p;
  p.mode = FlowMode::channel;
  const auto u = gen_flow(3, p).target;
  // The x velocity correlates with sin(y) through the mean shear.
  double corr = 0;
  const std::size_t D = 32, V = D * D * D;
  for (std::size_t i = 0; i < V; ++i) corr += u[i] * std::sin(2 * std::numbers::pi * ((i / D) % D) / D);
  EXPECT_GT(corr / V, 0.2);
}

TEST(Dataset, SplitsAreEightyTenTenInTimeOrder) {
  Dataset ds;
  ds.samples.resize(40);
  EXPECT_EQ(ds.indices(Split::train).size(), 32u);
  EXPECT_EQ(ds.indices(Split::val), (std::vector<std::size_t>{32, 33, 34, 35}));
  EXPECT_EQ(ds.indices(Split::test).size(), 4u);
  FlowParams p;
  p.size = 16;
  const auto a = gen_flow_dataset(5, 10, p), b = gen_flow_dataset(5, 10, p);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(max_abs_diff(a.samples[i].target, b.samples[i].target), 0.0);
}
