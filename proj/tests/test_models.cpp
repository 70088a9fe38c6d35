#include <gtest/gtest.h>

#include <filesystem>

#include "rgc/models.hpp"
#include "rgc/symmetry_probe.hpp"
#include "rgc/train.hpp"

using namespace rgc;
using Td = Tensor<double>;

namespace {

Td random_tensor(Shape s, Rng& rng) {
  Td t(std::move(s));
  for (auto& v : t.mutable_values()) v = rng.uniform(-1, 1);
  return t;
}

SuperResConfig small_sr(LayerKind kind) {
  SuperResConfig c;
  c.kind = kind;
  c.channels = 2;
  c.up_channels1 = 2;
  c.up_channels2 = 1;
  c.blocks = 1;
  return c;
}

// Gives the zero-initialised head and biases some weight so the group
// branch actually contributes to the output.
template <typename T>
void perturb_all(Model<T>& m, Rng& rng) {
  for (auto& p : m.parameters())
    if (p.name == "head" || p.name.rfind("bias", 0) == 0)
      for (auto& v : p.tensor.mutable_values()) v = static_cast<T>(rng.uniform(-0.5, 0.5));
}

}  // namespace

TEST(DiscoveryNet, StructureAndFreshEquivariance) {
  DiscoveryNet<double> net(DiscoveryConfig{});
  Rng rng(1);
  net.init(rng);
  const auto w = net.relaxed_weights();
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0].layer, "lift");
  for (const auto& l : w) EXPECT_EQ(l.w.shape(), (Shape{1, 4}));
  const auto e = equivariance_error_random<double>([&](const Td& x) { return net.forward(x); }, net.group(),
                                                   {2, 1, 15, 15}, rng);
  EXPECT_LT(e.max, 1e-10);

  DiscoveryNet<double> oct(DiscoveryConfig{"octahedral_48", 3, 2, 3, 3, 1});
  for (const auto& l : oct.relaxed_weights()) EXPECT_EQ(l.w.shape(), (Shape{1, 48}));
  EXPECT_THROW(DiscoveryNet<double>(DiscoveryConfig{"C4", 1, 2, 1, 2, 1}), ConfigError);
}

TEST(SuperRes, ShapesAndInitialPredictionIsTrilinear) {
  for (auto kind : {LayerKind::conv, LayerKind::equiv, LayerKind::relaxed}) {
    SuperResNet<double> net(small_sr(kind));
    Rng rng(2);
    net.init(rng);
    const auto x = random_tensor({2, 9, 4, 4, 4}, rng);
    const auto y = net.forward(x);
    EXPECT_EQ(y.shape(), (Shape{2, 3, 16, 16, 16})) << layer_kind_name(kind);
    std::vector<std::size_t> idx;
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t i = 6 * 64; i < 9 * 64; ++i) idx.push_back(b * 9 * 64 + i);
    const auto last = gather(x, std::make_shared<const std::vector<std::size_t>>(idx), Shape{2, 3, 4, 4, 4});
    EXPECT_EQ(max_abs_diff(y, upsample_trilinear(last, 4)), 0.0);
    EXPECT_THROW(net.forward(random_tensor({1, 6, 4, 4, 4}, rng)), ShapeError);
  }
}

TEST(SuperRes, GroupModelsRotateVelocityFields) {
  for (auto kind : {LayerKind::equiv, LayerKind::relaxed}) {
    SuperResNet<double> net(small_sr(kind));
    Rng rng(3);
    net.init(rng);
    perturb_all(net, rng);
    const auto& G = *net.group();
    const auto x = random_tensor({1, 9, 4, 4, 4}, rng);
    const auto y = net.forward(x);
    double worst = 0;
    for (std::size_t g = 0; g < G.order(); ++g)
      worst = std::max(worst, max_abs_diff(net.forward(transform_vector_grid(G, g, x, 1)), transform_vector_grid(G, g, y, 1)));
    EXPECT_LT(worst, 1e-10) << layer_kind_name(kind);
  }
}

TEST(SuperRes, EquivAndFreshRelaxedAgree) {
  SuperResNet<double> eq(small_sr(LayerKind::equiv)), rel(small_sr(LayerKind::relaxed));
  Rng rng(4);
  eq.init(rng);
  rel.init(rng);
  perturb_all(eq, rng);
  // Copy every shared tensor; the relaxed model only adds its weight vectors.
  const auto src = save_state(eq);
  for (auto& p : rel.state())
    for (const auto& n : src)
      if (n.name == p.name) {
        const auto v = n.as_double();
        std::copy(v.values().begin(), v.values().end(), p.tensor.mutable_values().begin());
      }
  const auto x = random_tensor({1, 9, 4, 4, 4}, rng);
  EXPECT_LT(max_abs_diff(eq.forward(x), rel.forward(x)), 1e-12);
}

TEST(SuperRes, ParameterCounts) {
  auto c = small_sr(LayerKind::conv);
  const std::size_t C = 2, u1 = 2, u2 = 1, B = 1;
  const std::size_t conv = 9 * C * 27 + 2 * B * C * C * 27 + C * u1 * 64 + u1 * u2 * 64 + C + 2 * B * C + u1 + u2 + 3 * u2;
  EXPECT_EQ(count_parameters(c), conv);

  // Relaxation adds one |H|-vector per bank to every group layer.
  auto eq = small_sr(LayerKind::equiv), rel = small_sr(LayerKind::relaxed);
  const std::size_t layers = 1 + 2 * B + 2;
  EXPECT_EQ(count_parameters(rel) - count_parameters(eq), layers * 24);
  rel.relax_lift = false;
  EXPECT_EQ(count_parameters(rel) - count_parameters(eq), (layers - 1) * 24);

  SuperResConfig full;
  full.separable = false;
  const auto matched = matched_conv_config(full, count_parameters(full));
  EXPECT_GT(count_parameters(full), count_parameters(SuperResConfig{}));
  EXPECT_EQ(matched.kind, LayerKind::conv);
  const double gap = std::abs(double(count_parameters(matched)) - double(count_parameters(full)));
  EXPECT_LT(gap / double(count_parameters(full)), 0.1);
}

TEST(Checkpoint, RoundTripRestoresOutputs) {
  SuperResNet<double> a(small_sr(LayerKind::relaxed)), b(small_sr(LayerKind::relaxed));
  Rng rng(6);
  a.init(rng);
  perturb_all(a, rng);
  for (auto& v : a.relaxed_weights()[1].w.mutable_values()) v = rng.uniform(0.5, 1.5);
  const auto path = (std::filesystem::temp_directory_path() / "rgc_model_ckpt.rgt1").string();
  write_rgt1(path, save_state(a));
  load_state(b, read_rgt1(path));
  const auto x = random_tensor({1, 9, 4, 4, 4}, rng);
  EXPECT_EQ(max_abs_diff(a.forward(x), b.forward(x)), 0.0);

  auto wider_cfg = small_sr(LayerKind::relaxed);
  wider_cfg.channels = 3;
  SuperResNet<double> wider(wider_cfg), other(small_sr(LayerKind::conv));
  EXPECT_THROW(load_state(wider, read_rgt1(path)), DataError);
  EXPECT_THROW(load_state(other, read_rgt1(path)), DataError);
}

TEST(Training, DeterministicAndDescending) {
  const auto sample = gen_shape2d(ShapeTask::square_to_rectangle);
  TrainOptions opt;
  opt.epochs = 10;
  auto run = [&] {
    DiscoveryNet<double> net(DiscoveryConfig{});
    Rng rng(7);
    net.init(rng);
    return train_discovery(net, sample, opt).train_loss;
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a, b);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LE(a[i], a[i - 1]);
}

TEST(Training, NonFiniteLossThrows) {
  DiscoveryNet<double> net(DiscoveryConfig{});
  Rng rng(8);
  net.init(rng);
  TrainOptions opt;
  opt.epochs = 50;
  opt.optimizer = OptimizerKind::sgd;
  opt.learning_rate = 1e150;
  EXPECT_THROW(train_discovery(net, gen_shape2d(ShapeTask::square_to_asymmetric), opt), TrainingDiverged);
}

TEST(Training, SuperResolutionImprovesOnTrilinear) {
  FlowParams p;
  p.size = 16;
  const auto ds = gen_flow_dataset(9, 20, p);
  SuperResNet<float> net(small_sr(LayerKind::conv));
  Rng rng(9);
  net.init(rng);
  TrainOptions opt;
  opt.epochs = 15;
  opt.learning_rate = 3e-3;
  const auto st = train_superres(net, ds, opt);
  EXPECT_EQ(st.val_loss.size(), 15u);
  EXPECT_LT(st.val_loss.back(), trilinear_l1(ds, ds.indices(Split::val)));
}
