// Acceptance checks. `acceptance` runs criteria 1-9 in order; `--criterion N`
// runs one. Each criterion prints indented detail lines followed by a single
// "criterion N: PASS|FAIL" line. Exit status is 0 only when every selected
// criterion passes.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <set>

#include "CLI11.hpp"
#include "rgc/rgc.hpp"

using namespace rgc;
using Td = Tensor<double>;

namespace {

std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string summary;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    std::printf("  [%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
    std::fflush(stdout);
  }
  void note(const std::string& what) {
    std::printf("  %s\n", what.c_str());
    std::fflush(stdout);
  }
};

double seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Td random_tensor(Shape s, Rng& rng) {
  Td t(std::move(s));
  for (auto& v : t.mutable_values()) v = rng.uniform(-1, 1);
  return t;
}

Shape spatial(std::initializer_list<std::size_t> lead, std::size_t n, int d) {
  Shape s(lead);
  for (int a = 0; a < d; ++a) s.push_back(n);
  return s;
}

std::string names(const FiniteGroup& G, const std::vector<std::size_t>& ids) {
  std::string s;
  for (auto g : ids) s += (s.empty() ? "" : ",") + G.name(g);
  return "{" + s + "}";
}

const char* kGroups[] = {"C2", "C4", "octahedral_24", "octahedral_48"};

// ---------------------------------------------------------------------------

bool is_permutation_of_range(const std::vector<std::size_t>& p) {
  std::vector<bool> seen(p.size(), false);
  for (auto v : p) {
    if (v >= p.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

void criterion_1(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  for (const char* name : kGroups) {
    const auto G = FiniteGroup::from_name(name);
    const std::size_t n = G.order();
    bool axioms = G.matrix(0) == mat_identity(), hom = true, cache_ok = true, grid_hom = true;
    std::set<std::string> distinct;
    for (std::size_t a = 0; a < n; ++a) {
      distinct.insert(G.name(a));
      const auto& m = G.matrix(a);
      axioms = axioms && mat_mul(m, mat_transpose(m)) == mat_identity();
      axioms = axioms && G.compose(0, a) == a && G.compose(a, 0) == a;
      axioms = axioms && G.compose(a, G.inverse(a)) == 0 && G.compose(G.inverse(a), a) == 0;
      for (std::size_t b = 0; b < n; ++b) {
        const auto ab = G.compose(a, b);
        hom = hom && G.matrix(ab) == mat_mul(G.matrix(a), G.matrix(b));
        for (std::size_t c = 0; c < n; ++c) axioms = axioms && G.compose(ab, c) == G.compose(a, G.compose(b, c));
      }
    }
    axioms = axioms && distinct.size() == n;
    // Kernel-offset and group-axis permutation caches, odd and even sizes.
    for (const auto& cache : {build_action_cache(G, 3), build_upsampling_action_cache(G, 4)}) {
      for (std::size_t g = 0; g < n; ++g) {
        cache_ok = cache_ok && is_permutation_of_range(cache.pi[g]) && is_permutation_of_range(cache.sigma[g]);
        for (std::size_t h = 0; h < n; ++h) {
          const auto gh = G.compose(g, h);
          for (std::size_t p = 0; p < cache.volume; ++p)
            cache_ok = cache_ok && cache.pi[gh][p] == cache.pi[h][cache.pi[g][p]];
          for (std::size_t j = 0; j < n; ++j) cache_ok = cache_ok && cache.sigma[gh][j] == cache.sigma[h][cache.sigma[g][j]];
        }
      }
      for (std::size_t p = 0; p < cache.volume; ++p) cache_ok = cache_ok && cache.pi[0][p] == p;
    }
    // The grid action is a homomorphism too.
    Rng rng(1);
    const auto x = random_tensor(spatial({2}, 5, G.dim()), rng);
    for (std::size_t g = 0; g < n; ++g)
      for (std::size_t h = 0; h < n; ++h)
        grid_hom = grid_hom && max_abs_diff(transform_grid(G, G.compose(g, h), x), transform_grid(G, g, transform_grid(G, h, x))) == 0.0;
    const auto table = character_table(G);
    std::size_t dim2 = 0;
    for (const auto& r : table.irreps) dim2 += static_cast<std::size_t>(r.dim * r.dim);
    out.check(axioms && hom && cache_ok && grid_hom && dim2 == n,
              fmt("%s: order %zu, axioms %s, matrix homomorphism %s, caches %s, grid action %s, sum d^2 = %zu", name, n,
                  axioms ? "ok" : "broken", hom ? "ok" : "broken", cache_ok ? "ok" : "broken", grid_hom ? "ok" : "broken", dim2));
  }
  const double s = seconds(t0);
  out.check(s < 10, fmt("runtime %.2f s (limit 10 s)", s));
}

// ---------------------------------------------------------------------------

void criterion_2(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    DiscoveryConfig cfg;
    std::size_t n;
  };
  for (const auto& c : {Case{DiscoveryConfig{"C4", 1, 8, 1, 3, 1}, 15}, Case{DiscoveryConfig{"octahedral_48", 3, 4, 3, 3, 1}, 9}}) {
    DiscoveryNet<double> net(c.cfg);
    Rng rng(2);
    net.init(rng);
    const auto& G = net.group();
    const auto e = equivariance_error_random<double>([&](const Td& x) { return net.forward(x); }, G,
                                                     spatial({1, c.cfg.in_channels}, c.n, G.dim()), rng, 3);
    out.check(e.max < 1e-10, fmt("%s 3-layer relaxed net on %s: max error %.2e (limit 1e-10)", c.cfg.group.c_str(),
                                 e.input.c_str(), e.max));
  }
  const double s = seconds(t0);
  out.check(s < 120, fmt("runtime %.1f s (limit 120 s)", s));
}

// ---------------------------------------------------------------------------

void criterion_3(Outcome& out) {
  Rng rng(3);
  for (const char* name : kGroups) {
    auto G = make_group(name);
    const std::size_t H = G->order(), n = G->dim() == 2 ? 7 : 4;
    RelaxedGConvLayer<double> relaxed(G, 2, 3, 3, 1, true), strict(G, 2, 3, 3, 1, false);
    relaxed.init(rng);
    std::copy(relaxed.kernels().values().begin(), relaxed.kernels().values().end(), strict.kernels().mutable_values().begin());
    const auto f = random_tensor(spatial({2, 2, H}, n, G->dim()), rng);
    const double d = max_abs_diff(relaxed.forward(f), gconv_forward(strict, f));

    LiftingLayer<double> lr(G, 2, 2, 3, 1, true), ls(G, 2, 2, 3, 1, false);
    lr.init(rng);
    std::copy(lr.kernels().values().begin(), lr.kernels().values().end(), ls.kernels().mutable_values().begin());
    const auto x = random_tensor(spatial({1, 2}, n, G->dim()), rng);
    const double dl = max_abs_diff(lr.forward(x), ls.forward(x));
    out.check(d < 1e-12 && dl < 1e-12, fmt("%s: relaxed(w=1) vs strict gconv %.1e, lifting %.1e (limit 1e-12)", name, d, dl));

    const std::size_t L = 2, Ci = 2, Co = 2, S = 3;
    SeparableRelaxedGConvLayer<double> sep(G, Ci, Co, S, L, true);
    sep.init(rng);
    for (auto& v : sep.relaxed_weights().mutable_values()) v = rng.uniform(-1, 2);
    RelaxedGConvLayer<double> full(G, Ci, Co, S, L, true);
    std::copy(sep.relaxed_weights().values().begin(), sep.relaxed_weights().values().end(),
              full.relaxed_weights().mutable_values().begin());
    const std::size_t V = sep.spatial_factor().size() / L;
    auto psi = full.kernels().mutable_values();
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t co = 0; co < Co; ++co)
        for (std::size_t ci = 0; ci < Ci; ++ci)
          for (std::size_t h = 0; h < H; ++h)
            for (std::size_t o = 0; o < V; ++o)
              psi[(((l * Co + co) * Ci + ci) * H + h) * V + o] =
                  sep.spatial_factor()[l * V + o] * sep.group_factor()[((l * Co + co) * Ci + ci) * H + h];
    const auto g = random_tensor(spatial({1, Ci, H}, G->dim() == 2 ? 6 : 3, G->dim()), rng);
    const double r = relative_error(sep.forward(g), full.forward(g));
    out.check(r < 1e-12, fmt("%s: separable vs rank-1 full layer, relative %.1e (limit 1e-12)", name, r));
  }
}

// ---------------------------------------------------------------------------

// Worst relative error between backprop and central differences over every
// listed tensor, for loss = mse(forward(), target).
double audit(const std::function<Td()>& forward, std::vector<Td> tensors, Rng& rng) {
  const Td target = random_tensor(forward().shape(), rng);
  for (auto& u : tensors) u.zero_grad();
  backward(mse_loss(forward(), target));
  std::vector<Td> analytic_grads;
  double scale = 0;
  for (auto& t : tensors) {
    analytic_grads.push_back(t.grad_tensor());
    scale = std::max(scale, max_abs(analytic_grads.back()));
  }
  double worst = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& analytic = analytic_grads[i];
    NoGradGuard ng;
    const auto numeric = finite_diff_grad<double>([&] { return mse_loss(forward(), target).item(); }, tensors[i]);
    // Some gradients are exactly zero by symmetry (a slice-constant bias
    // under vector pooling), so the denominator is floored at a small
    // fraction of the largest gradient in the audit.
    worst = std::max(worst, relative_error(analytic, numeric, 1e-4 * scale));
  }
  return worst;
}

template <typename Layer>
double audit_layer(Layer& layer, Td input, Rng& rng) {
  layer.init(rng);
  if (layer.relaxed())
    for (auto& v : layer.relaxed_weights().mutable_values()) v = rng.uniform(0.5, 1.5);
  input.set_requires_grad(true);
  std::vector<Td> ts{input};
  for (auto& p : layer.parameters()) ts.push_back(p.tensor);
  return audit([&] { return layer.forward(input); }, ts, rng);
}

// With `all_active` the fixture keeps every ReLU on its active side. A
// central difference across a ReLU kink measures the kink, and a deep
// group net has enough units that some pre-activation always lies within a
// step of zero. Positive kernels and relaxed weights, biases near 1 and a
// small input make every pre-activation after the lift a positive sum.
double audit_model(Model<double>& m, Td input, Rng& rng, bool all_active = false) {
  for (auto& p : m.parameters()) {
    const bool bias = p.name.rfind("bias", 0) == 0, head = p.name == "head";
    for (auto& v : p.tensor.mutable_values()) {
      v += rng.uniform(-0.3, 0.3);
      if (all_active && !head) v = bias ? 1 + v : std::abs(v);
    }
  }
  if (all_active)
    for (auto& v : input.mutable_values()) v *= 0.01;
  input.set_requires_grad(true);
  std::vector<Td> ts{input};
  for (auto& p : m.parameters()) ts.push_back(p.tensor);
  return audit([&] { return m.forward(input); }, ts, rng);
}

void criterion_4(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(4);
  auto report = [&](const std::string& what, double err) {
    out.check(err < 1e-5, fmt("%s: relative error %.2e (limit 1e-5)", what.c_str(), err));
  };
  for (const char* name : {"C4", "octahedral_24", "octahedral_48"}) {
    auto G = make_group(name);
    const int d = G->dim();
    const std::size_t H = G->order(), n = d == 2 ? 5 : 3;
    LiftingLayer<double> lift(G, 2, 2, 3, 2, true);
    report(fmt("%s lifting", name), audit_layer(lift, random_tensor(spatial({1, 2}, n, d), rng), rng));
    RelaxedGConvLayer<double> gc(G, 2, 2, 3, 2, true);
    report(fmt("%s relaxed gconv", name), audit_layer(gc, random_tensor(spatial({1, 2, H}, n, d), rng), rng));
    SeparableRelaxedGConvLayer<double> sep(G, 2, 2, 3, 2, true);
    report(fmt("%s separable gconv", name), audit_layer(sep, random_tensor(spatial({1, 2, H}, n, d), rng), rng));
    GroupUpsampleLayer<double> up(G, 2, 1, 4, 2, true);
    report(fmt("%s upsampling", name), audit_layer(up, random_tensor(spatial({1, 2, H}, 2, d), rng), rng));
  }
  {
    auto x = random_tensor({1, 2, 4, 4, 4}, rng).set_requires_grad(true);
    auto k = random_tensor({3, 2, 3, 3, 3}, rng).set_requires_grad(true);
    report("conv_nd", audit([&] { return conv_nd(x, k); }, {x, k}, rng));
    auto ku = random_tensor({2, 3, 4, 4, 4}, rng).set_requires_grad(true);
    report("conv_transpose_nd", audit([&] { return conv_transpose_nd(x, ku); }, {x, ku}, rng));
    report("upsample_trilinear", audit([&] { return upsample_trilinear(x, 4); }, {x}, rng));
    // Entries at least 0.1 from zero, so both branches are seen with no kink in reach.
    auto r = random_tensor({2, 3, 4, 4}, rng);
    for (auto& v : r.mutable_values()) v += v < 0 ? -0.1 : 0.1;
    r.set_requires_grad(true);
    report("relu", audit([&] { return relu(r); }, {r}, rng));
  }
  {
    DiscoveryNet<double> net(DiscoveryConfig{"C4", 1, 3, 1, 3, 1});
    net.init(rng);
    report("discovery net (C4)", audit_model(net, random_tensor({1, 1, 7, 7}, rng), rng));
  }
  for (auto kind : {LayerKind::relaxed, LayerKind::conv}) {
    SuperResConfig c;
    c.kind = kind;
    c.channels = 2;
    c.up_channels1 = 2;
    c.up_channels2 = 1;
    c.blocks = 1;
    SuperResNet<double> net(c);
    net.init(rng);
    report("super-resolution net (" + layer_kind_name(kind) + ")", audit_model(net, random_tensor({1, 9, 4, 4, 4}, rng), rng, true));
  }
  const double s = seconds(t0);
  out.check(s < 300, fmt("runtime %.1f s (limit 300 s)", s));
}

// ---------------------------------------------------------------------------

void criterion_5(Outcome& out) {
  struct Case {
    const char* task;
    std::size_t expected;
  };
  for (const auto& c : {Case{"square_to_rectangle", 2}, Case{"cubic_to_tetragonal", 8}, Case{"cubic_to_orthorhombic", 4}}) {
    auto cfg = default_config(c.task);
    cfg.channels = 2;
    cfg.seed = 5;
    const auto a = gradient_audit(cfg);
    const auto G = FiniteGroup::from_name(cfg.group);
    bool ok = a.symmetry.matches && a.symmetry.oracle.size() == c.expected;
    if (std::string(c.task) == "square_to_rectangle") ok = ok && a.symmetry.identity_class == std::vector<std::size_t>{0, 2};
    out.check(ok, fmt("%s on %s: identity class %s, oracle %s (expected %zu elements)", c.task, cfg.group.c_str(),
                      names(G, a.symmetry.identity_class).c_str(), names(G, a.symmetry.oracle).c_str(), c.expected));
  }
}

// ---------------------------------------------------------------------------

bool first_epochs_descend(const std::vector<double>& loss) {
  for (std::size_t i = 1; i < std::min<std::size_t>(10, loss.size()); ++i)
    if (loss[i] > loss[i - 1]) return false;
  return true;
}

void criterion_6(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto G = FiniteGroup::from_name("C4");
  for (const char* task : {"square_to_square", "square_to_rectangle", "square_to_asymmetric"}) {
    auto cfg = default_config(task);
    const auto r = run_experiment(cfg);
    const auto& rep = *r.report;
    double max_w = 0;
    for (const auto& row : rep.rows) max_w = std::max(max_w, std::abs(row.weight));
    const double total = std::accumulate(rep.total_power.begin(), rep.total_power.end(), 0.0);
    std::vector<double> frac;
    for (auto p : rep.total_power) frac.push_back(p / total);
    out.note(fmt("%s: preserved %s, d = [%.2e, %.2e, %.2e, %.2e], power fractions A %.2e B %.2e E1 %.2e E2 %.2e, "
                 "loss %.2e, first 10 epochs descending %s",
                 task, names(G, rep.preserved).c_str(), rep.deviation[0], rep.deviation[1], rep.deviation[2],
                 rep.deviation[3], frac[0], frac[1], frac[2], frac[3], r.stats.train_loss.back(),
                 first_epochs_descend(r.stats.train_loss) ? "yes" : "no"));
    const std::string t = task;
    if (t == "square_to_square") {
      out.check(rep.preserved.size() == 4, "task 1 preserved set is all of C4");
      out.check(rep.max_deviation() < 1e-3 * max_w, fmt("task 1 max d(g) %.2e < 1e-3 max|w| = %.2e", rep.max_deviation(), 1e-3 * max_w));
      out.check(1 - frac[0] < 1e-3, fmt("task 1 non-trivial power fraction %.2e < 1e-3", 1 - frac[0]));
    } else if (t == "square_to_rectangle") {
      out.check(rep.preserved == std::vector<std::size_t>{0, 2}, "task 2 preserved set is {e,g2}");
      // d is the max over layers and banks, so these bound every layer's gap.
      double eg2 = 0, gg3 = 0, eg = 0;
      for (std::size_t i = 0; i < rep.rows.size(); i += 4) {
        const double we = rep.rows[i].weight, wg = rep.rows[i + 1].weight, wg2 = rep.rows[i + 2].weight, wg3 = rep.rows[i + 3].weight;
        eg2 = std::max(eg2, std::abs(we - wg2));
        gg3 = std::max(gg3, std::abs(wg - wg3));
        eg = std::max(eg, std::abs(we - wg));
      }
      out.check(eg2 < 0.1 * eg && gg3 < 0.1 * eg,
                fmt("task 2 |w(e)-w(g2)| %.2e and |w(g)-w(g3)| %.2e < 10%% of |w(e)-w(g)| %.2e", eg2, gg3, eg));
      out.check(frac[2] + frac[3] < 1e-3, fmt("task 2 power outside A and B %.2e < 1e-3", frac[2] + frac[3]));
    } else {
      out.check(rep.preserved == std::vector<std::size_t>{0}, "task 3 preserved set is {e}");
      out.check(*std::min_element(frac.begin(), frac.end()) > 1e-3, "task 3 every irrep carries > 1e-3 of the power");
    }
  }
  const double s = seconds(t0);
  out.check(s < 600, fmt("runtime %.1f s (limit 600 s)", s));
}

// ---------------------------------------------------------------------------

void criterion_7(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto G = FiniteGroup::from_name("octahedral_48");
  for (const auto& [task, order] : {std::pair{"cubic_to_tetragonal", 8}, std::pair{"cubic_to_orthorhombic", 4}}) {
    const auto cfg = default_config(task);
    const auto s = discovery_sample(cfg);
    const auto sx = stabilizer_of_grid(G, s.input).elements, sy = stabilizer_of_grid(G, s.target).elements;
    std::vector<std::size_t> oracle;
    std::set_intersection(sx.begin(), sx.end(), sy.begin(), sy.end(), std::back_inserter(oracle));
    const auto r = run_experiment(cfg);
    const auto& rep = *r.report;
    double closest = std::numeric_limits<double>::infinity(), kept = 0;
    for (std::size_t g = 0; g < G.order(); ++g) {
      if (std::binary_search(rep.preserved.begin(), rep.preserved.end(), g))
        kept = std::max(kept, rep.deviation[g]);
      else
        closest = std::min(closest, rep.deviation[g]);
    }
    out.note(fmt("%s: %zu epochs in %.0f s, tau %.2e, largest preserved d(g) %.2e, smallest broken d(g) %.2e, "
                 "first 10 epochs descending %s",
                 task, cfg.epochs, r.stats.wall_seconds, rep.tau, kept, closest,
                 first_epochs_descend(r.stats.train_loss) ? "yes" : "no"));
    out.check(rep.preserved == oracle && oracle.size() == static_cast<std::size_t>(order),
              fmt("%s preserved %s equals oracle %s (%zu elements, expected %d)", task, names(G, rep.preserved).c_str(),
                  names(G, oracle).c_str(), oracle.size(), order));
  }
  const double s = seconds(t0);
  out.check(s < 1800, fmt("runtime %.0f s (limit 1800 s)", s));
}

// ---------------------------------------------------------------------------

struct Stat {
  std::vector<double> v;
  double mean() const { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }
  double lo() const { return *std::min_element(v.begin(), v.end()); }
  double hi() const { return *std::max_element(v.begin(), v.end()); }
  std::string str() const { return fmt("%.4f [%.4f, %.4f]", mean(), lo(), hi()); }
};

void criterion_8(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const char* kinds[] = {"relaxed", "equiv", "conv"};
  std::map<std::string, Stat> val, dev;
  bool all_beat = true;
  for (const char* task : {"flow_channel", "flow_isotropic"}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      auto cfg = default_config(task);
      cfg.seed = seed;
      const auto ds = experiment_data(cfg);
      for (const char* kind : kinds) {
        cfg.layer_kind = kind;
        const auto r = run_experiment(cfg, ds);
        const double v = r.stats.val_loss.back(), gain = 1 - v / r.trilinear_val;
        all_beat = all_beat && gain >= 0.2;
        val[std::string(task) + "/" + kind].v.push_back(v);
        val[std::string(task) + "/trilinear"].v.push_back(r.trilinear_val);
        std::string extra;
        if (r.report) {
          dev[task].v.push_back(r.report->mean_deviation());
          extra = fmt(", mean d(g) %.4f", r.report->mean_deviation());
        }
        out.note(fmt("%s seed %llu %-7s: %zu params, val L1 %.4f vs trilinear %.4f (%.1f%% better), %.0f s%s", task,
                     static_cast<unsigned long long>(seed), kind, r.parameters, v, r.trilinear_val, 100 * gain,
                     r.stats.wall_seconds, extra.c_str()));
      }
    }
  }
  for (const auto& [k, s] : val) out.note(fmt("%s val L1 mean [range] %s", k.c_str(), s.str().c_str()));
  out.check(all_beat, "(a) every learned model beats trilinear validation L1 by at least 20%");
  const double rc = val["flow_channel/relaxed"].mean(), ec = val["flow_channel/equiv"].mean();
  out.check(rc <= ec, fmt("(b) channel flow: relaxed %.4f <= equiv %.4f", rc, ec));
  const double ei = val["flow_isotropic/equiv"].mean(), ci = val["flow_isotropic/conv"].mean();
  out.check(ei <= ci, fmt("(c) isotropic flow: equiv %.4f <= conv %.4f", ei, ci));
  const double ratio = dev["flow_channel"].mean() / dev["flow_isotropic"].mean();
  out.check(ratio > 2, fmt("(d) mean relaxed-weight deviation channel %.4f / isotropic %.4f = %.2f > 2",
                           dev["flow_channel"].mean(), dev["flow_isotropic"].mean(), ratio));
  const double s = seconds(t0);
  out.check(s < 3 * 3600, fmt("runtime %.0f s (limit 10800 s)", s));
}

// ---------------------------------------------------------------------------

std::string golden(const std::string& name) { return std::string(RGC_GOLDEN_DIR) + "/" + name; }

void criterion_9(Outcome& out) {
  Rng rng(9);
  const auto dir = std::filesystem::temp_directory_path() / "rgc_acceptance";
  std::filesystem::create_directories(dir);
  Td d = random_tensor({3, 5, 7}, rng);
  Tensor<float> f = random_tensor({4, 6}, rng).cast<float>();
  const auto path = (dir / "roundtrip.rgt1").string();
  write_rgt1(path, {{"d", d}, {"f", f}, {"scalar", Td(Shape{}, 2.5)}});
  const auto back = read_rgt1(path);
  const auto& bd = std::get<Td>(back[0].tensor);
  const auto& bf = std::get<Tensor<float>>(back[1].tensor);
  const bool same = back.size() == 3 && bd.shape() == d.shape() && bf.shape() == f.shape() &&
                    std::memcmp(bd.data(), d.data(), d.size() * sizeof(double)) == 0 &&
                    std::memcmp(bf.data(), f.data(), f.size() * sizeof(float)) == 0 && back[2].as_double().item() == 2.5;
  out.check(same && encode_rgt1(back) == read_file(path), "RGT1 read(write(x)) is bit-exact for f64, f32 and rank 0");
  out.check(encode_rgt1({{"w", Td(Shape{}, 1.5)}}) == read_file(golden("scalar_w.rgt1")), "RGT1 scalar fixture byte-exact");

  const auto G = FiniteGroup::from_name("C4");
  const auto rep = weight_report(std::vector<LayerWeights<double>>{{"lift", G.label(), Td(Shape{1, 4}, {1, 0.5, 1, 0.5})}}, G);
  auto text = [](const std::string& p) {
    const auto b = read_file(p);
    return std::string(b.begin(), b.end());
  };
  out.check(rep.weights_csv().str() == text(golden("c4_weights.csv")), "weights.csv matches golden fixture");
  out.check(rep.spectrum_csv().str() == text(golden("c4_spectrum.csv")), "spectrum.csv matches golden fixture");
  CsvTable q({"name", "note"});
  q.add_row({"plain", "has,comma"});
  q.add_row({"quote", "say \"hi\""});
  out.check(q.str() == text(golden("quoting.csv")), "CSV quoting matches golden fixture");
  const auto pgm = (dir / "ramp.pgm").string();
  export_pgm(Td(Shape{2, 3}, {0, 1, 2, 3, 4, 5}), pgm);
  out.check(read_file(pgm) == read_file(golden("ramp_3x2.pgm")), "PGM ramp matches golden fixture");
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Acceptance checks for criteria 1-9"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, void (*)(Outcome&)>> all{
      {"group algebra", criterion_1},           {"equivariance at initialization", criterion_2},
      {"reduction and separability", criterion_3}, {"gradient audit", criterion_4},
      {"gradient symmetry at initialization", criterion_5}, {"C4 discovery tasks", criterion_6},
      {"perovskite phase discovery", criterion_7}, {"super-resolution ordering", criterion_8},
      {"format round-trips", criterion_9}};
  bool ok = true;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (only && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      all[i].second(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::printf("criterion %zu: %s (%s, %.1f s)\n", i + 1, o.pass ? "PASS" : "FAIL", all[i].first, seconds(t0));
    std::fflush(stdout);
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
