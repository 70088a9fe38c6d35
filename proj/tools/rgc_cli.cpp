// rgc_cli: data generation, training, analysis and checks for relaxed group
// convolution experiments.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data, format or
// shape error, 3 failed check.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "rgc/experiment.hpp"
#include "rgc/runtime.hpp"

namespace fs = std::filesystem;
using namespace rgc;

namespace {

constexpr int kOk = 0, kUsage = 1, kData = 2, kCheckFailed = 3;

void print_epoch(std::size_t e, double loss, std::size_t total) {
  const std::size_t every = total >= 10 ? total / 10 : 1;
  if (e % every == 0 || e + 1 == total) std::printf("epoch %zu/%zu loss %.6g\n", e + 1, total, loss);
  std::fflush(stdout);
}

void print_report(const SymmetryReport& rep) {
  std::printf("preserved set (%zu of %zu, tau %s): %s\n", rep.preserved.size(), rep.deviation.size(),
              format_number(rep.tau).c_str(), rep.preserved_names().c_str());
  std::printf("max deviation %s, mean deviation %s\n", format_number(rep.max_deviation()).c_str(),
              format_number(rep.mean_deviation()).c_str());
}

int cmd_gen(const std::string& task, const std::string& out, std::uint64_t seed, std::size_t size, double delta,
            std::size_t n) {
  auto c = default_config(task);
  c.seed = seed;
  if (size) c.grid_size = size;
  c.delta = delta;
  if (n) c.n_samples = n;
  validate(c);
  const auto ds = generate_data(c);
  save_data(out, ds);
  std::printf("wrote %zu sample(s) to %s: input %s, target %s\n", ds.samples.size(), out.c_str(),
              shape_str(ds.samples[0].input.shape()).c_str(), shape_str(ds.samples[0].target.shape()).c_str());
  return kOk;
}

int cmd_train(const std::string& config_path, const std::string& out_override) {
  auto c = load_config(config_path);
  if (!out_override.empty()) c.out_dir = out_override;
  std::printf("training %s (%s, %s) for %zu epochs\n", c.task.c_str(), c.layer_kind.c_str(), c.group.c_str(), c.epochs);
  const auto r = run_experiment(c, [&](std::size_t e, double l) { print_epoch(e, l, c.epochs); });
  const auto ckpt = write_run(r, c.out_dir);
  std::printf("parameters %zu, wall %.1f s\n", r.parameters, r.stats.wall_seconds);
  if (c.is_superres())
    std::printf("val L1 %.6g (trilinear %.6g), test L1 %.6g (trilinear %.6g)\n",
                r.stats.val_loss.empty() ? std::nan("") : r.stats.val_loss.back(), r.trilinear_val, r.stats.test_mae,
                r.trilinear_test);
  if (r.report) print_report(*r.report);
  std::printf("checkpoint %s\n", ckpt.c_str());
  return kOk;
}

int cmd_analyze(const std::string& ckpt_path, const std::string& out) {
  const auto ck = read_checkpoint(ckpt_path);
  const auto model = restore_model(ck);
  const auto rep = report_of(*model, ck.config);
  if (!rep) throw ConfigError("checkpoint has no relaxed weights to analyse (layer kind " + ck.config.layer_kind + ")");
  write_report(out, *rep);
  // Raster previews of the task data and the model's prediction.
  auto c = ck.config;
  if (c.is_superres()) c.n_samples = 10;
  const auto ds = experiment_data(c);
  const auto& s = ds.samples.back();
  Tensor<double> pred;
  {
    NoGradGuard ng;
    pred = model->forward(unsqueeze0(s.input));
  }
  const Shape ps(pred.shape().begin() + 1, pred.shape().end());
  const Tensor<double> pr(ps, std::vector<double>(pred.values().begin(), pred.values().end()));
  const fs::path d(out);
  export_pgm(preview_image(s.input), (d / "input.pgm").string());
  export_pgm(preview_image(s.target), (d / "target.pgm").string());
  export_pgm(preview_image(pr), (d / "prediction.pgm").string());
  print_report(*rep);
  std::printf("wrote weights.csv, spectrum.csv, summary.csv, preserved.csv and images to %s\n", out.c_str());
  return kOk;
}

int cmd_check_equiv(const std::string& ckpt_path, double tol) {
  const auto ck = read_checkpoint(ckpt_path);
  const auto model = restore_model(ck);
  Rng rng(ck.config.seed + 1);
  const auto e = model_equivariance(ck.config, *model, rng);
  const auto G = FiniteGroup::from_name(ck.config.group);
  std::size_t worst = 0;
  for (std::size_t g = 0; g < e.per_element.size(); ++g)
    if (e.per_element[g] > e.per_element[worst]) worst = g;
  std::printf("max equivariance error %.3e over %s (worst element %s)\n", e.max, e.input.c_str(), G.name(worst).c_str());
  const bool ok = e.max < tol;
  std::printf("%s: threshold %.1e\n", ok ? "equivariant" : "not equivariant", tol);
  return ok ? kOk : kCheckFailed;
}

int cmd_check_grad(const std::string& config_path) {
  const auto c = load_config(config_path);
  const auto a = gradient_audit(c);
  const auto G = FiniteGroup::from_name(c.group);
  auto names = [&](const std::vector<std::size_t>& ids) {
    std::string s;
    for (auto g : ids) s += (s.empty() ? "" : ",") + G.name(g);
    return s;
  };
  std::printf("gradient-equality classes: %zu\n", a.symmetry.classes.size());
  std::printf("identity class (%zu): %s\n", a.symmetry.identity_class.size(), names(a.symmetry.identity_class).c_str());
  std::printf("oracle Stab(X) n Stab(Y) (%zu): %s\n", a.symmetry.oracle.size(), names(a.symmetry.oracle).c_str());
  for (const auto& [p, err] : a.finite_difference) std::printf("finite difference %s: relative error %.2e\n", p.c_str(), err);
  const bool ok = a.symmetry.matches && a.worst_relative_error < 1e-5;
  std::printf("%s\n", ok ? "gradient check passed" : "gradient check FAILED");
  return ok ? kOk : kCheckFailed;
}

int cmd_superres(const std::string& config_path, const std::string& baseline) {
  auto c = load_config(config_path);
  if (!c.is_superres()) throw ConfigError("superres needs a flow task, got " + c.task);
  if (baseline == "trilinear") {
    const auto ds = experiment_data(c);
    const double v = trilinear_l1(ds, ds.indices(Split::val)), t = trilinear_l1(ds, ds.indices(Split::test));
    std::printf("trilinear: val L1 %.6g, test L1 %.6g\n", v, t);
    fs::create_directories(c.out_dir);
    CsvTable tab({"baseline", "val_l1", "test_l1"});
    tab.add_row({"trilinear", format_number(v), format_number(t)});
    tab.write((fs::path(c.out_dir) / "trilinear.csv").string());
    return kOk;
  }
  c.layer_kind = layer_kind_name(parse_layer_kind(baseline));
  if (baseline != c.layer_kind) throw ConfigError("unknown baseline '" + baseline + "'");
  const auto r = run_experiment(c, [&](std::size_t e, double l) { print_epoch(e, l, c.epochs); });
  write_run(r, (fs::path(c.out_dir) / baseline).string());
  const double val = r.stats.val_loss.empty() ? std::nan("") : r.stats.val_loss.back();
  std::printf("%s: %zu parameters, val L1 %.6g, test L1 %.6g; trilinear val %.6g (%.1f%% better)\n", baseline.c_str(),
              r.parameters, val, r.stats.test_mae, r.trilinear_val, 100 * (1 - val / r.trilinear_val));
  if (r.report) print_report(*r.report);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Relaxed group convolution experiments"};
  app.require_subcommand(1);

  std::string task, out, config, checkpoint, baseline, out_dir;
  std::uint64_t seed = 0;
  std::size_t size = 0, n_samples = 0;
  double delta = 1.0, tol = 1e-10;

  auto* gen = app.add_subcommand("gen", "Generate a task's data as an RGT1 file");
  gen->add_option("--task", task, "Task name")->required();
  gen->add_option("--out", out, "Output path")->required();
  gen->add_option("--seed", seed, "Random seed (flow tasks)");
  gen->add_option("--size", size, "Grid size (task default when omitted)");
  gen->add_option("--delta", delta, "Perovskite displacement in voxels");
  gen->add_option("--n-samples", n_samples, "Number of flow windows");

  auto* train = app.add_subcommand("train", "Train the model described by a JSON config");
  train->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  train->add_option("--out-dir", out_dir, "Overrides the config's out_dir");

  auto* analyze = app.add_subcommand("analyze", "Write the symmetry report of a checkpoint");
  analyze->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  analyze->add_option("--out", out, "Output directory")->required();

  auto* check_equiv = app.add_subcommand("check-equiv", "Measure a checkpoint's equivariance error");
  check_equiv->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  check_equiv->add_option("--tol", tol, "Pass threshold");

  auto* check_grad = app.add_subcommand("check-grad", "Gradient symmetry and finite-difference audit at init");
  check_grad->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);

  auto* superres = app.add_subcommand("superres", "Train one super-resolution baseline");
  superres->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  superres->add_option("--baseline", baseline, "Model")->required()->check(
      CLI::IsMember({"trilinear", "conv", "equiv", "relaxed"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(task, out, seed, size, delta, n_samples);
    if (*train) return cmd_train(config, out_dir);
    if (*analyze) return cmd_analyze(checkpoint, out);
    if (*check_equiv) return cmd_check_equiv(checkpoint, tol);
    if (*check_grad) return cmd_check_grad(config);
    if (*superres) return cmd_superres(config, baseline);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const TrainingDiverged& e) {
    std::cerr << e.what() << "\n";
    return kCheckFailed;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
