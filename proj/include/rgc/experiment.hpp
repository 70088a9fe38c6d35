#pragma once

// Experiment configuration (a flat JSON object), data files, single-run
// drivers and checkpoint handling. The command-line tool, the acceptance
// binary and the samples all go through this layer.

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rgc/errors.hpp"
#include "rgc/gradcheck.hpp"
#include "rgc/io.hpp"
#include "rgc/models.hpp"
#include "rgc/symmetry_probe.hpp"
#include "rgc/tasks.hpp"
#include "rgc/train.hpp"

namespace rgc {

using Json = nlohmann::json;

enum class TaskFamily { shape, perovskite, flow };

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"square_to_square",    "square_to_rectangle",  "square_to_asymmetric",
                                              "cubic_to_tetragonal", "cubic_to_orthorhombic", "flow_isotropic",
                                              "flow_channel"};
  return names;
}

inline TaskFamily task_family(const std::string& task) {
  if (task.rfind("square_to_", 0) == 0) {
    parse_shape_task(task);
    return TaskFamily::shape;
  }
  if (task == "cubic_to_tetragonal" || task == "cubic_to_orthorhombic") return TaskFamily::perovskite;
  if (task == "flow_isotropic" || task == "flow_channel") return TaskFamily::flow;
  std::string all;
  for (const auto& n : task_names()) all += (all.empty() ? "" : ", ") + n;
  throw ConfigError("unknown task '" + task + "' (expected one of " + all + ")");
}

/// Every key of the JSON config file maps to one field here.
struct ExperimentConfig {
  std::string task = "square_to_square";
  std::string group = "C4";
  std::string layer_kind = "relaxed";
  std::size_t filter_banks = 1;
  std::size_t channels = 8;
  std::size_t kernel_size = 3;
  std::size_t epochs = 2000;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  std::uint64_t seed = 0;
  std::string precision = "float64";
  std::string data;  // optional RGT1 file written by `gen`; generated on the fly when empty
  std::string out_dir = "run";
  std::size_t grid_size = 15;
  double delta = 1.0;          // perovskite displacement in voxels
  std::size_t blocks = 4;      // residual blocks (super-resolution)
  std::size_t batch_size = 4;  // super-resolution mini-batch
  bool separable = true;
  bool relax_lift = true;
  std::size_t n_samples = 40;  // super-resolution windows
  double tau = 0;              // <= 0: adaptive threshold

  TaskFamily family() const { return task_family(task); }
  bool is_superres() const { return family() == TaskFamily::flow; }
};

/// Defaults per task family: discovery tasks overfit one sample, the flow
/// tasks train the desk-scale super-resolution net in single precision.
inline ExperimentConfig default_config(const std::string& task) {
  ExperimentConfig c;
  c.task = task;
  switch (task_family(task)) {
    case TaskFamily::shape:
      break;
    case TaskFamily::perovskite:
      c.group = "octahedral_48";
      c.channels = 4;
      c.epochs = 1000;
      c.grid_size = 9;
      break;
    case TaskFamily::flow:
      c.group = "octahedral_24";
      c.epochs = 30;
      c.learning_rate = 3e-3;
      c.precision = "float32";
      c.grid_size = 32;
      break;
  }
  return c;
}

inline void validate(const ExperimentConfig& c) {
  const auto fam = task_family(c.task);
  const auto kind = parse_layer_kind(c.layer_kind);
  parse_optimizer(c.optimizer);
  FiniteGroup::from_name(c.group);
  if (c.kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd, got " + std::to_string(c.kernel_size));
  if (c.filter_banks == 0) throw ConfigError("filter_banks must be at least 1");
  if (c.channels == 0) throw ConfigError("channels must be at least 1");
  if (!(c.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (c.precision != "float64" && c.precision != "float32")
    throw ConfigError("precision must be float64 or float32, got '" + c.precision + "'");
  if (fam != TaskFamily::flow && kind != LayerKind::relaxed)
    throw ConfigError("discovery tasks train the relaxed network; layer_kind must be relaxed");
  const bool three_d = FiniteGroup::from_name(c.group).dim() == 3;
  if (fam == TaskFamily::shape && three_d) throw ConfigError("shape tasks are 2D; use C2 or C4");
  if (fam != TaskFamily::shape && !three_d) throw ConfigError(c.task + " needs a 3D group");
  if (fam == TaskFamily::flow) {
    if (c.blocks == 0) throw ConfigError("blocks must be at least 1");
    if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (c.n_samples < 10) throw ConfigError("n_samples must be at least 10 for an 80/10/10 split");
    if (c.grid_size % 4 != 0) throw ConfigError("flow grid_size must be divisible by 4");
  } else if (c.grid_size % 2 == 0) {
    throw ConfigError("discovery grid_size must be odd");
  }
}

namespace detail {

inline std::string json_string(const Json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

inline std::size_t json_size(const Json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

inline double json_double(const Json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

inline bool json_bool(const Json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
  return v.get<bool>();
}

}  // namespace detail

/// Starts from the task's defaults and overlays every key present.
/// Unknown keys are rejected so typos do not silently fall back to defaults.
inline ExperimentConfig config_from_json(const Json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  if (!j.contains("task")) throw ConfigError("config needs a \"task\" key");
  auto c = default_config(json_string(j.at("task"), "task"));
  for (const auto& [k, v] : j.items()) {
    if (k == "task") continue;
    else if (k == "group") c.group = json_string(v, k);
    else if (k == "layer_kind") c.layer_kind = layer_kind_name(parse_layer_kind(json_string(v, k)));
    else if (k == "filter_banks") c.filter_banks = json_size(v, k);
    else if (k == "channels") c.channels = json_size(v, k);
    else if (k == "kernel_size") c.kernel_size = json_size(v, k);
    else if (k == "epochs") c.epochs = json_size(v, k);
    else if (k == "learning_rate") c.learning_rate = json_double(v, k);
    else if (k == "optimizer") c.optimizer = json_string(v, k);
    else if (k == "seed") c.seed = json_size(v, k);
    else if (k == "precision") c.precision = json_string(v, k);
    else if (k == "data") c.data = json_string(v, k);
    else if (k == "out_dir") c.out_dir = json_string(v, k);
    else if (k == "grid_size") c.grid_size = json_size(v, k);
    else if (k == "delta") c.delta = json_double(v, k);
    else if (k == "blocks") c.blocks = json_size(v, k);
    else if (k == "batch_size") c.batch_size = json_size(v, k);
    else if (k == "separable") c.separable = json_bool(v, k);
    else if (k == "relax_lift") c.relax_lift = json_bool(v, k);
    else if (k == "n_samples") c.n_samples = json_size(v, k);
    else if (k == "tau") c.tau = json_double(v, k);
    else throw ConfigError("unknown config key '" + k + "'");
  }
  validate(c);
  return c;
}

inline Json config_to_json(const ExperimentConfig& c) {
  return Json{{"task", c.task},
              {"group", c.group},
              {"layer_kind", c.layer_kind},
              {"filter_banks", c.filter_banks},
              {"channels", c.channels},
              {"kernel_size", c.kernel_size},
              {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"optimizer", c.optimizer},
              {"seed", c.seed},
              {"precision", c.precision},
              {"data", c.data},
              {"out_dir", c.out_dir},
              {"grid_size", c.grid_size},
              {"delta", c.delta},
              {"blocks", c.blocks},
              {"batch_size", c.batch_size},
              {"separable", c.separable},
              {"relax_lift", c.relax_lift},
              {"n_samples", c.n_samples},
              {"tau", c.tau}};
}

inline Json parse_json_file(const std::string& path) {
  const auto bytes = read_file(path);
  try {
    return Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::parse_error& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what(), e.byte);
  }
}

inline ExperimentConfig load_config(const std::string& path) { return config_from_json(parse_json_file(path)); }

// ---------------------------------------------------------------------------
// Data

inline FlowParams flow_params(const ExperimentConfig& c) {
  FlowParams p;
  p.size = c.grid_size;
  p.mode = parse_flow_mode(c.task.substr(5));
  return p;
}

/// The single (input, target) pair of a discovery task.
inline Sample discovery_sample(const ExperimentConfig& c) {
  if (c.family() == TaskFamily::shape) return gen_shape2d(parse_shape_task(c.task), c.grid_size);
  if (c.family() == TaskFamily::perovskite) {
    const auto phase = parse_phase(c.task.substr(9));
    return {rasterize(gen_perovskite(Phase::cubic, 0.0, c.grid_size)), rasterize(gen_perovskite(phase, c.delta, c.grid_size))};
  }
  throw ConfigError(c.task + " is not a discovery task");
}

inline Dataset generate_data(const ExperimentConfig& c) {
  if (c.is_superres()) return gen_flow_dataset(c.seed, c.n_samples, flow_params(c));
  Dataset ds;
  ds.samples.push_back(discovery_sample(c));
  return ds;
}

/// RGT1 file with stacked "inputs" [N, ...] and "targets" [N, ...].
inline void save_data(const std::string& path, const Dataset& ds) {
  if (ds.samples.empty()) throw DataError("cannot save an empty dataset");
  std::vector<Tensor<double>> in, out;
  for (const auto& s : ds.samples) {
    in.push_back(s.input);
    out.push_back(s.target);
  }
  write_rgt1(path, {{"inputs", stack(std::span<const Tensor<double>>(in))},
                    {"targets", stack(std::span<const Tensor<double>>(out))}});
}

inline Dataset load_data(const std::string& path) {
  const auto items = read_rgt1(path);
  const auto in = find_tensor(items, "inputs").as_double(), out = find_tensor(items, "targets").as_double();
  if (in.rank() < 2 || out.rank() < 2 || in.dim(0) != out.dim(0) || in.dim(0) == 0)
    throw DataError("'" + path + "': inputs " + shape_str(in.shape()) + " and targets " + shape_str(out.shape()) +
                    " must stack the same positive number of samples");
  Dataset ds;
  const Shape si(in.shape().begin() + 1, in.shape().end()), so(out.shape().begin() + 1, out.shape().end());
  const std::size_t ni = numel(si), no = numel(so);
  for (std::size_t i = 0; i < in.dim(0); ++i)
    ds.samples.push_back({Tensor<double>(si, std::vector<double>(in.values().begin() + static_cast<long>(i * ni),
                                                                 in.values().begin() + static_cast<long>((i + 1) * ni))),
                          Tensor<double>(so, std::vector<double>(out.values().begin() + static_cast<long>(i * no),
                                                                 out.values().begin() + static_cast<long>((i + 1) * no)))});
  return ds;
}

/// Per-sample input and target shapes of a task.
inline std::pair<Shape, Shape> expected_shapes(const ExperimentConfig& c) {
  const std::size_t n = c.grid_size;
  if (c.is_superres()) return {Shape{9, n / 4, n / 4, n / 4}, Shape{3, n, n, n}};
  Shape s{c.family() == TaskFamily::shape ? std::size_t(1) : std::size_t(3), n, n};
  if (c.family() == TaskFamily::perovskite) s.push_back(n);
  return {s, s};
}

/// Loads c.data when set, otherwise generates from the config. The result
/// is checked against the shapes the task's model expects.
inline Dataset experiment_data(const ExperimentConfig& c) {
  auto ds = c.data.empty() ? generate_data(c) : load_data(c.data);
  const auto [si, so] = expected_shapes(c);
  for (const auto& s : ds.samples)
    if (s.input.shape() != si || s.target.shape() != so)
      throw DataError("data sample has input " + shape_str(s.input.shape()) + " / target " + shape_str(s.target.shape()) +
                      ", task " + c.task + " with grid_size " + std::to_string(c.grid_size) + " expects " +
                      shape_str(si) + " / " + shape_str(so));
  if (!c.is_superres() && ds.samples.size() != 1) throw DataError("discovery tasks train on exactly one sample");
  if (c.is_superres() && ds.indices(Split::train).empty()) throw DataError("flow data has no training samples");
  return ds;
}

// ---------------------------------------------------------------------------
// Models

inline DiscoveryConfig discovery_config(const ExperimentConfig& c) {
  const std::size_t io = c.family() == TaskFamily::shape ? 1 : 3;
  return DiscoveryConfig{c.group, io, c.channels, io, c.kernel_size, c.filter_banks};
}

/// The conv kind is widened until its parameter count matches the relaxed
/// model built from the same config.
inline SuperResConfig superres_config(const ExperimentConfig& c) {
  SuperResConfig s;
  s.kind = parse_layer_kind(c.layer_kind);
  s.group = c.group;
  s.channels = c.channels;
  s.blocks = c.blocks;
  s.kernel_size = c.kernel_size;
  s.banks = c.filter_banks;
  s.separable = c.separable;
  s.relax_lift = c.relax_lift;
  if (s.kind == LayerKind::conv) {
    SuperResConfig ref = s;
    ref.kind = LayerKind::relaxed;
    return matched_conv_config(s, count_parameters(ref));
  }
  return s;
}

template <typename T>
std::unique_ptr<Model<T>> build_model(const ExperimentConfig& c) {
  if (c.is_superres()) return std::make_unique<SuperResNet<T>>(superres_config(c));
  return std::make_unique<DiscoveryNet<T>>(discovery_config(c));
}

// ---------------------------------------------------------------------------
// Runs

struct RunResult {
  ExperimentConfig config;
  TrainStats stats;
  std::size_t parameters = 0;
  std::optional<SymmetryReport> report;
  double trilinear_val = std::numeric_limits<double>::quiet_NaN();
  double trilinear_test = std::numeric_limits<double>::quiet_NaN();
  std::vector<NamedTensor> checkpoint;
};

template <typename T>
std::optional<SymmetryReport> report_of(const Model<T>& m, const ExperimentConfig& c) {
  const auto rw = m.relaxed_weights();
  if (rw.empty()) return std::nullopt;
  return weight_report(rw, FiniteGroup::from_name(c.group), c.tau);
}

template <typename T>
RunResult run_typed(const ExperimentConfig& c, const Dataset& ds, const std::function<void(std::size_t, double)>& on_epoch) {
  auto model = build_model<T>(c);
  Rng rng(c.seed);
  model->init(rng);
  TrainOptions opt;
  opt.epochs = c.epochs;
  opt.learning_rate = c.learning_rate;
  opt.optimizer = parse_optimizer(c.optimizer);
  opt.batch_size = c.batch_size;
  opt.seed = c.seed;
  opt.on_epoch = on_epoch;
  RunResult r;
  r.config = c;
  r.parameters = model->parameter_count();
  if (c.is_superres()) {
    r.stats = train_superres(*model, ds, opt);
    r.trilinear_val = trilinear_l1(ds, ds.indices(Split::val));
    r.trilinear_test = trilinear_l1(ds, ds.indices(Split::test));
  } else {
    r.stats = train_discovery(*model, ds.samples.at(0), opt);
  }
  r.report = report_of(*model, c);
  r.checkpoint = save_state(*model);
  return r;
}

/// Builds, seeds and trains the model the config describes on `ds`.
inline RunResult run_experiment(const ExperimentConfig& c, const Dataset& ds,
                                const std::function<void(std::size_t, double)>& on_epoch = {}) {
  validate(c);
  return c.precision == "float32" ? run_typed<float>(c, ds, on_epoch) : run_typed<double>(c, ds, on_epoch);
}

inline RunResult run_experiment(const ExperimentConfig& c, const std::function<void(std::size_t, double)>& on_epoch = {}) {
  return run_experiment(c, experiment_data(c), on_epoch);
}

// ---------------------------------------------------------------------------
// Artifacts

inline std::string manifest_path(const std::string& checkpoint) { return checkpoint + ".json"; }

/// preserved.csv: group,tau,preserved_set,order,closed.
inline CsvTable preserved_csv(const SymmetryReport& rep) {
  CsvTable t({"group", "tau", "preserved_set", "order", "closed"});
  t.add_row({rep.group_label, format_number(rep.tau), rep.preserved_names(), std::to_string(rep.preserved.size()),
             rep.raw_closed ? "1" : "0"});
  return t;
}

/// Relaxed weights as an image: one row per (layer, bank), one column per element.
inline Tensor<double> weights_image(const SymmetryReport& rep) {
  const std::size_t n = rep.element_names.size(), rows = rep.rows.size() / n;
  Tensor<double> img(Shape{rows, n}, 0.0);
  auto v = img.mutable_values();
  for (std::size_t i = 0; i < rep.rows.size(); ++i) v[i] = rep.rows[i].weight;
  return img;
}

/// Channel c of a [C, n, n] or [C, n, n, n] field; 3D fields give their
/// middle slice along the last axis.
inline Tensor<double> preview_image(const Tensor<double>& field, std::size_t c = 0) {
  if (field.rank() != 3 && field.rank() != 4) throw ShapeError("preview_image: expected [C, n, n(, n)], got " + shape_str(field.shape()));
  if (c >= field.dim(0)) throw IndexError("preview_image: channel " + std::to_string(c) + " out of range");
  const Shape s(field.shape().begin() + 1, field.shape().end());
  const std::size_t V = numel(s);
  Tensor<double> ch(s, std::vector<double>(field.values().begin() + static_cast<long>(c * V),
                                           field.values().begin() + static_cast<long>((c + 1) * V)));
  return field.rank() == 3 ? ch : slice_last_axis(ch, s[2] / 2);
}

inline void write_report(const std::string& dir, const SymmetryReport& rep) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  rep.weights_csv().write((d / "weights.csv").string());
  rep.spectrum_csv().write((d / "spectrum.csv").string());
  rep.summary_csv().write((d / "summary.csv").string());
  preserved_csv(rep).write((d / "preserved.csv").string());
  export_pgm(weights_image(rep), (d / "weights.pgm").string());
}

inline Json run_summary(const RunResult& r) {
  Json s{{"parameters", r.parameters},
         {"epochs_run", r.stats.train_loss.size()},
         {"final_train_loss", r.stats.train_loss.empty() ? Json(nullptr) : Json(r.stats.train_loss.back())},
         {"test_mae", r.stats.test_mae},
         {"wall_seconds", r.stats.wall_seconds}};
  if (!r.stats.val_loss.empty()) s["final_val_l1"] = r.stats.val_loss.back();
  if (!std::isnan(r.trilinear_val)) {
    s["trilinear_val_l1"] = r.trilinear_val;
    s["trilinear_test_l1"] = r.trilinear_test;
  }
  if (r.report) {
    s["preserved_set"] = r.report->preserved_names();
    s["mean_deviation"] = r.report->mean_deviation();
    s["max_deviation"] = r.report->max_deviation();
  }
  return s;
}

/// checkpoint.rgt1 plus its JSON manifest, train_log.csv, summary.json and,
/// for relaxed models, the symmetry report.
inline std::string write_run(const RunResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  const std::string ckpt = (d / "checkpoint.rgt1").string();
  write_rgt1(ckpt, r.checkpoint);
  const Json manifest{{"format", "rgt1-checkpoint"}, {"config", config_to_json(r.config)}, {"summary", run_summary(r)}};
  write_file_atomic(manifest_path(ckpt), manifest.dump(2) + "\n");
  CsvTable log({"epoch", "train_loss", "val_loss"});
  for (std::size_t e = 0; e < r.stats.train_loss.size(); ++e)
    log.add_row({std::to_string(e), format_number(r.stats.train_loss[e]),
                 e < r.stats.val_loss.size() ? format_number(r.stats.val_loss[e]) : ""});
  log.write((d / "train_log.csv").string());
  write_file_atomic((d / "summary.json").string(), run_summary(r).dump(2) + "\n");
  if (r.report) write_report(dir, *r.report);
  return ckpt;
}

struct Checkpoint {
  ExperimentConfig config;
  std::vector<NamedTensor> tensors;
};

inline Checkpoint read_checkpoint(const std::string& path) {
  const auto m = parse_json_file(manifest_path(path));
  if (!m.is_object() || m.value("format", "") != "rgt1-checkpoint" || !m.contains("config"))
    throw DataError("'" + manifest_path(path) + "' is not a checkpoint manifest");
  return {config_from_json(m.at("config")), read_rgt1(path)};
}

/// Rebuilds the model in double precision and loads the checkpoint into it.
inline std::unique_ptr<Model<double>> restore_model(const Checkpoint& ck) {
  auto m = build_model<double>(ck.config);
  load_state(*m, ck.tensors);
  return m;
}

// ---------------------------------------------------------------------------
// Checks

/// Equivariance of a restored model on random inputs. Discovery models act
/// on scalar grids; super-resolution models on stacked velocity vectors.
inline EquivarianceError model_equivariance(const ExperimentConfig& c, const Model<double>& m, Rng& rng, int trials = 3) {
  const auto G = FiniteGroup::from_name(c.group);
  auto fn = [&m](const Tensor<double>& x) { return m.forward(x); };
  if (!c.is_superres()) {
    Shape s{1, discovery_config(c).in_channels};
    for (int a = 0; a < G.dim(); ++a) s.push_back(c.grid_size);
    return equivariance_error_random<double>(fn, G, s, rng, trials);
  }
  if (parse_layer_kind(c.layer_kind) == LayerKind::conv) throw ConfigError("conv models carry no group to check");
  const std::size_t n = c.grid_size / 4;
  EquivarianceError e;
  e.per_element.assign(G.order(), 0.0);
  e.input = std::to_string(trials) + " random velocity inputs [1, 9, " + std::to_string(n) + "^3]";
  NoGradGuard ng;
  for (int t = 0; t < trials; ++t) {
    Tensor<double> x(Shape{1, 9, n, n, n});
    for (auto& v : x.mutable_values()) v = rng.uniform(-1, 1);
    const auto y = fn(x);
    for (std::size_t g = 0; g < G.order(); ++g) {
      const double d = max_abs_diff(fn(transform_vector_grid(G, g, x, 1)), transform_vector_grid(G, g, y, 1));
      e.per_element[g] = std::max(e.per_element[g], d);
      e.max = std::max(e.max, d);
    }
  }
  return e;
}

struct GradientAudit {
  GradientSymmetryResult symmetry;
  std::vector<std::pair<std::string, double>> finite_difference;  // parameter, relative error
  double worst_relative_error = 0;
};

/// Gradient-equality classes at equivariant initialisation together with a
/// central-difference audit of every relaxed-weight gradient. Double precision.
inline GradientAudit gradient_audit(const ExperimentConfig& c) {
  if (c.is_superres()) throw ConfigError("check-grad runs on discovery tasks");
  DiscoveryNet<double> net(discovery_config(c));
  Rng rng(c.seed);
  net.init(rng);
  const auto s = discovery_sample(c);
  const auto X = unsqueeze0(s.input), Y = unsqueeze0(s.target);
  auto fn = [&net](const Tensor<double>& x) { return net.forward(x); };
  GradientAudit a;
  a.symmetry = gradient_symmetry_check<double>(fn, net.relaxed_weights(), net.group(), X, Y);
  for (const auto& lw : net.relaxed_weights()) {
    auto w = lw.w;
    for (auto& p : net.parameters()) p.tensor.zero_grad();
    backward(mse_loss(net.forward(X), Y));
    const auto analytic = w.grad_tensor();
    NoGradGuard ng;
    const auto numeric = finite_diff_grad<double>([&] { return mse_loss(net.forward(X), Y).item(); }, w);
    const double err = relative_error(analytic, numeric);
    a.finite_difference.push_back({lw.layer + ".w", err});
    a.worst_relative_error = std::max(a.worst_relative_error, err);
  }
  return a;
}

}  // namespace rgc
