// mrecon: scene generation, mock evaluation and diagnostics.
//
// Every report carries the full parameter echo except scheduling (--workers)
// and output location (--out, --json), so reruns are byte-identical.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mrecon/mrecon.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mrecon;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One row per flag; drives CLI11 registration, config overrides and the echo.
struct Param {
  std::string name;
  std::variant<double*, int*, std::uint64_t*, std::string*, bool*> target;
  bool echo = true;
};

class ParamTable {
 public:
  explicit ParamTable(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& name, T* target, const std::string& help, bool echo = true) {
    rows_.push_back({name, target, echo});
    if constexpr (std::is_same_v<T, bool>) return app_->add_flag("--" + name, *target, help);
    else return app_->add_option("--" + name, *target, help)->capture_default_str();
  }

  /// Keys are flag names without the leading dashes. Values replace whatever
  /// was given on the command line.
  void apply(const json& config) {
    if (!config.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [key, value] : config.items()) {
      auto it = std::find_if(rows_.begin(), rows_.end(), [&](const Param& p) { return p.name == key; });
      if (it == rows_.end() || key == "config") throw UsageError("unknown config key '" + key + "'");
      try {
        std::visit([&](auto* ptr) { *ptr = value.get<std::remove_pointer_t<decltype(ptr)>>(); }, it->target);
      } catch (const json::exception&) {
        throw UsageError("config key '" + key + "' has the wrong type");
      }
    }
  }

  json echo() const {
    json out = json::object();
    for (const auto& p : rows_) {
      if (p.echo) std::visit([&](auto* ptr) { out[p.name] = *ptr; }, p.target);
    }
    return out;
  }

 private:
  CLI::App* app_;
  std::vector<Param> rows_;
};

struct Options {
  std::string config;
  std::string out;
  bool json_stdout = false;
  int workers = default_workers();
  std::uint64_t seed = 0;
  int scenes = 0;
  int gen_scenes = 10;

  int views = 2, width = 630, height = 476;

  std::string bundles, bundle;
  int view = 0;

  NoiseModel noise;
  double threshold_translation = 0.03, threshold_rotation = 0.03;
  double threshold_abs_translation = 0.01, threshold_abs_rotation = 0.01;
  double threshold_mask = 0.5;
  std::string weights_file;

  std::string keypoints_file, heatmap_file;
  double temperature = 1.0;

  int trials = 5;
  double tolerance = 1e-4;
};

void add_common(ParamTable& t, Options& o) {
  t.add("config", &o.config, "JSON file whose keys override the flags", false);
  t.add("out", &o.out, "output directory", false);
  t.add("json", &o.json_stdout, "print the machine-readable report instead of the text summary", false);
}

void add_noise(ParamTable& t, Options& o) {
  t.add("noise-depth", &o.noise.depth, "depth noise sigma, meters");
  t.add("noise-coord", &o.noise.coord, "normalized coordinate noise sigma");
  t.add("noise-translation", &o.noise.translation, "pose translation noise sigma, meters");
  t.add("noise-rotation", &o.noise.rotation, "pose rotation noise sigma, radians");
  t.add("noise-scale", &o.noise.scale, "log-scale noise sigma");
  t.add("noise-heatmap-blur", &o.noise.heatmap_blur, "extra heatmap blur sigma, pixels");
  t.add("noise-mask-flip", &o.noise.mask_flip, "mask entry flip probability");
  t.add("noise-keypoint", &o.noise.keypoint, "2D keypoint noise sigma, pixels");
}

void add_eval(ParamTable& t, Options& o) {
  add_common(t, o);
  t.add("bundles", &o.bundles, "scene tree written by gen-scenes")->required();
  t.add("seed", &o.seed, "mock predictor seed");
  t.add("scenes", &o.scenes, "evaluate the first N scenes (0 = all)");
  t.add("workers", &o.workers, "worker threads", false);
  t.add("weights-file", &o.weights_file, "JSON loss weights");
  add_noise(t, o);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingFile(p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + p.string());
  out << text;
  if (!out) throw Error("write failed: " + p.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
  }
}

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

/// Writes report.json under --out and prints either the JSON or the text.
void emit(const Options& o, const json& report, const std::string& text) {
  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_text_file(fs::path(o.out) / "report.json", report.dump(2) + "\n");
  }
  if (o.json_stdout) std::cout << report.dump(2) << "\n";
  else std::cout << text;
}

LossWeights load_weights(const Options& o) {
  if (o.weights_file.empty()) return {};
  return LossWeights::from_json(read_json_file(o.weights_file));
}

std::vector<std::string> manifest_paths(const Options& o) {
  const json m = read_json_file(fs::path(o.bundles) / "manifest.json");
  std::vector<std::string> out;
  try {
    for (const auto& e : m.at("scenes")) out.push_back(e.at("path").get<std::string>());
  } catch (const json::exception& e) {
    throw FormatError(o.bundles + "/manifest.json: " + e.what());
  }
  if (o.scenes < 0) throw UsageError("--scenes must be >= 0");
  if (o.scenes > 0) {
    if (static_cast<std::size_t>(o.scenes) > out.size()) {
      throw UsageError("--scenes " + std::to_string(o.scenes) + " exceeds the " + std::to_string(out.size()) +
                       " scenes in the manifest");
    }
    out.resize(static_cast<std::size_t>(o.scenes));
  }
  if (out.empty()) throw UsageError("no scenes to evaluate");
  return out;
}

json failure_list(const std::vector<std::string>& names, const std::vector<std::exception_ptr>& errors) {
  json out = json::array();
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    std::string msg;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      msg = e.what();
    } catch (...) {
      msg = "unknown error";
    }
    out.push_back({{"scene", names[i]}, {"error", msg}});
  }
  return out;
}

std::string failure_text(const json& failures) {
  std::string s;
  for (const auto& f : failures) s += "  FAILED " + f["scene"].get<std::string>() + ": " + f["error"].get<std::string>() + "\n";
  return s;
}

// ---- gen-scenes -----------------------------------------------------------

int run_gen(const Options& o, const json& echo) {
  if (o.out.empty()) throw UsageError("gen-scenes needs --out");
  if (o.gen_scenes <= 0) throw UsageError("--scenes must be positive");
  SceneConfig cfg;
  cfg.views = o.views;
  cfg.camera.width = o.width;
  cfg.camera.height = o.height;
  cfg.validate();
  ensure_dir(o.out);

  const auto n = static_cast<std::size_t>(o.gen_scenes);
  std::vector<std::string> names(n);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%05zu", i);
    names[i] = buf;
  }
  auto outcome = parallel_map<json>(n, o.workers, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(o.seed, i);
    const SceneBundle b = generate_bundle(cfg, seed);
    const ConsistencyReport c = check_consistency(b);
    constexpr double kTol = 1e-9;
    if (!(c.max_world_residual <= kTol && c.max_canonical_residual <= kTol)) {
      throw Error("consistency self-check failed: residual " + fmt(std::max(c.max_world_residual, c.max_canonical_residual)));
    }
    save_bundle(b, fs::path(o.out) / names[i]);
    return json{{"path", names[i]}, {"seed", seed}, {"views", b.views.size()}, {"valid_pixels", c.checked_pixels},
                {"max_residual", std::max(c.max_world_residual, c.max_canonical_residual)}};
  });

  json manifest{{"format_version", kBundleFormatVersion}, {"command", "gen-scenes"}, {"config", echo}};
  manifest["scenes"] = json::array();
  for (std::size_t i = 0; i < n; ++i) if (outcome.ok(i)) manifest["scenes"].push_back(outcome.values[i]);
  manifest["failures"] = failure_list(names, outcome.errors);
  write_text_file(fs::path(o.out) / "manifest.json", manifest.dump(2) + "\n");

  const std::size_t failed = manifest["failures"].size();
  std::string text = "generated " + std::to_string(n - failed) + "/" + std::to_string(n) + " scenes in " + o.out + "\n" +
                     failure_text(manifest["failures"]);
  if (o.json_stdout) std::cout << manifest.dump(2) << "\n";
  else std::cout << text;
  return failed ? 1 : 0;
}

// ---- evaluation ------------------------------------------------------------

struct SceneEval {
  json entry;
  PointMapReport points;
  std::vector<PoseReport> relative;
  AbsolutePoseReport direct, pnp;
  LossBreakdown losses;
};

SceneEval evaluate_scene(const Options& o, const LossWeights& w, const std::string& name, bool pose) {
  const SceneBundle b = load_bundle(fs::path(o.bundles) / name);
  const Prediction p = mock_predict(b, o.noise, o.seed);
  const LossInputs gt = ground_truth(b);
  SceneEval e;
  e.losses = total_loss(p.outputs, gt, w);
  e.entry = {{"scene", name}, {"seed", b.seed}, {"losses", e.losses.to_json()}};
  if (!pose) {
    e.points = point_map_metrics(p.outputs.points, gt.points, p.outputs.similarity.scale, gt.similarity.scale);
    e.entry["metrics"] = e.points.to_json();
    return e;
  }
  const PoseThresholds rel_th{o.threshold_translation, o.threshold_rotation};
  const PoseThresholds abs_th{o.threshold_abs_translation, o.threshold_abs_rotation};
  json rel = json::array();
  for (std::size_t i = 1; i < b.views.size(); ++i) {
    e.relative.push_back(relative_pose_metrics(p.outputs.relative_poses[i], gt.relative_poses[i], rel_th));
    rel.push_back(e.relative.back().to_json());
  }
  e.direct = absolute_pose_metrics(p.outputs.similarity.rigid, gt.similarity.rigid, abs_th);
  const PnPResult sol = solve_pnp(b.keypoints3d, p.outputs.keypoints.front(), b.views.front().intrinsics);
  const Similarity refined = refine_similarity(p.outputs.similarity, sol.extrinsic);
  e.pnp = absolute_pose_metrics(refined.rigid, gt.similarity.rigid, abs_th);
  e.entry["relative"] = rel;
  e.entry["absolute_direct"] = e.direct.to_json();
  e.entry["absolute_pnp"] = e.pnp.to_json();
  e.entry["pnp_reprojection_error"] = sol.reprojection_error;
  return e;
}

json mean_losses(const std::vector<const SceneEval*>& ok) {
  LossBreakdown m;
  for (const auto* e : ok) {
    m.point += e->losses.point;
    m.normal += e->losses.normal;
    m.mask += e->losses.mask;
    m.relative_pose += e->losses.relative_pose;
    m.similarity += e->losses.similarity;
    m.keypoint += e->losses.keypoint;
    for (int i = 0; i < 6; ++i) m.weighted[i] += e->losses.weighted[i];
    m.total += e->losses.total;
  }
  const double n = static_cast<double>(ok.size());
  for (double* v : {&m.point, &m.normal, &m.mask, &m.relative_pose, &m.similarity, &m.keypoint, &m.total}) *v /= n;
  for (double& v : m.weighted) v /= n;
  return m.to_json();
}

int run_eval(const Options& o, const json& echo, bool pose) {
  const LossWeights w = load_weights(o);
  const auto names = manifest_paths(o);
  auto outcome = parallel_map<SceneEval>(names.size(), o.workers,
                                         [&](std::size_t i) { return evaluate_scene(o, w, names[i], pose); });

  const char* command = pose ? "eval-pose" : "eval-pointmap";
  json report{{"command", command}, {"config", echo}, {"weights", w.to_json()}};
  report["scenes"] = json::array();
  std::vector<const SceneEval*> ok;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!outcome.ok(i)) continue;
    ok.push_back(&outcome.values[i]);
    report["scenes"].push_back(outcome.values[i].entry);
  }
  report["failures"] = failure_list(names, outcome.errors);

  std::ostringstream text;
  text << command << ": " << ok.size() << "/" << names.size() << " scenes evaluated\n";
  json summary;
  if (!ok.empty()) {
    summary["scenes"] = ok.size();
    summary["losses"] = mean_losses(ok);
    if (!pose) {
      std::vector<PointMapReport> pm;
      for (const auto* e : ok) pm.push_back(e->points);
      const PointMapReport agg = aggregate(pm);
      summary["metrics"] = agg.to_json();
      text << "  point error  " << fmt(agg.point_err) << "\n  normal error " << fmt(agg.normal_err)
           << "\n  scale error  " << fmt(agg.scale_err) << "\n";
    } else {
      std::vector<PoseReport> rel;
      std::vector<AbsolutePoseReport> direct, pnp;
      for (const auto* e : ok) {
        rel.insert(rel.end(), e->relative.begin(), e->relative.end());
        direct.push_back(e->direct);
        pnp.push_back(e->pnp);
      }
      if (rel.empty()) {
        report["failures"].push_back({{"scene", "*"}, {"error", "relative metrics need binocular scenes"}});
        summary["relative"] = nullptr;
      } else {
        const PoseReport r = aggregate(rel);
        summary["relative"] = r.to_json();
        text << "  RTE " << fmt(r.translation_err) << "  RRE " << fmt(r.rotation_err) << "  RTA@"
             << fmt(r.thresholds.translation) << " " << fmt(r.translation_acc) << "  RRA@"
             << fmt(r.thresholds.rotation) << " " << fmt(r.rotation_acc) << "\n";
      }
      const auto d = aggregate(direct), q = aggregate(pnp);
      summary["absolute_direct"] = d.to_json();
      summary["absolute_pnp"] = q.to_json();
      for (const auto& [label, a] : {std::pair{"direct", d}, std::pair{"pnp", q}}) {
        text << "  " << label << ": ATE " << fmt(a.translation_err) << "  ARE " << fmt(a.rotation_err) << "  ATA@"
             << fmt(a.thresholds.translation) << " " << fmt(a.translation_acc) << "  ARA@"
             << fmt(a.thresholds.rotation) << " " << fmt(a.rotation_acc) << "\n";
      }
    }
    text << "  total loss " << fmt(summary["losses"]["total"].get<double>()) << "\n";
  }
  report["summary"] = summary;
  text << failure_text(report["failures"]);
  emit(o, report, text.str());
  return report["failures"].empty() ? 0 : 1;
}

// ---- solve-pnp ---------------------------------------------------------------

Keypoints2D read_keypoints_file(const std::string& path) {
  json j = read_json_file(path);
  if (j.is_object()) j = j.at("keypoints");
  Keypoints2D out;
  try {
    for (const auto& p : j) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  } catch (const json::exception& e) {
    throw FormatError(path + ": keypoints must be [[u, v], ...]: " + e.what());
  }
  return out;
}

int run_solve_pnp(const Options& o, const json& echo) {
  const SceneBundle b = load_bundle(o.bundle);
  if (o.view < 0 || o.view >= static_cast<int>(b.views.size())) throw UsageError("--view out of range");
  const ViewData& v = b.views[static_cast<std::size_t>(o.view)];
  if (!o.keypoints_file.empty() && !o.heatmap_file.empty()) throw UsageError("give --keypoints or --heatmap, not both");
  Keypoints2D kps = v.keypoints;
  std::string source = "bundle";
  if (!o.keypoints_file.empty()) {
    kps = read_keypoints_file(o.keypoints_file);
    source = "keypoints-file";
  } else if (!o.heatmap_file.empty()) {
    kps = soft_argmax(load_raster<double>(o.heatmap_file), o.temperature);
    source = "heatmap";
  }
  const PnPResult r = solve_pnp(b.keypoints3d, kps, v.intrinsics);
  const RigidTransform stored = invert(v.pose_robot);
  const double t_err = (r.extrinsic.translation - stored.translation).norm();
  const double r_err = rotation_angle(r.extrinsic.rotation, stored.rotation);

  json kj = json::array();
  for (const auto& k : kps) kj.push_back({k.x(), k.y()});
  json report{{"command", "solve-pnp"},
              {"config", echo},
              {"keypoint_source", source},
              {"keypoints_2d", kj},
              {"extrinsic", detail::pose_to_json(r.extrinsic)},
              {"camera_to_base", detail::pose_to_json(invert(r.extrinsic))},
              {"reprojection_error", r.reprojection_error},
              {"iterations", r.iterations},
              {"cost_history", r.cost_history},
              {"stored_translation_err", t_err},
              {"stored_rotation_err", r_err}};
  std::ostringstream text;
  text << "solve-pnp: " << kps.size() << " keypoints from " << source << ", " << r.iterations << " iterations\n"
       << "  reprojection error " << fmt(r.reprojection_error) << " px\n"
       << "  vs stored pose: translation " << fmt(t_err) << " m, rotation " << fmt(r_err) << " rad\n";
  emit(o, report, text.str());
  return 0;
}

// ---- compose-points -----------------------------------------------------------

int run_compose(const Options& o, const json& echo) {
  const SceneBundle b = load_bundle(o.bundle);
  if (o.view < 0 || o.view >= static_cast<int>(b.views.size())) throw UsageError("--view out of range");
  const ViewData& v = b.views[static_cast<std::size_t>(o.view)];
  NoiseModel masks_only;
  masks_only.mask_flip = o.noise.mask_flip;
  const Prediction p = mock_predict(b, masks_only, o.seed, false);
  const LabeledPointMap lp =
      compose_masked_points(v.depth, v.coords, p.outputs.masks[static_cast<std::size_t>(o.view)], o.threshold_mask);

  json counts{{"total", lp.count()}};
  for (Part part : kParts) counts[part_name(part)] = lp.count(part);
  json report{{"command", "compose-points"}, {"config", echo}, {"counts", counts},
              {"files", {{"points", "points.r3rb"}, {"labels", "labels.r3rb"}}}};
  if (!o.out.empty()) {
    ensure_dir(o.out);
    save_raster((fs::path(o.out) / "points.r3rb").string(), lp.points.values, DType::F64);
    save_raster((fs::path(o.out) / "labels.r3rb").string(), lp.labels, DType::U8);
  }
  std::ostringstream text;
  text << "compose-points: " << lp.count() << " labelled points";
  for (Part part : kParts) text << ", " << part_name(part) << " " << lp.count(part);
  text << "\n";
  emit(o, report, text.str());
  return 0;
}

// ---- check-grads --------------------------------------------------------------

int run_check_grads(const Options& o, const json& echo) {
  if (o.trials <= 0) throw UsageError("--trials must be positive");
  json results = json::array();
  std::ostringstream text;
  bool all_ok = true;
  for (const auto& name : gradient_check_names()) {
    json row{{"name", name}};
    try {
      const GradientCheckResult r = check_named_gradient(name, o.seed, o.trials);
      const bool ok = r.max_relative_error < o.tolerance;
      row["max_relative_error"] = r.max_relative_error;
      row["checked"] = r.checked;
      row["pass"] = ok;
      all_ok = all_ok && ok;
      text << "  " << (ok ? "ok   " : "FAIL ") << name << "  max rel err " << fmt(r.max_relative_error, 3) << "\n";
    } catch (const std::exception& e) {
      row["error"] = e.what();
      row["pass"] = false;
      all_ok = false;
      text << "  FAIL " << name << "  " << e.what() << "\n";
    }
    results.push_back(row);
  }
  json report{{"command", "check-grads"}, {"config", echo}, {"results", results}, {"pass", all_ok}};
  emit(o, report, "check-grads (tolerance " + fmt(o.tolerance, 3) + ")\n" + text.str());
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mrecon: metric-scale multi-view reconstruction toolkit"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-scenes", "render ground-truth scene bundles");
  ParamTable gen_t(gen);
  add_common(gen_t, o);
  gen_t.add("seed", &o.seed, "base seed");
  gen_t.add("scenes", &o.gen_scenes, "number of scenes");
  gen_t.add("views", &o.views, "cameras per scene (1 or 2)");
  gen_t.add("width", &o.width, "image width");
  gen_t.add("height", &o.height, "image height");
  gen_t.add("workers", &o.workers, "worker threads", false);

  auto* evp = app.add_subcommand("eval-pointmap", "point map metrics of the mock predictor");
  ParamTable evp_t(evp);
  add_eval(evp_t, o);

  auto* evq = app.add_subcommand("eval-pose", "relative and absolute pose metrics of the mock predictor");
  ParamTable evq_t(evq);
  add_eval(evq_t, o);
  evq_t.add("threshold-translation", &o.threshold_translation, "relative translation threshold, meters");
  evq_t.add("threshold-rotation", &o.threshold_rotation, "relative rotation threshold, radians");
  evq_t.add("threshold-abs-translation", &o.threshold_abs_translation, "absolute translation threshold, meters");
  evq_t.add("threshold-abs-rotation", &o.threshold_abs_rotation, "absolute rotation threshold, radians");

  auto* pnp = app.add_subcommand("solve-pnp", "camera extrinsic from keypoints");
  ParamTable pnp_t(pnp);
  add_common(pnp_t, o);
  pnp_t.add("bundle", &o.bundle, "scene bundle directory")->required();
  pnp_t.add("view", &o.view, "view index");
  pnp_t.add("keypoints", &o.keypoints_file, "JSON [[u, v], ...] keypoints");
  pnp_t.add("heatmap", &o.heatmap_file, "keypoint heatmap raster (H x W x N)");
  pnp_t.add("temperature", &o.temperature, "soft-argmax temperature");

  auto* comp = app.add_subcommand("compose-points", "masked, labelled point map of one view");
  ParamTable comp_t(comp);
  add_common(comp_t, o);
  comp_t.add("bundle", &o.bundle, "scene bundle directory")->required();
  comp_t.add("view", &o.view, "view index");
  comp_t.add("seed", &o.seed, "mask noise seed");
  comp_t.add("noise-mask-flip", &o.noise.mask_flip, "mask entry flip probability");
  comp_t.add("threshold-mask", &o.threshold_mask, "mask binarization threshold");

  auto* grads = app.add_subcommand("check-grads", "finite-difference gradient suite");
  ParamTable grads_t(grads);
  add_common(grads_t, o);
  grads_t.add("seed", &o.seed, "sampling seed");
  grads_t.add("trials", &o.trials, "evaluation points per loss");
  grads_t.add("tolerance", &o.tolerance, "maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::vector<std::pair<CLI::App*, ParamTable*>> tables = {
      {gen, &gen_t}, {evp, &evp_t}, {evq, &evq_t}, {pnp, &pnp_t}, {comp, &comp_t}, {grads, &grads_t}};
  try {
    for (const auto& [sub, table] : tables) {
      if (!sub->parsed()) continue;
      if (!o.config.empty()) table->apply(read_json_file(o.config));
      if (o.workers < 1) throw UsageError("--workers must be >= 1");
      const json echo = table->echo();
      if (sub == gen) return run_gen(o, echo);
      if (sub == evp) return run_eval(o, echo, false);
      if (sub == evq) return run_eval(o, echo, true);
      if (sub == pnp) return run_solve_pnp(o, echo);
      if (sub == comp) return run_compose(o, echo);
      if (sub == grads) return run_check_grads(o, echo);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
