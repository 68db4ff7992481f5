#include "cli.hpp"

#include "image_io.hpp"

#include "drivemap/assets.hpp"
#include "drivemap/clip_bundle.hpp"
#include "drivemap/diffusion.hpp"
#include "drivemap/driver_map.hpp"
#include "drivemap/errors.hpp"
#include "drivemap/face_model.hpp"
#include "drivemap/metrics.hpp"
#include "drivemap/raster.hpp"
#include "drivemap/threading.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace drivemap::tools {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Inconsistent flags discovered after parsing.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Resolution {
  int width = 0;
  int height = 0;
};

Resolution parse_resolution(const std::string& text) {
  const auto x = text.find('x');
  Resolution r;
  if (x == std::string::npos) {
    throw ConfigError("--resolution must look like WxH, got '" + text + "'");
  }
  const char* begin = text.data();
  const auto w = std::from_chars(begin, begin + x, r.width);
  const auto h = std::from_chars(begin + x + 1, begin + text.size(), r.height);
  if (w.ec != std::errc{} || w.ptr != begin + x || h.ec != std::errc{} || h.ptr != begin + text.size() ||
      r.width < 1 || r.height < 1) {
    throw ConfigError("--resolution must look like WxH with positive integers, got '" + text + "'");
  }
  return r;
}

Camera apply_resolution(const Camera& camera, const std::string& resolution) {
  if (resolution.empty()) {
    return camera;
  }
  const Resolution r = parse_resolution(resolution);
  return camera.with_resolution(r.width, r.height);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError(dir.string() + ": " + ec.message());
  }
}

std::uint64_t file_hash(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return fnv1a64(bytes);
}

const FrameParams& frame_at(const ClipBundle& clip, int frame) {
  if (frame < 0 || static_cast<std::size_t>(frame) >= clip.frames.size()) {
    throw ConfigError(
        "--frame " + std::to_string(frame) + " out of range for a clip of " + std::to_string(clip.frames.size()) +
        " frames");
  }
  return clip.frames[static_cast<std::size_t>(frame)];
}

/// Upper bound of ||Delta_expr|| / sigma over every vertex of every frame. Interpolated pixels
/// are convex combinations of vertex values, so no pixel of any frame exceeds it.
double clip_deformation_max(const FaceModelAssets& assets, const ClipBundle& clip) {
  double m = 0.0;
  for (const auto& f : clip.frames) {
    const Vertices d = expression_offset(assets, f.expression) / assets.deformation_sigma;
    if (d.rows() > 0) {
      m = std::max(m, d.rowwise().norm().maxCoeff());
    }
  }
  return m;
}

std::string pe_channel_name(int c) {
  const int axis = c / (2 * kPositionalOctaves);
  const bool cosine = (c % (2 * kPositionalOctaves)) >= kPositionalOctaves;
  const int k = c % kPositionalOctaves;
  return std::string("pe_") + (cosine ? "cos" : "sin") + "_" + "xyz"[axis] + "_k" + std::to_string(k);
}

// ---- effective config ----

json effective_config(const CLI::App& sub) {
  json cfg;
  std::string command = sub.get_name();
  for (const CLI::App* s : sub.get_subcommands()) {
    command += " " + s->get_name();
  }
  cfg["command"] = command;
  std::function<void(const CLI::App&)> collect = [&](const CLI::App& a) {
    for (const CLI::Option* opt : a.get_options()) {
      const std::string name = opt->get_single_name();
      if (name == "help" || name.empty()) {
        continue;
      }
      if (opt->get_expected_min() == 0) {
        cfg[name] = opt->count() > 0;
      } else if (opt->count() > 0) {
        const auto& r = opt->results();
        cfg[name] = r.size() == 1 && opt->get_expected_max() <= 1 ? json(r.front()) : json(r);
      } else {
        cfg[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* s : a.get_subcommands()) {
      collect(*s);
    }
  };
  collect(sub);
  cfg["threads"] = resolve_thread_count(0);
  return cfg;
}

// ---- commands ----

struct GenAssetsFlags {
  std::uint64_t seed = 0;
  std::string out;
  int vertices = 642;
  int n_beta = 150;
  int n_psi = 65;
  int joints = 5;
  int inner_mouth = 200;
};

int cmd_gen_assets(const GenAssetsFlags& f, std::ostream& out) {
  SyntheticAssetConfig c;
  c.seed = f.seed;
  c.n_vertices = f.vertices;
  c.n_beta = f.n_beta;
  c.n_psi = f.n_psi;
  c.n_joints = f.joints;
  c.inner_mouth_count = f.inner_mouth;
  const FaceModelAssets a = generate_synthetic_assets(c);
  save_assets(a, f.out);
  out << json{{"written", f.out},
              {"vertices", a.vertex_count()},
              {"faces", a.faces.rows()},
              {"n_beta", a.n_beta()},
              {"n_psi", a.n_psi()},
              {"sigma", a.deformation_sigma}}
             .dump()
      << "\n";
  return kExitOk;
}

struct GenClipFlags {
  std::string assets;
  std::uint64_t seed = 0;
  int frames = 16;
  std::string resolution = "512x512";
  double fps = 25.0;
  double expression_scale = 1.0;
  bool neutral = false;
  std::string out;
};

int cmd_gen_clip(const GenClipFlags& f, std::ostream& out) {
  const Resolution r = parse_resolution(f.resolution);
  const FaceModelAssets a = load_assets(f.assets);
  SyntheticClipConfig c;
  c.seed = f.seed;
  c.n_frames = f.frames;
  c.fps = f.fps;
  c.width = r.width;
  c.height = r.height;
  c.expression_scale = f.expression_scale;
  ClipBundle clip = generate_synthetic_clip(a, c);
  if (f.neutral) {
    for (auto& fr : clip.frames) {
      fr.expression.setZero();
    }
  }
  save_clip_bundle(clip, f.out);
  out << json{{"written", f.out}, {"frames", clip.frames.size()}}.dump() << "\n";
  return kExitOk;
}

struct EvalMeshFlags {
  std::string assets;
  std::string clip;
  int frame = 0;
  std::string out;
};

int cmd_eval_mesh(const EvalMeshFlags& f, std::ostream& out) {
  const FaceModelAssets a = load_assets(f.assets);
  const ClipBundle clip = load_clip_bundle(f.clip, a.dims());
  const FrameParams& fr = frame_at(clip, f.frame);
  const PosedMesh mesh = evaluate_mesh(a, clip.shape, fr.expression, fr.pose);
  const Faces mouth = inner_mouth_faces(a.inner_mouth_count, a.vertex_count());

  std::ostringstream obj;
  obj.precision(9);
  for (Eigen::Index v = 0; v < mesh.vertices.rows(); ++v) {
    obj << "v " << mesh.vertices(v, 0) << " " << mesh.vertices(v, 1) << " " << mesh.vertices(v, 2) << "\n";
  }
  for (const Faces* faces : {&a.faces, &mouth}) {
    for (Eigen::Index i = 0; i < faces->rows(); ++i) {
      obj << "f " << (*faces)(i, 0) + 1 << " " << (*faces)(i, 1) + 1 << " " << (*faces)(i, 2) + 1 << "\n";
    }
  }
  write_text(f.out, obj.str());
  out << json{{"written", f.out}, {"vertices", mesh.vertices.rows()}, {"faces", a.faces.rows() + mouth.rows()}}
             .dump()
      << "\n";
  return kExitOk;
}

struct RenderMapFlags {
  std::string assets;
  std::string clip;
  int frame = 0;
  std::string mode = "full";
  std::string resolution;
  std::string out;
  std::string viz;
  std::vector<int> channels;
  std::string debug_pgm;
};

void write_visualisations(
    const FaceModelAssets& a,
    const ClipBundle& clip,
    const DriverMap& map,
    const RenderMapFlags& f) {
  const fs::path dir(f.viz);
  ensure_directory(dir);
  const double clip_max = clip_deformation_max(a, clip);
  const auto magnitude = deformation_magnitude(map);
  const double frame_max =
      magnitude.empty() ? 0.0 : static_cast<double>(*std::max_element(magnitude.begin(), magnitude.end()));
  write_png_rgb(dir / "magnitude.png", map.width, map.height, colorize(magnitude, clip_max));
  write_text(
      dir / "magnitude.json",
      json{{"schema_version", kSchemaVersion},
           {"frame", f.frame},
           {"colormap", "diverging"},
           {"range", {-clip_max, clip_max}},
           {"clip_max", clip_max},
           {"frame_max", frame_max}}
              .dump(1) +
          "\n");

  std::vector<int> channels{positional_channel(0, false, 0), positional_channel(0, false, kPositionalOctaves - 1)};
  channels.insert(channels.end(), f.channels.begin(), f.channels.end());
  for (int c : channels) {
    if (c < 0 || c >= kDriverMapChannels) {
      throw ConfigError("--channel " + std::to_string(c) + " outside [0, " + std::to_string(kDriverMapChannels) + ")");
    }
    const bool pe = c < kPositionalChannels;
    const std::string name = pe ? pe_channel_name(c) : "deformation_" + std::string(1, "xyz"[c - kPositionalChannels]);
    write_png_rgb(dir / (name + ".png"), map.width, map.height, colorize(map.channel(c), pe ? 1.0 : clip_max));
  }
}

void write_debug_pgm(const RasterBuffer& raster, const fs::path& dir) {
  ensure_directory(dir);
  const std::size_t n = raster.face_index.size();
  std::vector<std::uint16_t> faces(n, 0);
  std::vector<std::uint16_t> depth(n, 0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    if (raster.face_index[i] >= 0) {
      faces[i] = static_cast<std::uint16_t>(std::min<std::int32_t>(raster.face_index[i] + 1, 65535));
      lo = std::min(lo, raster.depth[i]);
      hi = std::max(hi, raster.depth[i]);
    }
  }
  // Nearest covered depth is brightest; background stays 0.
  for (std::size_t i = 0; i < n; ++i) {
    if (raster.face_index[i] >= 0) {
      const double t = hi > lo ? (hi - raster.depth[i]) / (hi - lo) : 1.0;
      depth[i] = static_cast<std::uint16_t>(1 + std::lround(t * 65534.0));
    }
  }
  write_pgm16(dir / "face_index.pgm", raster.width, raster.height, faces);
  write_pgm16(dir / "depth.pgm", raster.width, raster.height, depth);
}

int cmd_render_map(const RenderMapFlags& f, std::ostream& out) {
  const MapMode mode = parse_map_mode(f.mode);
  const FaceModelAssets a = load_assets(f.assets);
  const ClipBundle clip = load_clip_bundle(f.clip, a.dims());
  const FrameParams& fr = frame_at(clip, f.frame);
  const Camera camera = apply_resolution(clip.camera, f.resolution);
  const EncodedTemplate enc = encode_template(a);
  const DriverMap map = build_driver_map(a, enc, clip.shape, fr.expression, fr.pose, camera, mode);
  save_container(driver_map_to_container(map), f.out);
  if (!f.viz.empty()) {
    write_visualisations(a, clip, map, f);
  }
  if (!f.debug_pgm.empty()) {
    const PosedMesh mesh = evaluate_mesh(a, clip.shape, fr.expression, fr.pose);
    write_debug_pgm(rasterize(mesh.vertices, render_faces(a), camera), f.debug_pgm);
  }
  out << json{{"written", f.out}, {"shape", {kDriverMapChannels, map.height, map.width}}, {"mode", f.mode}}.dump()
      << "\n";
  return kExitOk;
}

struct RetargetFlags {
  std::string assets;
  std::string ref;
  std::string drv;
  std::string mode = "full";
  std::string resolution;
  std::string out;
};

std::string frame_file_name(std::size_t t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu.lkm", t);
  return buf;
}

int cmd_retarget(const RetargetFlags& f, std::ostream& out) {
  const MapMode mode = parse_map_mode(f.mode);
  const FaceModelAssets a = load_assets(f.assets);
  const ClipBundle ref = load_clip_bundle(f.ref, a.dims());
  const ClipBundle drv = load_clip_bundle(f.drv, a.dims());
  const Camera camera = apply_resolution(ref.camera, f.resolution);
  const EncodedTemplate enc = encode_template(a);
  const fs::path dir(f.out);
  ensure_directory(dir);

  const std::size_t n = drv.frames.size();
  const int threads = resolve_thread_count(0);
  parallel_for_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const DriverMap map =
          retarget(a, enc, ref.shape, camera, drv.frames[t].expression, drv.frames[t].pose, mode, RasterOptions{1});
      save_container(driver_map_to_container(map), dir / frame_file_name(t));
    }
  });

  const json provenance{
      {"schema_version", kSchemaVersion},
      {"ref_bundle", f.ref},
      {"ref_fnv1a64", hex64(file_hash(f.ref))},
      {"drv_bundle", f.drv},
      {"drv_fnv1a64", hex64(file_hash(f.drv))},
      {"assets_fnv1a64", hex64(file_hash(f.assets))},
      {"frames", n},
      {"mode", f.mode},
      {"width", camera.width},
      {"height", camera.height}};
  write_text(dir / "provenance.json", provenance.dump(1) + "\n");
  out << json{{"written", f.out}, {"frames", n}}.dump() << "\n";
  return kExitOk;
}

struct MetricFlags {
  std::string kind;
  std::string assets;
  std::string target;
  std::string pred;
  std::string sample_id;
  std::string out;
};

int cmd_metric(const MetricFlags& f, std::ostream& out) {
  std::optional<FaceModelAssets> a;
  BundleDims dims;
  if (f.kind == kHefName && f.assets.empty()) {
    throw ConfigError("metric hef requires --assets");
  }
  if (!f.assets.empty()) {
    a = load_assets(f.assets);
    dims = a->dims();
  }
  const ClipBundle target = load_clip_bundle(f.target, dims);
  const ClipBundle pred = load_clip_bundle(f.pred, dims);
  if (target.frames.size() != pred.frames.size()) {
    throw ConfigError(
        "frame count mismatch: target has " + std::to_string(target.frames.size()) + ", pred has " +
        std::to_string(pred.frames.size()));
  }
  const std::string id = f.sample_id.empty() ? fs::path(f.pred).stem().string() : f.sample_id;
  const MetricReport r = f.kind == kHpfName ? hpf(head_trajectory(pred), head_trajectory(target), id)
                                            : hef(*a, target, pred, id);

  const json summary{
      {"schema_version", kSchemaVersion},
      {"metric", r.metric_name},
      {"sample_id", r.sample_id},
      {"mean", r.mean},
      {"std", r.stddev},
      {"n", r.per_frame.size()}};
  if (!f.out.empty()) {
    const fs::path dir(f.out);
    ensure_directory(dir);
    std::string csv = "sample_id,frame,value\n";
    for (std::size_t t = 0; t < r.per_frame.size(); ++t) {
      csv += r.sample_id + "," + std::to_string(t) + "," + format_double(r.per_frame[t]) + "\n";
    }
    write_text(dir / (f.kind + ".csv"), csv);
    write_text(dir / (f.kind + ".json"), summary.dump(1) + "\n");
  }
  out << summary.dump() << "\n";
  return kExitOk;
}

struct CalibrateFlags {
  std::string assets;
  std::string corpus;
  int synthetic = 0;
  int frames = 16;
  std::string resolution = "128x128";
  std::uint64_t seed = 0;
  int pairs = 50;
  int near_window = 2;
  std::string out;
};

json anchor_json(const AnchorStats& s) {
  json j{{"available", s.available}, {"n", s.n}};
  if (s.available) {
    j["mean"] = s.mean;
    j["std"] = s.stddev;
    j["standard_error"] = s.standard_error;
  }
  if (!s.note.empty()) {
    j["note"] = s.note;
  }
  return j;
}

int cmd_calibrate(const CalibrateFlags& f, std::ostream& out) {
  if (f.corpus.empty() == (f.synthetic == 0)) {
    throw ConfigError("calibrate needs exactly one of --corpus DIR or --synthetic N");
  }
  const FaceModelAssets a = load_assets(f.assets);
  std::vector<ClipBundle> corpus;
  if (!f.corpus.empty()) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(f.corpus, ec)) {
      if (e.path().extension() == ".json") {
        files.push_back(e.path());
      }
    }
    if (ec) {
      throw IoError(f.corpus + ": " + ec.message());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
      corpus.push_back(load_clip_bundle(p, a.dims()));
    }
  } else {
    const Resolution r = parse_resolution(f.resolution);
    for (int i = 0; i < f.synthetic; ++i) {
      SyntheticClipConfig c;
      c.seed = counter_hash(f.seed, 0, static_cast<std::uint64_t>(i));
      c.n_frames = f.frames;
      c.width = r.width;
      c.height = r.height;
      corpus.push_back(generate_synthetic_clip(a, c));
    }
  }
  CalibrationOptions o;
  o.n_pairs = f.pairs;
  o.seed = f.seed;
  o.near_window = f.near_window;
  const CalibrationReport r = hef_calibrate(a, corpus, o);

  const std::pair<const char*, const AnchorStats*> rows[] = {
      {"self_pair", &r.self_pair}, {"near_frame", &r.near_frame}, {"no_skill", &r.no_skill}, {"ceiling", &r.ceiling}};
  json anchors = json::object();
  for (const auto& [name, s] : rows) {
    anchors[name] = anchor_json(*s);
  }
  const json report{
      {"schema_version", kSchemaVersion},
      {"metric", kHefName},
      {"n_clips", r.n_clips},
      {"n_frames", r.n_frames},
      {"near_window", r.near_window},
      {"n_pairs", f.pairs},
      {"seed", f.seed},
      {"anchors", anchors}};
  if (!f.out.empty()) {
    write_text(f.out, report.dump(1) + "\n");
  }

  char line[160];
  std::snprintf(line, sizeof line, "%-12s %10s %12s %12s %6s\n", "anchor", "mean", "std", "se", "n");
  out << line;
  for (const auto& [name, s] : rows) {
    if (s->available) {
      std::snprintf(
          line, sizeof line, "%-12s %10.6f %12.6f %12.6f %6zu\n", name, s->mean, s->stddev, s->standard_error, s->n);
    } else {
      std::snprintf(line, sizeof line, "%-12s %10s  %s\n", name, "n/a", s->note.c_str());
    }
    out << line;
  }
  return kExitOk;
}

struct DdimDemoFlags {
  int steps = 50;
  std::uint64_t seed = 0;
  int dim = 64;
  int n_gen = 15;
  std::string shift_mode = "log_snr";
  bool no_zero_snr = false;
  std::string out;
};

double relative_error(const std::vector<double>& got, const std::vector<double>& want) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

int cmd_ddim_demo(const DdimDemoFlags& f, std::ostream& out) {
  if (f.steps < 1 || f.dim < 1 || f.n_gen < 1) {
    throw ConfigError("--steps, --dim and --n-gen must be positive");
  }
  ShiftMode mode = ShiftMode::LogSnr;
  if (f.shift_mode == "direct") {
    mode = ShiftMode::Direct;
  } else if (f.shift_mode != "log_snr") {
    throw ConfigError("--shift-mode must be log_snr or direct");
  }
  NoiseSchedule s = linear_schedule(kTrainTimesteps);
  if (!f.no_zero_snr) {
    s = enforce_zero_terminal_snr(s);
  }
  s = temporal_shift(s, f.n_gen, mode).schedule;

  std::mt19937_64 rng(f.seed);
  std::normal_distribution<double> normal;
  std::vector<double> z0(static_cast<std::size_t>(f.dim));
  std::vector<double> eps(z0.size());
  for (auto& v : z0) {
    v = normal(rng);
  }
  for (auto& v : eps) {
    v = normal(rng);
  }
  const auto ladder = ddim_timesteps(s, f.steps);
  const Denoiser oracle = [&](std::span<const double> z_t, int t) {
    const double ab = s[t];
    std::vector<double> e(z_t.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
      e[i] = (z_t[i] - std::sqrt(ab) * z0[i]) / std::sqrt(1.0 - ab);
    }
    return e;
  };

  std::string csv = "step,t,t_prev,alpha_cumprod,z0_hat_rel_error,z_prev_rel_error\n";
  const auto final_z = ddim_sample(
      add_noise(z0, eps, s, ladder.front()), oracle, s, f.steps, [&](int step, int t, const DdimStepResult& r) {
        const auto k = static_cast<std::size_t>(step);
        const int t_prev = k + 1 < ladder.size() ? ladder[k + 1] : kFinalStep;
        const auto expected = t_prev == kFinalStep ? z0 : add_noise(z0, eps, s, t_prev);
        csv += std::to_string(step) + "," + std::to_string(t) + "," + std::to_string(t_prev) + "," +
               format_double(s[t]) + "," + format_double(relative_error(r.z0_hat, z0)) + "," +
               format_double(relative_error(r.z_prev, expected)) + "\n";
      });
  if (f.out.empty()) {
    out << csv;
  } else {
    write_text(f.out, csv);
    out << json{{"written", f.out}, {"final_rel_error", relative_error(final_z, z0)}}.dump() << "\n";
  }
  return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Driver-map toolkit: synthetic assets, mesh evaluation, driver maps, metrics and sampler checks",
               "drivemap"};
  app.require_subcommand(1, 1);
  app.option_defaults()->always_capture_default();
  app.failure_message(CLI::FailureMessage::help);

  std::vector<std::pair<CLI::App*, std::function<int()>>> commands;

  GenAssetsFlags ga;
  auto* gen_assets = app.add_subcommand("gen-assets", "Write seeded synthetic face-model assets");
  gen_assets->add_option("--seed", ga.seed, "Generator seed");
  gen_assets->add_option("--out", ga.out, "Output asset container")->required();
  gen_assets->add_option("--vertices", ga.vertices, "Template vertex count (an icosphere count)");
  gen_assets->add_option("--n-beta", ga.n_beta, "Shape coefficients");
  gen_assets->add_option("--n-psi", ga.n_psi, "Expression coefficients");
  gen_assets->add_option("--joints", ga.joints, "Rig joints");
  gen_assets->add_option("--inner-mouth", ga.inner_mouth, "Inner-mouth vertex count");
  commands.emplace_back(gen_assets, [&] { return cmd_gen_assets(ga, out); });

  GenClipFlags gc;
  auto* gen_clip = app.add_subcommand("gen-clip", "Write a seeded synthetic clip bundle");
  gen_clip->add_option("--assets", gc.assets, "Asset container")->required();
  gen_clip->add_option("--seed", gc.seed, "Generator seed");
  gen_clip->add_option("--frames", gc.frames, "Frame count");
  gen_clip->add_option("--resolution", gc.resolution, "Camera resolution WxH");
  gen_clip->add_option("--fps", gc.fps, "Frame rate");
  gen_clip->add_option("--expression-scale", gc.expression_scale, "Expression amplitude bound");
  gen_clip->add_flag("--neutral", gc.neutral, "Zero every expression vector");
  gen_clip->add_option("--out", gc.out, "Output clip bundle JSON")->required();
  commands.emplace_back(gen_clip, [&] { return cmd_gen_clip(gc, out); });

  EvalMeshFlags em;
  auto* eval_mesh = app.add_subcommand("eval-mesh", "Write the posed mesh of one frame as OBJ");
  eval_mesh->add_option("--assets", em.assets, "Asset container")->required();
  eval_mesh->add_option("--clip", em.clip, "Clip bundle JSON")->required();
  eval_mesh->add_option("--frame", em.frame, "Frame index");
  eval_mesh->add_option("--out", em.out, "Output OBJ")->required();
  commands.emplace_back(eval_mesh, [&] { return cmd_eval_mesh(em, out); });

  RenderMapFlags rm;
  auto* render_map = app.add_subcommand("render-map", "Build the driver map of one frame");
  render_map->add_option("--assets", rm.assets, "Asset container")->required();
  render_map->add_option("--clip", rm.clip, "Clip bundle JSON")->required();
  render_map->add_option("--frame", rm.frame, "Frame index");
  render_map->add_option("--mode", rm.mode, "full, no_deformation or no_posenc");
  render_map->add_option("--resolution", rm.resolution, "Override the camera resolution, WxH");
  render_map->add_option("--out", rm.out, "Output map container")->required();
  render_map->add_option("--viz", rm.viz, "Directory for PNG visualisations");
  render_map->add_option("--channel", rm.channels, "Extra channel to visualise (repeatable)");
  render_map->add_option("--debug-pgm", rm.debug_pgm, "Directory for face-index and depth PGMs");
  commands.emplace_back(render_map, [&] { return cmd_render_map(rm, out); });

  RetargetFlags rt;
  auto* retarget_cmd = app.add_subcommand("retarget", "Drive a reference identity with another clip");
  retarget_cmd->add_option("--assets", rt.assets, "Asset container")->required();
  retarget_cmd->add_option("--ref", rt.ref, "Reference clip bundle (identity and camera)")->required();
  retarget_cmd->add_option("--drv", rt.drv, "Driver clip bundle (expression and pose)")->required();
  retarget_cmd->add_option("--mode", rt.mode, "full, no_deformation or no_posenc");
  retarget_cmd->add_option("--resolution", rt.resolution, "Override the camera resolution, WxH");
  retarget_cmd->add_option("--out", rt.out, "Output directory")->required();
  commands.emplace_back(retarget_cmd, [&] { return cmd_retarget(rt, out); });

  MetricFlags mt;
  auto* metric = app.add_subcommand("metric", "Score a predicted clip against a target clip");
  metric->add_option("kind", mt.kind, "hpf or hef")->required()->check(CLI::IsMember({kHpfName, kHefName}));
  metric->add_option("--assets", mt.assets, "Asset container (required for hef)");
  metric->add_option("--target", mt.target, "Target clip bundle")->required();
  metric->add_option("--pred", mt.pred, "Predicted clip bundle")->required();
  metric->add_option("--sample-id", mt.sample_id, "Sample id for the CSV (default: pred file stem)");
  metric->add_option("--out", mt.out, "Directory for <kind>.csv and <kind>.json");
  commands.emplace_back(metric, [&] { return cmd_metric(mt, out); });

  CalibrateFlags cb;
  auto* calibrate = app.add_subcommand("calibrate", "Four-anchor HEF calibration table");
  calibrate->add_option("--assets", cb.assets, "Asset container")->required();
  calibrate->add_option("--corpus", cb.corpus, "Directory of clip bundle JSON files");
  calibrate->add_option("--synthetic", cb.synthetic, "Generate this many synthetic clips instead");
  calibrate->add_option("--frames", cb.frames, "Frames per synthetic clip");
  calibrate->add_option("--resolution", cb.resolution, "Synthetic camera resolution WxH");
  calibrate->add_option("--seed", cb.seed, "Pair-sampling and corpus seed");
  calibrate->add_option("--pairs", cb.pairs, "Sampled pairs per anchor");
  calibrate->add_option("--near-window", cb.near_window, "Maximum frame distance of near-frame pairs");
  calibrate->add_option("--out", cb.out, "Output JSON report");
  commands.emplace_back(calibrate, [&] { return cmd_calibrate(cb, out); });

  DdimDemoFlags dd;
  auto* ddim = app.add_subcommand("ddim-demo", "DDIM run with an oracle denoiser, per-step errors as CSV");
  ddim->add_option("--steps", dd.steps, "Sampling steps");
  ddim->add_option("--seed", dd.seed, "Latent and noise seed");
  ddim->add_option("--dim", dd.dim, "Latent size");
  ddim->add_option("--n-gen", dd.n_gen, "Generated frames for the temporal shift (1 disables it)");
  ddim->add_option("--shift-mode", dd.shift_mode, "log_snr or direct");
  ddim->add_flag("--no-zero-snr", dd.no_zero_snr, "Skip the zero-terminal-SNR correction");
  ddim->add_option("--out", dd.out, "Output CSV (default: stdout)");
  commands.emplace_back(ddim, [&] { return cmd_ddim_demo(dd, out); });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  for (auto& [sub, run] : commands) {
    if (!sub->parsed()) {
      continue;
    }
    err << effective_config(*sub).dump() << "\n";
    try {
      return run();
    } catch (const IoError& e) {
      err << "error: " << e.what() << "\n";
      return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
      err << "error: " << e.what() << "\n";
      return kExitIo;
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return kExitConfig;
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << "\n";
      return kExitConfig;
    }
  }
  return kExitConfig;
}

} // namespace drivemap::tools
