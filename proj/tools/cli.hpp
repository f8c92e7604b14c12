#pragma once

// voxelforge command-line front end. Kept in a header so tests can drive it in-process.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxelforge/voxelforge.hpp"

namespace vf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kFailed = 1, kUsage = 2, kIo = 3, kAlgorithm = 4 };

/// Accepts `name`, `name.vgrid.json` or `name.nii`; bare names get the VGRID suffix.
inline fs::path volume_path(const std::string& s) {
  if (io_detail::ends_with(s, ".vgrid.json") || io_detail::is_nifti_path(s)) return s;
  return s + ".vgrid.json";
}

inline std::vector<std::string> read_list(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open list file '" + p.string() + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

inline void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

inline Dims parse_dims(const std::vector<std::size_t>& v) {
  if (v.size() != 3) throw InvalidArgument("dims need three values");
  return {v[0], v[1], v[2]};
}

struct Context {
  std::ostream& out;
  std::ostream& err;
};

// ---------------------------------------------------------------- subcommands

struct LabelArgs {
  std::string organ, in, out;
  LungParams lung;
  BoneParams bone;
};

inline int cmd_label(const LabelArgs& a, Context& ctx) {
  const auto ct = read_volume<float>(volume_path(a.in));
  Mask m = a.organ == "lungs" ? label_lungs(ct, a.lung) : label_bones(ct, a.bone);
  write_volume(m, volume_path(a.out));
  ctx.out << json{{"schema", 1}, {"organ", a.organ}, {"voxels", count_nonzero(m)}}.dump() << "\n";
  return kOk;
}

struct AugmentArgs {
  std::string in_list, label_list, spec, out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t batch = 8;
  std::size_t depth = 4;
  bool occlude_labels = false;
};

inline int cmd_augment(const AugmentArgs& a, Context& ctx) {
  AugmentSpec spec;
  {
    std::ifstream in(a.spec);
    if (!in) throw IoError("cannot open spec '" + a.spec + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw InvalidArgument(std::string("malformed spec JSON: ") + e.what());
    }
    spec = j.get<AugmentSpec>();
  }
  if (a.seed_given) spec.seed = a.seed;
  const auto images = read_list(a.in_list);
  const auto labels = read_list(a.label_list);
  if (images.empty()) throw InvalidArgument("augment: image list is empty");
  if (images.size() != labels.size()) throw InvalidArgument("augment: image and label lists differ in length");
  if (a.batch < 1) throw InvalidArgument("augment: batch must be >= 1");
  fs::create_directories(a.out_dir);

  PipelineOptions opt;
  opt.depth = a.depth;
  opt.keep_results = false;
  opt.apply.occlude_labels = a.occlude_labels;
  std::size_t written = 0;
  for (std::size_t start = 0; start < images.size(); start += a.batch) {
    const std::size_t end = std::min(images.size(), start + a.batch);
    std::vector<BatchItem> batch;
    for (std::size_t i = start; i < end; ++i)
      batch.push_back({read_volume<float>(volume_path(images[i])), read_volume<std::uint8_t>(volume_path(labels[i]))});
    // Per-item seeds must depend on the global index, not on how the list is batched.
    AugmentSpec batch_spec = spec;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = start; i < end; ++i) seeds.push_back(item_seed(spec.seed, i));
    try {
      run_fifo_pipeline(
          batch.size(), opt.depth,
          [&](std::size_t k) {
            return std::pair{k, sample_params(batch_spec, batch[k].image.dims(), seeds[k])};
          },
          [&](std::pair<std::size_t, TransformParams>&& s) {
            return apply(batch[s.first].image, batch[s.first].labels, s.second, opt.apply);
          },
          [&](std::size_t k, AugmentedPair&& r) {
            char name[32];
            std::snprintf(name, sizeof name, "item_%05zu", start + k);
            const fs::path base = fs::path(a.out_dir) / name;
            write_volume(r.image, base.string() + "_image.vgrid.json");
            write_volume(r.labels, base.string() + "_labels.vgrid.json");
            write_json(base.string() + "_params.json",
                       json{{"schema", 1}, {"item", start + k}, {"seed", seeds[k]}, {"params", r.params}});
            ++written;
          });
    } catch (const PipelineError& e) {
      throw PipelineError(start + e.index(), e.detail());
    }
  }
  ctx.out << json{{"schema", 1}, {"items", written}, {"out_dir", a.out_dir}}.dump() << "\n";
  return kOk;
}

struct ResampleArgs {
  std::string in, out;
  double res = 3.0;
  bool labels = false;
};

inline int cmd_resample(const ResampleArgs& a, Context& ctx) {
  bool degenerate = false;
  if (a.labels) {
    const auto g = read_volume<std::uint8_t>(volume_path(a.in));
    write_volume(resample_grid(g, a.res, Interpolation::nearest, &degenerate), volume_path(a.out));
  } else {
    const auto g = read_volume<float>(volume_path(a.in));
    write_volume(resample_grid(g, a.res, Interpolation::trilinear, &degenerate), volume_path(a.out));
  }
  if (degenerate) ctx.err << "warning: an output dimension rounded to 0 and was clamped to 1\n";
  ctx.out << json{{"schema", 1}, {"resolution_mm", a.res}, {"degenerate", degenerate}}.dump() << "\n";
  return kOk;
}

struct MorphArgs {
  std::string op, in, out;
  double diameter_mm = 10.0;
};

inline int cmd_morph(const MorphArgs& a, Context& ctx) {
  const auto raw = read_volume<std::uint8_t>(volume_path(a.in));
  Mask m(raw.dims(), raw.spacing());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = raw[i] ? 1 : 0;
  const auto e = ball_element(a.diameter_mm, m.spacing());
  if (e.degenerate) ctx.err << "warning: ball is smaller than one voxel; using a single-voxel element\n";
  Mask r = a.op == "dilate" ? dilate(m, e) : a.op == "erode" ? erode(m, e) : a.op == "open" ? open(m, e) : close(m, e);
  write_volume(r, volume_path(a.out));
  ctx.out << json{{"schema", 1}, {"op", a.op}, {"element_dims", {e.dims.x, e.dims.y, e.dims.z}},
                  {"voxels", count_nonzero(r)}}
                 .dump()
          << "\n";
  return kOk;
}

struct LossArgs {
  std::string kind, pred, truth, grad, wce_mode = "frequency";
  double power = 1.0;
};

inline int cmd_loss(const LossArgs& a, Context& ctx) {
  const auto p = read_volume<float>(volume_path(a.pred));
  const auto y = read_volume<float>(volume_path(a.truth));
  if (p.dims() != y.dims()) throw InvalidArgument("loss: prediction and truth dims differ");
  std::vector<double> pv(p.data().begin(), p.data().end()), yv(y.data().begin(), y.data().end());
  LossOptions opt;
  opt.power = a.power;
  opt.weights = a.wce_mode == "inverse-frequency" ? CrossEntropyWeights::inverse_frequency
                                                  : CrossEntropyWeights::frequency;
  opt.with_grad = !a.grad.empty();
  const auto r = evaluate_loss(parse_loss_kind(a.kind), pv, yv, opt);
  if (!a.grad.empty()) {
    Volume g(p.dims(), p.spacing());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<float>((*r.gradient)[i]);
    write_volume(g, volume_path(a.grad));
  }
  ctx.out << json{{"schema", 1}, {"kind", a.kind}, {"value", r.value}}.dump() << "\n";
  return kOk;
}

inline json vec_json(const BinaryVector& v) {
  json j = json::array();
  for (double x : v) j.push_back(static_cast<int>(x));
  return j;
}

inline json metric_json(const MetricReport& r) {
  json j{{"pass", r.pass}, {"triples", r.triples}};
  if (r.counterexample) {
    const auto& c = *r.counterexample;
    j["counterexample"] = {{"property", c.property}, {"p", vec_json(c.p)}, {"y", vec_json(c.y)},
                           {"r", vec_json(c.r)},     {"lhs", c.lhs},       {"rhs", c.rhs}};
  }
  return j;
}

struct VerifyArgs {
  std::string suite;
  std::uint64_t seed = 1;
};

inline int cmd_verify(const VerifyArgs& a, Context& ctx) {
  json rep{{"schema", 1}, {"suite", a.suite}};
  bool pass = true;
  if (a.suite == "metric") {
    const auto iou = check_jaccard_metric(3, LossKind::iou);
    const auto iou4 = check_jaccard_metric(4, LossKind::iou);
    const auto dice = check_jaccard_metric(3, LossKind::dice);
    rep["iou_exhaustive_n3"] = metric_json(iou);
    rep["iou_exhaustive_n4"] = metric_json(iou4);
    rep["dice_exhaustive_n3"] = metric_json(dice);
    // The Dice loss is expected to fail the triangle inequality.
    const bool dice_fails = !dice.pass && dice.counterexample && dice.counterexample->property == "triangle";
    rep["dice_violates_triangle"] = dice_fails;
    pass = iou.pass && iou4.pass && dice_fails;
  } else if (a.suite == "penalty") {
    json rows = json::array();
    const std::size_t N = 100;
    const auto table = penalty_curves(N, {0, 1, 2, 5, 10, 20, 50, 100});
    for (const auto& r : table) {
      rows.push_back({{"eps", r.eps}, {"N", N}, {"eps_over_N", r.fn}, {"eps_over_N_plus_eps", r.fp},
                      {"L_FN", r.fn_constructed}, {"L_FP", r.fp_constructed}, {"agrees", r.agrees}});
      pass = pass && r.agrees;
    }
    const auto big = penalty_curves(1000000, {1}).front();
    const double rel = std::abs(big.fn - big.fp) / big.fn;
    rep["rows"] = rows;
    rep["large_N"] = {{"N", 1000000}, {"eps", 1}, {"L_FN", big.fn}, {"L_FP", big.fp}, {"relative_gap", rel}};
    pass = pass && big.agrees && rel < 1e-6;
  } else if (a.suite == "gradcheck") {
    json rows = json::array();
    auto run = [&](const std::string& name, LossKind k, double m) {
      LossOptions o;
      o.power = m;
      const auto r = grad_check(k, 100, 64, 1e-4, o, a.seed);
      rows.push_back({{"loss", name}, {"power", m}, {"max_rel_error", r.max_rel_error}, {"pass", r.pass}});
      pass = pass && r.pass;
    };
    run("iou", LossKind::iou, 1.0);
    run("dice", LossKind::dice, 1.0);
    for (double m : {0.5, 2.0, 3.0}) run("iou-pow", LossKind::iou_power, m);
    run("wce", LossKind::wce, 1.0);
    rep["checks"] = rows;
  } else if (a.suite == "restriction") {
    CounterStream rng(a.seed);
    std::size_t violations = 0;
    const std::size_t trials = 100000, n = 32;
    BinaryVector p(n), g(n), s(n);
    for (std::size_t t = 0; t < trials; ++t) {
      for (std::size_t k = 0; k < n; ++k) {
        p[k] = rng.bernoulli(0.5);
        g[k] = rng.bernoulli(0.5);
        s[k] = rng.bernoulli(0.5);
      }
      violations += !restriction_bound(p, g, s).holds;
    }
    rep["trials"] = trials;
    rep["n"] = n;
    rep["violations"] = violations;
    pass = violations == 0;
  } else {
    throw InvalidArgument("unknown suite '" + a.suite + "'");
  }
  rep["pass"] = pass;
  ctx.out << rep.dump(2) << "\n";
  return pass ? kOk : kFailed;
}

struct PhantomArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::vector<std::size_t> dims{96, 80, 64};
  double spacing = 3.0;
  double noise = 20.0;
  bool uniform = false;
  bool table = false;
  bool randomize = false;
};

inline std::string strip_volume_suffix(const std::string& s) {
  if (io_detail::ends_with(s, ".vgrid.json")) return s.substr(0, s.size() - 11);
  return s;
}

inline int cmd_phantom(const PhantomArgs& a, Context& ctx) {
  PhantomSpec spec = a.randomize ? randomized_phantom_spec(a.seed) : PhantomSpec{};
  spec.dims = parse_dims(a.dims);
  spec.spacing = {a.spacing, a.spacing, a.spacing};
  spec.noise_sigma = a.noise;
  spec.table = a.table;
  if (a.uniform) {
    // Soft tissue everywhere: no air, no bone.
    spec.background_hu = spec.body.hu;
    spec.lungs.clear();
    spec.bones.clear();
  }
  const auto ph = make_phantom(spec, a.seed);
  const std::string base = strip_volume_suffix(a.out);
  write_volume(ph.ct, base + ".vgrid.json");
  json files{{"ct", base + ".vgrid.json"}};
  for (const auto& [organ, mask] : ph.truth) {
    write_volume(mask, base + "_" + organ + ".vgrid.json");
    files[organ] = base + "_" + organ + ".vgrid.json";
  }
  ctx.out << json{{"schema", 1}, {"seed", a.seed}, {"files", files}}.dump() << "\n";
  return kOk;
}

struct BenchArgs {
  std::vector<std::size_t> batch_sizes{1, 4, 16, 32};
  std::size_t reps = 5, depth = 4;
  std::vector<std::size_t> dims{120, 120, 160};
  std::uint64_t seed = 0;
};

inline json entry_json(const BenchEntry& e) {
  return {{"batch", e.batch},
          {"depth", e.depth},
          {"ms_per_volume_mean", e.ms_per_volume_mean},
          {"ms_per_volume_stddev", e.ms_per_volume_stddev},
          {"volumes_per_second", e.volumes_per_second}};
}

inline AugmentSpec default_bench_spec(std::uint64_t seed) {
  AugmentSpec s;
  s.rotation_rad = {{{-0.3, 0.3}, {-0.3, 0.3}, {-3.14159, 3.14159}}};
  s.scale = {{{0.9, 1.1}, {0.9, 1.1}, {0.9, 1.1}}};
  s.shear = {-0.05, 0.05};
  s.reflect_prob = {0.5, 0.5, 0.0};
  s.affine_perturb = {-0.02, 0.02};
  s.displacement_vox = {10, 10, 10};
  s.occlusion_max_vox = 40;
  s.noise_sigma = {0, 30};
  s.window_lower = {-1000, -150};
  s.window_upper = {230, 1500};
  s.seed = seed;
  return s;
}

inline int cmd_bench(const BenchArgs& a, Context& ctx) {
  BenchConfig cfg;
  cfg.batch_sizes = a.batch_sizes;
  cfg.repetitions = a.reps;
  cfg.depth = a.depth;
  cfg.dims = parse_dims(a.dims);
  const auto r = bench(default_bench_spec(a.seed), cfg);
  json entries = json::array();
  for (const auto& e : r.entries) entries.push_back(entry_json(e));
  ctx.out << json{{"schema", 1},
                  {"machine", r.machine},
                  {"repetitions", r.repetitions},
                  {"resolution_mm", cfg.spacing_mm},
                  {"dims", a.dims},
                  {"entries", entries},
                  {"unpipelined", entry_json(r.unpipelined)},
                  {"pipelined", entry_json(r.pipelined)},
                  {"pipeline_speedup", r.pipeline_speedup}}
                 .dump(2)
          << "\n";
  return kOk;
}

// ---------------------------------------------------------------- entry point

inline int report_error(Context& ctx, const char* kind, const std::string& what, int code) {
  std::string line = what;
  for (auto& c : line)
    if (c == '\n') c = ' ';
  ctx.err << "error: " << kind << ": " << line << "\n";
  return code;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Context ctx{out, err};
  CLI::App app{"voxelforge: volumetric morphology, CT labelers, 3D augmentation and IOU-family losses"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads for data-parallel loops (0 = all cores)");

  LabelArgs label;
  auto* c_label = app.add_subcommand("label", "Unsupervised lung or skeleton labeling of a CT volume");
  c_label->add_option("--organ", label.organ, "lungs or bones")->required()->check(CLI::IsMember({"lungs", "bones"}));
  c_label->add_option("--in", label.in, "CT volume in HU")->required();
  c_label->add_option("--out", label.out, "Output mask")->required();
  c_label->add_option("--air-max", label.lung.air_hu_max, "Lungs: air keeps HU <= this")->capture_default_str();
  c_label->add_option("--erode-mm", label.lung.erosion_diameter_mm, "Lungs: erosion ball diameter (mm)")
      ->capture_default_str();
  c_label->add_option("--n-lungs", label.lung.n_lungs, "Lungs: pockets to keep")->capture_default_str();
  c_label->add_option("--tau1", label.bone.tau1, "Bones: retention threshold (HU)")->capture_default_str();
  c_label->add_option("--tau2", label.bone.tau2, "Bones: exterior threshold (HU)")->capture_default_str();
  c_label->add_option("--close-mm", label.bone.closing_diameter_mm, "Bones: closing ball diameter (mm)")
      ->capture_default_str();
  int skel_conn = 26;
  c_label->add_option("--skeleton-connectivity", skel_conn, "Bones: 6 or 26")->capture_default_str()->check(
      CLI::IsMember({6, 26}));

  AugmentArgs aug;
  auto* c_aug = app.add_subcommand("augment", "Random affine/occlusion/noise/window augmentation of a dataset");
  c_aug->add_option("--in", aug.in_list, "Text file listing image volumes")->required();
  c_aug->add_option("--labels", aug.label_list, "Text file listing label maps")->required();
  c_aug->add_option("--spec", aug.spec, "AugmentSpec JSON")->required();
  c_aug->add_option("--out-dir", aug.out_dir, "Output directory")->required();
  auto* seed_opt = c_aug->add_option("--seed", aug.seed, "Master seed (overrides the spec's)");
  c_aug->add_option("--batch", aug.batch, "Items per pipelined batch")->capture_default_str();
  c_aug->add_option("--depth", aug.depth, "FIFO depth (1 = no overlap)")->capture_default_str();
  c_aug->add_flag("--occlude-labels", aug.occlude_labels, "Zero labels inside the occluded prism");

  ResampleArgs rs;
  auto* c_rs = app.add_subcommand("resample", "Resample to an isotropic resolution");
  c_rs->add_option("--in", rs.in)->required();
  c_rs->add_option("--out", rs.out)->required();
  c_rs->add_option("--res", rs.res, "Target resolution (mm)")->capture_default_str();
  c_rs->add_flag("--labels", rs.labels, "Nearest-neighbour, no smoothing");

  MorphArgs mo;
  auto* c_mo = app.add_subcommand("morph", "FFT binary morphology with a ball element");
  c_mo->add_option("--op", mo.op)->required()->check(CLI::IsMember({"dilate", "erode", "open", "close"}));
  c_mo->add_option("--in", mo.in)->required();
  c_mo->add_option("--out", mo.out)->required();
  c_mo->add_option("--diameter-mm", mo.diameter_mm, "Ball diameter (mm)")->capture_default_str();

  LossArgs lo;
  auto* c_lo = app.add_subcommand("loss", "Evaluate a segmentation loss");
  c_lo->add_option("--kind", lo.kind)->required()->check(CLI::IsMember({"iou", "dice", "iou-pow", "wce"}));
  c_lo->add_option("--pred", lo.pred, "Probability volume")->required();
  c_lo->add_option("--truth", lo.truth, "Binary truth volume")->required();
  c_lo->add_option("--power", lo.power, "Exponent m for iou-pow")->capture_default_str();
  c_lo->add_option("--grad", lo.grad, "Write dL/dp to this volume");
  c_lo->add_option("--wce-mode", lo.wce_mode)->capture_default_str()->check(
      CLI::IsMember({"frequency", "inverse-frequency"}));

  VerifyArgs ve;
  auto* c_ve = app.add_subcommand("verify", "Run a loss property suite, print a JSON report");
  c_ve->add_option("--suite", ve.suite)->required()->check(
      CLI::IsMember({"metric", "penalty", "gradcheck", "restriction"}));
  c_ve->add_option("--seed", ve.seed)->capture_default_str();

  PhantomArgs ph;
  auto* c_ph = app.add_subcommand("phantom", "Synthetic CT torso with ground-truth masks");
  c_ph->add_option("--out", ph.out, "Output name; writes <out>.vgrid.json and <out>_<organ>.vgrid.json")->required();
  c_ph->add_option("--seed", ph.seed)->capture_default_str();
  c_ph->add_option("--dims", ph.dims)->expected(3)->capture_default_str();
  c_ph->add_option("--spacing", ph.spacing, "Isotropic spacing (mm)")->capture_default_str();
  c_ph->add_option("--noise", ph.noise, "Noise sigma (HU)")->capture_default_str();
  c_ph->add_flag("--uniform", ph.uniform, "Uniform soft tissue only");
  c_ph->add_flag("--table", ph.table, "Add an exam-table slab");
  c_ph->add_flag("--randomize", ph.randomize, "Jitter organ positions and sizes by seed");

  BenchArgs be;
  auto* c_be = app.add_subcommand("bench", "Augmentation pipeline throughput on synthetic 3 mm volumes");
  c_be->add_option("--batch-sizes", be.batch_sizes)->delimiter(',')->capture_default_str();
  c_be->add_option("--reps", be.reps, "Repetitions (>= 5)")->capture_default_str();
  c_be->add_option("--depth", be.depth, "Pipelined FIFO depth")->capture_default_str();
  c_be->add_option("--dims", be.dims)->expected(3)->capture_default_str();
  c_be->add_option("--seed", be.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    return report_error(ctx, "Usage", e.what(), kUsage);
  }
  aug.seed_given = seed_opt->count() > 0;
  label.bone.skeleton_connectivity = connectivity_from_int(skel_conn);
  // Restore the process-wide setting on return so in-process callers are unaffected.
  struct ThreadSetting {
    unsigned saved = num_threads();
    ~ThreadSetting() { set_num_threads(saved); }
  } thread_setting;
  if (threads > 0) set_num_threads(threads);

  try {
    if (*c_label) return cmd_label(label, ctx);
    if (*c_aug) return cmd_augment(aug, ctx);
    if (*c_rs) return cmd_resample(rs, ctx);
    if (*c_mo) return cmd_morph(mo, ctx);
    if (*c_lo) return cmd_loss(lo, ctx);
    if (*c_ve) return cmd_verify(ve, ctx);
    if (*c_ph) return cmd_phantom(ph, ctx);
    if (*c_be) return cmd_bench(be, ctx);
  } catch (const NoCandidate& e) {
    return report_error(ctx, "NoCandidate", e.what(), kAlgorithm);
  } catch (const PipelineError& e) {
    return report_error(ctx, "PipelineError", e.what(), kAlgorithm);
  } catch (const IoError& e) {
    return report_error(ctx, "IoError", e.what(), kIo);
  } catch (const FormatError& e) {
    return report_error(ctx, "FormatError", e.what(), kIo);
  } catch (const fs::filesystem_error& e) {
    return report_error(ctx, "IoError", e.what(), kIo);
  } catch (const InvalidArgument& e) {
    return report_error(ctx, "InvalidArgument", e.what(), kUsage);
  } catch (const std::exception& e) {
    return report_error(ctx, "Error", e.what(), kFailed);
  }
  return kUsage;
}

}  // namespace vf::cli
