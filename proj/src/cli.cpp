#include "gloredi/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "gloredi/dataset.hpp"
#include "gloredi/io.hpp"
#include "gloredi/metrics.hpp"
#include "gloredi/train.hpp"

namespace gloredi {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct GenDataArgs {
  std::string out;
  std::size_t count = 64;
  std::size_t size = 64;
  std::size_t views = 18;
  std::size_t teacher_mult = 2;
  double i0 = 1e6;
  double attenuation = 0.2;
  std::uint64_t seed = 0;
  std::size_t full_views = 180;
  std::size_t detectors = 0;
  std::string filter = "ram-lak";
  bool save_sinograms = false;
};

struct TrainArgs {
  std::string data, config, out;
  bool baseline = false;
  bool resume = false;
};

struct EvalArgs {
  std::string data, ckpt, out;
};

struct ReconstructArgs {
  std::string ckpt, in, out;
};

struct FbpArgs {
  std::string sino, out, filter = "ram-lak";
  std::size_t views = 0;
  std::size_t size = 64;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_run_json(const fs::path& path, const Json& manifest) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os << manifest.dump(2) << "\n";
}

fs::path sidecar(const fs::path& out) { return fs::path(out.string() + ".run.json"); }

std::size_t default_detectors(std::size_t size) { return (3 * size + 1) / 2; }

// ------------------------------------------------------------------ commands

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  DatasetConfig cfg;
  cfg.count = a.count;
  cfg.geometry.image_size = a.size;
  cfg.geometry.n_detectors = a.detectors ? a.detectors : default_detectors(a.size);
  cfg.geometry.n_full_views = a.full_views;
  cfg.n_sparse = a.views;
  cfg.teacher_multiplier = a.teacher_mult;
  cfg.photons = a.i0;
  cfg.attenuation = a.attenuation;
  cfg.seed = a.seed;
  cfg.filter = parse_filter_kind(a.filter);
  cfg.geometry.validate();
  cfg.validate();

  const auto samples = build_dataset(cfg);
  const fs::path root(a.out);
  write_dataset(root, cfg, samples);
  if (a.save_sinograms) {
    for (std::size_t id = 0; id < samples.size(); ++id) {
      const Sinogram clean = radon(samples[id].full, cfg.geometry);
      write_sinogram(root / (sample_stem(id) + "_sino.gds"), clean);
    }
  }
  Json j;
  j["command"] = "gen-data";
  j["out"] = a.out;
  j["count"] = a.count;
  j["size"] = a.size;
  j["views"] = a.views;
  j["teacher_mult"] = a.teacher_mult;
  j["i0"] = a.i0;
  j["attenuation"] = a.attenuation;
  j["seed"] = a.seed;
  j["full_views"] = cfg.geometry.n_full_views;
  j["detectors"] = cfg.geometry.n_detectors;
  j["filter"] = a.filter;
  j["save_sinograms"] = a.save_sinograms;
  write_run_json(root / "run.json", j);
  out << "wrote " << samples.size() << " samples to " << root.string() << "\n";
  return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = apply_config(cfg, read_config_file(a.config));
  if (a.baseline) {
    cfg.alpha = 0.0;
    cfg.beta = 0.0;
  }
  cfg.validate();
  auto data = read_dataset(a.data);
  if (data.empty()) throw std::invalid_argument("train: dataset " + a.data + " is empty");

  const fs::path root(a.out);
  fs::create_directories(root);
  Trainer trainer(cfg, std::move(data), a.baseline ? TrainMode::kFreeNet : TrainMode::kGloReDi);

  const fs::path log_path = root / "log.csv";
  const fs::path state_path = root / "state.gdc";
  std::ofstream log;
  if (a.resume) {
    if (!fs::exists(state_path)) throw FormatError("resume: no state.gdc in " + root.string());
    trainer.restore(nn::load_checkpoint(state_path));
    // Keep log rows up to the restored iteration.
    std::vector<std::string> kept;
    std::ifstream in(log_path);
    std::string line;
    while (std::getline(in, line)) {
      if (kept.empty()) {
        kept.push_back(line);
        continue;
      }
      const auto comma = line.find(',');
      if (std::stoull(line.substr(0, comma)) <= trainer.iteration()) kept.push_back(line);
    }
    if (kept.empty()) kept.push_back(kLogHeader);
    log.open(log_path, std::ios::trunc);
    for (const auto& k : kept) log << k << "\n";
  } else {
    log.open(log_path, std::ios::trunc);
    log << kLogHeader << "\n";
  }
  if (!log) throw FormatError("cannot write " + log_path.string());

  const std::size_t report_every = std::max<std::size_t>(1, cfg.iterations / 10);
  trainer.run([&](const IterationLog& row) {
    log << format_log_row(row) << "\n";
    if (row.iter % report_every == 0 || row.iter == cfg.iterations) {
      out << "iter " << row.iter << " pixelS " << fmt(row.pixel_s) << " pixelT " << fmt(row.pixel_t) << " rdd "
          << fmt(row.rdd) << " bcd " << fmt(row.bcd) << "\n";
    }
  });
  log.flush();
  if (!log) throw FormatError("failed writing " + log_path.string());

  nn::save_checkpoint(root / "student.gdc", trainer.student_checkpoint());
  nn::save_checkpoint(state_path, trainer.state_checkpoint());

  Json j;
  j["command"] = "train";
  j["data"] = a.data;
  j["config"] = a.config;
  j["out"] = a.out;
  j["baseline"] = a.baseline;
  j["resume"] = a.resume;
  for (const auto& [k, v] : describe(cfg)) j[k] = v;
  write_run_json(root / "run.json", j);
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto data = read_dataset(a.data);
  if (data.empty()) throw std::invalid_argument("eval: dataset " + a.data + " is empty");
  StudentModel model = load_student(nn::load_checkpoint(a.ckpt));

  std::ofstream csv(a.out, std::ios::trunc);
  if (!csv) throw FormatError("cannot write " + a.out);
  csv << "id,psnr_fbp,psnr_model,ssim_fbp,ssim_model,rmse_fbp,rmse_model\n";
  double sums[6] = {};
  for (const auto& s : data) {
    const Grid pred = model.reconstruct(s.student_input);
    pred.require_finite("eval output");
    const MetricReport f = evaluate(s.student_input, s.full);
    const MetricReport m = evaluate(pred, s.full);
    const double v[6] = {f.psnr, m.psnr, f.ssim, m.ssim, f.rmse, m.rmse};
    csv << sample_stem(s.id);
    for (int k = 0; k < 6; ++k) {
      csv << "," << fmt(v[k]);
      sums[k] += v[k];
    }
    csv << "\n";
  }
  const double n = static_cast<double>(data.size());
  csv << "mean";
  for (double s : sums) csv << "," << fmt(s / n);
  csv << "\n";
  if (!csv) throw FormatError("failed writing " + a.out);
  out << "mean psnr fbp " << fmt(sums[0] / n) << " model " << fmt(sums[1] / n) << "\n";

  Json j;
  j["command"] = "eval";
  j["data"] = a.data;
  j["ckpt"] = a.ckpt;
  j["out"] = a.out;
  j["samples"] = data.size();
  write_run_json(sidecar(a.out), j);
  return kExitOk;
}

int cmd_reconstruct(const ReconstructArgs& a, std::ostream& out) {
  StudentModel model = load_student(nn::load_checkpoint(a.ckpt));
  const Grid image = read_image(a.in);
  if (image.rank() != 2) throw FormatError(a.in + ": expected a 2-D image");
  const Grid pred = model.reconstruct(image);
  pred.require_finite("reconstruction");
  write_pgm(a.out, pred);
  fs::path raw(a.out);
  raw.replace_extension(".gdi");
  write_image(raw, pred);

  Json j;
  j["command"] = "reconstruct";
  j["ckpt"] = a.ckpt;
  j["in"] = a.in;
  j["out"] = a.out;
  j["raw"] = raw.string();
  write_run_json(sidecar(a.out), j);
  out << "wrote " << a.out << " and " << raw.string() << "\n";
  return kExitOk;
}

int cmd_fbp(const FbpArgs& a, std::ostream& out) {
  const FilterKind filter = parse_filter_kind(a.filter);
  Sinogram sino = read_sinogram(a.sino);
  if (sino.views() < 2) throw FormatError(a.sino + ": need at least two views");
  ScanGeometry geom;
  geom.image_size = a.size;
  geom.n_detectors = sino.detectors();
  geom.n_full_views = sino.views();
  geom.angle_range = static_cast<double>(sino.views()) * (sino.angles[1] - sino.angles[0]);
  geom.validate();
  const std::size_t views = a.views ? a.views : sino.views();
  if (views > sino.views() || sino.views() % views != 0) {
    throw std::invalid_argument("fbp: --views " + std::to_string(views) + " must divide the sinogram's " +
                                std::to_string(sino.views()) + " views");
  }
  const Grid image = fbp(subsample_views(sino, views), geom, filter);
  write_image(a.out, image);

  Json j;
  j["command"] = "fbp";
  j["sino"] = a.sino;
  j["views"] = views;
  j["filter"] = a.filter;
  j["size"] = a.size;
  j["out"] = a.out;
  write_run_json(sidecar(a.out), j);
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse-view CT reconstruction with global representation distillation", "gloredi"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a phantom dataset of (full, teacher, student) images");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--count", gen.count, "Number of phantoms")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "Image side length")->capture_default_str()->check(CLI::Range(16, 1024));
  gen_cmd->add_option("--views", gen.views, "Student (sparse) view count")->capture_default_str();
  gen_cmd->add_option("--teacher-mult", gen.teacher_mult, "Teacher view multiplier")->capture_default_str();
  gen_cmd->add_option("--i0", gen.i0, "Incident photon count for Poisson noise")->capture_default_str();
  gen_cmd->add_option("--attenuation", gen.attenuation, "Attenuation per pixel of unit intensity")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--full-views", gen.full_views, "Full-scan view count")->capture_default_str();
  gen_cmd->add_option("--detectors", gen.detectors, "Detector count (default 1.5 x size)");
  gen_cmd->add_option("--filter", gen.filter, "FBP filter: ram-lak or hann")->capture_default_str();
  gen_cmd->add_flag("--save-sinograms", gen.save_sinograms, "Also write noise-free full-view sinograms");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a student model (GloReDi, or FreeNet with --baseline)");
  train_cmd->add_option("--data", train.data, "Dataset directory")->required();
  train_cmd->add_option("--config", train.config, "Config file (key = value)");
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_flag("--baseline", train.baseline, "Pixel loss only, no teacher");
  train_cmd->add_flag("--resume", train.resume, "Continue from <out>/state.gdc");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score FBP inputs and model outputs against ground truth");
  eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  eval_cmd->add_option("--ckpt", ev.ckpt, "Student checkpoint")->required();
  eval_cmd->add_option("--out", ev.out, "Report CSV")->required();

  ReconstructArgs rec;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Run the student model on one image");
  rec_cmd->add_option("--ckpt", rec.ckpt, "Student checkpoint")->required();
  rec_cmd->add_option("--in", rec.in, "Input image (.gdi)")->required();
  rec_cmd->add_option("--out", rec.out, "Output PGM; a .gdi copy is written alongside")->required();

  FbpArgs fb;
  auto* fbp_cmd = app.add_subcommand("fbp", "Filtered back projection of a sinogram");
  fbp_cmd->add_option("--sino", fb.sino, "Sinogram (.gds)")->required();
  fbp_cmd->add_option("--views", fb.views, "Keep this many evenly spaced views (default all)");
  fbp_cmd->add_option("--filter", fb.filter, "ram-lak or hann")->capture_default_str();
  fbp_cmd->add_option("--size", fb.size, "Output image side length")->capture_default_str();
  fbp_cmd->add_option("--out", fb.out, "Output image (.gdi)")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*train_cmd) return cmd_train(train, out);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*rec_cmd) return cmd_reconstruct(rec, out);
    if (*fbp_cmd) return cmd_fbp(fb, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace gloredi
