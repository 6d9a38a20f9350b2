#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsvi/imaging.hpp"
#include "gsvi/instances.hpp"
#include "gsvi/model.hpp"
#include "gsvi/pipeline.hpp"
#include "gsvi/tuner.hpp"
#include "gsvi/verify.hpp"

namespace gsvi::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Level { error = 0, info = 1, debug = 2 };

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {
    if (const char* env = std::getenv("GSV_INTERP_LOG")) {
      const std::string v = env;
      if (v == "info") level_ = Level::info;
      else if (v == "debug") level_ = Level::debug;
    }
  }
  std::ostream& error() { return err_ << "error: "; }
  bool enabled(Level l) const { return l <= level_; }
  void info(const std::string& msg) { if (enabled(Level::info)) err_ << "info: " << msg << '\n'; }
  void debug(const std::string& msg) { if (enabled(Level::debug)) err_ << "debug: " << msg << '\n'; }

 private:
  std::ostream& err_;
  Level level_ = Level::error;
};

/// Input the user got wrong (not a parse or model error, but still exit 2).
struct BadInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

GrayImage observed_mask_image(const PixelPartition& part) {
  GrayImage m(part.width(), part.height());
  for (const Pixel& p : part.m_index()) m.set(p.row, p.col, 1.0);
  return m;
}

std::string psnr_ssim_line(double p, double s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << p << " | " << std::setprecision(4) << s;
  return os.str();
}

std::vector<fs::path> pgm_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw BadInput("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<TrainingPatch> load_patch_set(const std::vector<fs::path>& files, int patch_size,
                                          int per_image, std::uint64_t seed, Log& log) {
  std::vector<TrainingPatch> out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const GrayImage img = read_pgm_file(files[i].string());
    const int size = fit_patch_size(patch_size, img.width(), img.height());
    auto patches = sample_patches(img, size, per_image, seed + i);
    log.debug(files[i].string() + ": " + std::to_string(patches.size()) + " patches of " +
              std::to_string(size));
    for (auto& p : patches) out.push_back(std::move(p));
  }
  return out;
}

GrayImage synthetic_image(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = u(rng), b = u(rng), c = u(rng);
  PixelArray px(size, size);
  for (int r = 0; r < size; ++r)
    for (int col = 0; col < size; ++col)
      px(r, col) = 0.5 + 0.25 * std::cos(0.2 * a * r + 0.15 * b * col) +
                   0.15 * std::sin(0.3 * c * (r + 2 * col)) + 0.05 * (u(rng) - 0.5);
  return GrayImage(px);
}

// --- subcommands -------------------------------------------------------------

int cmd_mask(const std::string& input, const std::string& output, std::string sidecar,
             std::ostream& out, Log& log) {
  const GrayImage img = read_pgm_file(input);
  const MaskedImage masked = apply_checkerboard_mask(img);
  write_pgm_file(output, assemble_image(masked.part, masked.y, Vec::Zero(masked.part.n())));
  if (sidecar.empty()) sidecar = output + ".mask.pgm";
  write_pgm_file(sidecar, observed_mask_image(masked.part));
  log.info("masked " + std::to_string(masked.part.n()) + " of " + std::to_string(img.size()) +
           " pixels");
  out << json{{"input", input},
              {"output", output},
              {"mask", sidecar},
              {"observed", masked.part.m()},
              {"missing", masked.part.n()}}
             .dump()
      << '\n';
  return kExitOk;
}

struct InterpolateArgs {
  std::string input;
  std::string output;
  std::string model_path;
  std::string mode = "dr";
  std::string truth;
  int threads = 1;
  int patch_size = 64;
  int stride = 48;
};

int cmd_interpolate(const InterpolateArgs& a, std::ostream& out, std::ostream& err, Log& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const Mode mode = parse_mode(a.mode);
  const Model model = a.model_path.empty() ? Model{} : load_model_file(a.model_path);
  if (a.threads < 1) throw BadInput("--threads must be >= 1");
  const GrayImage masked = read_pgm_file(a.input);

  PatchGrid grid;
  grid.patch_size = fit_patch_size(a.patch_size, masked.width(), masked.height());
  grid.stride = std::min(a.stride, grid.patch_size);
  grid.validate();
  if (grid.patch_size != a.patch_size)
    log.info("patch size reduced to " + std::to_string(grid.patch_size) + " to fit the image");

  const ImageRun run = interpolate_image(masked, model, mode, grid, a.threads);
  write_pgm_file(a.output, run.output);

  json report{{"input", a.input},
              {"output", a.output},
              {"mode", std::string(mode_name(mode))},
              {"width", masked.width()},
              {"height", masked.height()},
              {"patch_size", grid.patch_size},
              {"stride", grid.stride},
              {"patches", run.patches},
              {"threads", a.threads},
              {"timing_ms",
               {{"prepare", run.prepare_ms},
                {"solve", run.solve_ms},
                {"fuse", run.fuse_ms},
                {"total", ms_since(t0)}}},
              {"solver",
               {{"bicg_iterations", run.trace.bicg_iterations},
                {"cg_iterations", run.trace.cg_iterations},
                {"bicg_residual", run.trace.bicg_residual},
                {"cg_residual", run.trace.cg_residual}}}};
  json failures = json::array();
  for (const auto& f : run.failures) {
    failures.push_back({{"row", f.position.row}, {"col", f.position.col}, {"message", f.message}});
    log.error() << "patch at (" << f.position.row << ", " << f.position.col
                << ") failed: " << f.message << '\n';
  }
  report["failures"] = failures;
  if (!a.truth.empty()) {
    const GrayImage truth = read_pgm_file(a.truth);
    if (truth.width() != masked.width() || truth.height() != masked.height())
      throw BadInput("--truth image size differs from the input");
    const double p = psnr(run.output, truth), s = ssim(run.output, truth);
    report["metrics"] = {{"psnr", p}, {"ssim", s}, {"psnr_ssim", psnr_ssim_line(p, s)}};
    err << "PSNR | SSIM: " << psnr_ssim_line(p, s) << '\n';
  }
  out << report.dump(2) << '\n';
  return run.failures.empty() ? kExitOk : kExitFailure;
}

struct TuneArgs {
  std::string train_dir;
  std::string val_dir;
  std::string model_in;
  std::string model_out;
  std::string history;
  std::string tunables = "gains";
  int patch_size = 64;
  int patches_per_image = 4;
  int max_epochs = 20;
  int threads = 1;
};

int cmd_tune(const TuneArgs& a, std::uint64_t seed, std::ostream& out, Log& log) {
  const auto train_files = pgm_files(a.train_dir);
  if (train_files.empty()) throw BadInput("no .pgm images in " + a.train_dir);
  const auto val_files = pgm_files(a.val_dir);
  const Model start = a.model_in == "default" ? Model{} : load_model_file(a.model_in);

  PatchDataset data;
  data.train = load_patch_set(train_files, a.patch_size, a.patches_per_image, seed, log);
  data.validation =
      load_patch_set(val_files, a.patch_size, a.patches_per_image, seed + 1000003, log);

  TunableSet tunables;
  if (a.tunables == "gains") tunables = TunableSet::gains();
  else if (a.tunables == "standard") tunables = TunableSet::standard();
  else if (a.tunables != "none") throw BadInput("--tunables must be gains, standard or none");

  TrainConfig cfg;
  cfg.max_epochs = a.max_epochs;
  cfg.threads = a.threads;
  cfg.seed = seed;
  log.info("tuning " + std::to_string(tunables.size()) + " parameters on " +
           std::to_string(data.train.size()) + " training patches");
  const TuneResult result = tune(start, data, cfg, tunables);
  save_model_file(a.model_out, result.model);

  if (a.history.empty()) {
    write_history_csv(out, result.history);
  } else {
    std::ofstream f(a.history);
    if (!f) throw std::runtime_error("cannot write " + a.history);
    write_history_csv(f, result.history);
  }
  for (const auto& r : result.history)
    log.info("epoch " + std::to_string(r.epoch) + ": val " + std::to_string(r.val_mse) +
             ", accepted " + std::to_string(r.accepted));
  return kExitOk;
}

int cmd_verify(std::uint64_t seed, std::ostream& out) {
  VerifyOptions opts;
  opts.seed = seed;
  const auto rows = run_verify(opts);
  print_verify_table(out, rows);
  const bool ok = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.passed; });
  return ok ? kExitOk : kExitFailure;
}

int cmd_metrics(const std::string& a, const std::string& b, std::ostream& out) {
  const GrayImage x = read_pgm_file(a), y = read_pgm_file(b);
  if (x.width() != y.width() || x.height() != y.height())
    throw BadInput("images differ in size");
  out << "image,reference,psnr,ssim,mse\n"
      << std::setprecision(10) << a << ',' << b << ',' << psnr(x, y) << ',' << ssim(x, y) << ','
      << mse(x, y) << '\n';
  return kExitOk;
}

int cmd_bench(const std::vector<int>& sizes, int repeats, std::uint64_t seed, std::ostream& out) {
  Model model;
  model.gain_s = 0.05;
  model.gain_s2 = 0.2;
  out << "size,n_missing,operator_nnz,bicg_iterations,bicg_ms,bicg_us_per_iter,dr_ms,"
         "dr_bicg_iterations,dr_cg_iterations\n";
  for (int size : sizes) {
    if (size < 4 || size % 2) throw BadInput("bench sizes must be even and >= 4");
    const auto masked = apply_checkerboard_mask(synthetic_image(size, seed + size));
    const PreparedPatch prep = prepare_patch(masked.part, masked.y);
    const DirectedPerturbation p = model_perturbation(prep, model);
    const auto nnz = prep.theta.theta.nonZeros() + p.p.nonZeros();

    double bicg_ms = 1e300, dr_ms = 1e300;
    SolveTrace bicg, dr;
    for (int r = 0; r < repeats; ++r) {
      SolveTrace tb, td;
      auto t0 = std::chrono::steady_clock::now();
      perturbed_interpolate(prep.theta, p, prep.y, model.solver, &tb);
      bicg_ms = std::min(bicg_ms, ms_since(t0));
      t0 = std::chrono::steady_clock::now();
      interpolate_patch(prep, model, Mode::dr, &td);
      dr_ms = std::min(dr_ms, ms_since(t0));
      bicg = tb;
      dr = td;
    }
    const double per_iter =
        bicg.bicg_iterations ? 1000.0 * bicg_ms / static_cast<double>(bicg.bicg_iterations) : 0.0;
    out << size << ',' << prep.part.n() << ',' << nnz << ',' << bicg.bicg_iterations << ','
        << bicg_ms << ',' << per_iter << ',' << dr_ms << ',' << dr.bicg_iterations << ','
        << dr.cg_iterations << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Log log(err);
  CLI::App app{"Graph-shift-variation interpolation of checkerboard-subsampled images",
               "gsv-interp"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for sampling and random instances");

  std::string mask_in, mask_out, mask_sidecar;
  auto* mask = app.add_subcommand("mask", "Apply the checkerboard mask (missing pixels = 0)");
  mask->add_option("input", mask_in)->required();
  mask->add_option("output", mask_out)->required();
  mask->add_option("--mask-out", mask_sidecar, "Sidecar mask path (default <output>.mask.pgm)");

  InterpolateArgs ia;
  auto* interp = app.add_subcommand("interpolate", "Fill the missing pixels of a masked image");
  interp->add_option("input", ia.input, "Checkerboard-masked PGM")->required();
  interp->add_option("output", ia.output)->required();
  interp->add_option("--model", ia.model_path, "Model JSON (default: zero-gain model)");
  interp->add_option("--mode", ia.mode, "baseline | perturbed | dr")
      ->check(CLI::IsMember({"baseline", "perturbed", "dr"}));
  interp->add_option("--threads", ia.threads)->check(CLI::PositiveNumber);
  interp->add_option("--patch-size", ia.patch_size)->check(CLI::Range(2, 1 << 16));
  interp->add_option("--stride", ia.stride)->check(CLI::PositiveNumber);
  interp->add_option("--truth", ia.truth, "Ground truth PGM; adds PSNR | SSIM to the report");

  TuneArgs ta;
  auto* tunecmd = app.add_subcommand("tune", "Finite-difference tuning of model parameters");
  tunecmd->add_option("train_dir", ta.train_dir)->required();
  tunecmd->add_option("val_dir", ta.val_dir)->required();
  tunecmd->add_option("model_in", ta.model_in, "Model JSON or 'default'")->required();
  tunecmd->add_option("model_out", ta.model_out)->required();
  tunecmd->add_option("--history", ta.history, "History CSV path (default: stdout)");
  tunecmd->add_option("--tunables", ta.tunables, "gains | standard | none");
  tunecmd->add_option("--patch-size", ta.patch_size)->check(CLI::Range(4, 1 << 16));
  tunecmd->add_option("--patches-per-image", ta.patches_per_image)->check(CLI::PositiveNumber);
  tunecmd->add_option("--max-epochs", ta.max_epochs)->check(CLI::PositiveNumber);
  tunecmd->add_option("--threads", ta.threads)->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Run the dense-oracle suite");

  std::string met_a, met_b;
  auto* metrics = app.add_subcommand("metrics", "PSNR / SSIM / MSE between two images (CSV)");
  metrics->add_option("image", met_a)->required();
  metrics->add_option("reference", met_b)->required();

  std::vector<int> sizes{16, 32, 64};
  int repeats = 3;
  auto* bench = app.add_subcommand("bench", "Time BiCG and DR per patch size (CSV)");
  bench->add_option("sizes", sizes, "Patch sizes");
  bench->add_option("--repeats", repeats)->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadInput;
  }

  try {
    if (*mask) return cmd_mask(mask_in, mask_out, mask_sidecar, out, log);
    if (*interp) return cmd_interpolate(ia, out, err, log);
    if (*tunecmd) return cmd_tune(ta, seed, out, log);
    if (*verify) return cmd_verify(seed ? seed : VerifyOptions{}.seed, out);
    if (*metrics) return cmd_metrics(met_a, met_b, out);
    if (*bench) return cmd_bench(sizes, repeats, seed, out);
  } catch (const ParseError& e) {
    log.error() << e.what() << '\n';
    return kExitBadInput;
  } catch (const BadInput& e) {
    log.error() << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::invalid_argument& e) {
    log.error() << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& e) {
    log.error() << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace gsvi::cli
