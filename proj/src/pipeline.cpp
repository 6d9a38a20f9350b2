#include "gsvi/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "gsvi/parallel.hpp"

namespace gsvi {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

Mode parse_mode(std::string_view name) {
  if (name == "baseline") return Mode::baseline;
  if (name == "perturbed") return Mode::perturbed;
  if (name == "dr") return Mode::dr;
  throw ConstructionError("unknown mode '" + std::string(name) +
                          "' (expected baseline, perturbed or dr)");
}

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::baseline: return "baseline";
    case Mode::perturbed: return "perturbed";
    case Mode::dr: return "dr";
  }
  return "?";
}

PreparedPatch prepare_patch(PixelPartition part, Vec y) {
  if (y.size() != part.m()) throw DimensionError("prepare_patch: y does not match the partition");
  PreparedPatch p;
  p.theta = build_bilinear_theta(part);
  p.baseline = baseline_interpolate(y, part, p.theta);
  p.features_obs = extract_features(p.baseline, part, PixelSet::observed);
  p.features_mis = extract_features(p.baseline, part, PixelSet::missing);
  p.part = std::move(part);
  p.y = std::move(y);
  return p;
}

PreparedPatch prepare_masked_patch(const GrayImage& masked, int row, int col, int size) {
  const bool odd_phase = (row + col) % 2 != 0;
  PixelPartition part = checkerboard_partition(size, size, odd_phase);
  Vec y(part.m());
  for (Eigen::Index i = 0; i < part.m(); ++i) {
    const Pixel& px = part.m_index()[static_cast<std::size_t>(i)];
    y[i] = masked(row + px.row, col + px.col);
  }
  return prepare_patch(std::move(part), std::move(y));
}

DirectedPerturbation model_perturbation(const PreparedPatch& patch, const Model& model) {
  DirectedPerturbation p;
  if (model.gain_s == 0.0) {
    p.p = SpMat(patch.part.m(), patch.part.n());
    p.p.makeCompressed();
  } else {
    p = build_directed_perturbation(patch.features_obs, patch.features_mis, model.metric_p,
                                    model.edges, patch.part);
  }
  p.gain = model.gain_s;
  return p;
}

DenoisingLaplacian model_laplacian(const PreparedPatch& patch, const Model& model) {
  DenoisingLaplacian lap;
  if (model.gain_s2 == 0.0) {
    lap.lap = SpMat(patch.part.n(), patch.part.n());
    lap.lap.makeCompressed();
  } else {
    lap = build_denoising_laplacian(patch.features_mis, model.metric_r, model.edges, patch.part);
  }
  lap.gain = model.gain_s2;
  return lap;
}

Vec interpolate_patch(const PreparedPatch& patch, const Model& model, Mode mode,
                      SolveTrace* trace) {
  switch (mode) {
    case Mode::baseline:
      return patch.theta.apply(patch.y);
    case Mode::perturbed:
      return perturbed_interpolate(patch.theta, model_perturbation(patch, model), patch.y,
                                   model.solver, trace);
    case Mode::dr:
      return dr_run(patch.theta, model_perturbation(patch, model), model_laplacian(patch, model),
                    patch.y, model.solver, trace);
  }
  throw ConstructionError("unknown mode");
}

int fit_patch_size(int requested, int width, int height) {
  int size = std::min({requested, width, height});
  if (size % 2) --size;
  if (size < 2) throw DimensionError("image too small to interpolate");
  return size;
}

ImageRun interpolate_image(const GrayImage& masked, const Model& model, Mode mode,
                           const PatchGrid& grid, int threads) {
  grid.validate();
  const auto positions = patch_positions(masked.width(), masked.height(), grid);
  const int size = grid.patch_size;

  struct Slot {
    GrayImage patch;
    SolveTrace trace;
    std::string error;
    double prepare_ms = 0.0;
    double solve_ms = 0.0;
  };
  std::vector<Slot> slots(positions.size());

  parallel_for(positions.size(), threads, [&](std::size_t i) {
    Slot& slot = slots[i];
    auto t0 = std::chrono::steady_clock::now();
    const PreparedPatch prep = prepare_masked_patch(masked, positions[i].row, positions[i].col,
                                                    size);
    slot.prepare_ms = elapsed_ms(t0);
    t0 = std::chrono::steady_clock::now();
    Vec x_n;
    try {
      x_n = interpolate_patch(prep, model, mode, &slot.trace);
    } catch (const std::exception& e) {
      slot.error = e.what();
      x_n = prep.theta.apply(prep.y);
    }
    slot.solve_ms = elapsed_ms(t0);
    slot.patch = assemble_image(prep.part, prep.y, x_n);
  });

  ImageRun run;
  run.patches = positions.size();
  std::vector<GrayImage> patches;
  patches.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    Slot& s = slots[i];
    run.prepare_ms += s.prepare_ms;
    run.solve_ms += s.solve_ms;
    run.trace.bicg_iterations += s.trace.bicg_iterations;
    run.trace.cg_iterations += s.trace.cg_iterations;
    run.trace.bicg_residual = std::max(run.trace.bicg_residual, s.trace.bicg_residual);
    run.trace.cg_residual = std::max(run.trace.cg_residual, s.trace.cg_residual);
    if (!s.error.empty()) run.failures.push_back({positions[i], s.error});
    patches.push_back(std::move(s.patch));
  }

  const auto t0 = std::chrono::steady_clock::now();
  GrayImage fused = fuse_patches(patches, positions, grid, masked.width(), masked.height());
  for (int r = 0; r < masked.height(); ++r)
    for (int c = 0; c < masked.width(); ++c)
      if ((r + c) % 2 == 0) fused.set(r, c, masked(r, c));
  run.fuse_ms = elapsed_ms(t0);
  run.output = std::move(fused);
  return run;
}

}  // namespace gsvi
