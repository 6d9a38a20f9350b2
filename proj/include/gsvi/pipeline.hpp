#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gsvi/graph.hpp"
#include "gsvi/imaging.hpp"
#include "gsvi/model.hpp"
#include "gsvi/solver.hpp"

namespace gsvi {

enum class Mode { baseline, perturbed, dr };

Mode parse_mode(std::string_view name);
std::string_view mode_name(Mode mode);

/// Parameter-independent part of a patch: observations, Theta, the Theta
/// interpolation and the features computed from it.
struct PreparedPatch {
  PixelPartition part;
  Vec y;
  BaseInterpolator theta;
  GrayImage baseline;
  FeatureSet features_obs;
  FeatureSet features_mis;
};

PreparedPatch prepare_patch(PixelPartition part, Vec y);
/// Cuts a patch out of a checkerboard-masked image; the local lattice phase
/// follows the patch offset.
PreparedPatch prepare_masked_patch(const GrayImage& masked, int row, int col, int size);

/// Graphs at the model's current metric/edge parameters, with its gains applied.
DirectedPerturbation model_perturbation(const PreparedPatch& patch, const Model& model);
DenoisingLaplacian model_laplacian(const PreparedPatch& patch, const Model& model);

/// Missing-pixel values (n_index order) for one patch.
Vec interpolate_patch(const PreparedPatch& patch, const Model& model, Mode mode,
                      SolveTrace* trace = nullptr);

struct PatchFailure {
  PatchPosition position;
  std::string message;
};

struct ImageRun {
  GrayImage output;
  std::size_t patches = 0;
  SolveTrace trace;  // summed iterations, worst residuals
  std::vector<PatchFailure> failures;
  double prepare_ms = 0.0;
  double solve_ms = 0.0;
  double fuse_ms = 0.0;
};

/// Patch-wise interpolation of a checkerboard-masked image followed by
/// weighted fusion. Observed pixels are copied from the input unchanged.
/// Failed patches fall back to the base interpolator and are reported.
/// Results do not depend on `threads`.
ImageRun interpolate_image(const GrayImage& masked, const Model& model, Mode mode,
                           const PatchGrid& grid, int threads = 1);

/// Largest even patch size not exceeding the requested size or the image.
int fit_patch_size(int requested, int width, int height);

}  // namespace gsvi
