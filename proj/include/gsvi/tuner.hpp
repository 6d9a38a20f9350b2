#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gsvi/pipeline.hpp"

namespace gsvi {

/// One scalar model parameter exposed to the tuner, with closed bounds.
/// Open intervals are represented by pulling the bound in by kOpenMargin.
struct ParamHandle {
  std::string name;
  double lower;
  double upper;
  std::function<double(const Model&)> get;
  std::function<void(Model&, double)> set;

  double clamp(double v) const;
  bool contains(double v) const { return v >= lower && v <= upper; }
};

inline constexpr double kOpenMargin = 1e-6;

struct TunableSet {
  std::vector<ParamHandle> handles;

  bool empty() const { return handles.empty(); }
  std::size_t size() const { return handles.size(); }

  /// The two graph gains only.
  static TunableSet gains();
  /// Gains, mu, gamma, d*, and both metric-factor diagonals.
  static TunableSet standard(int k_dim = FeatureSet::kDefaultDim);
  /// Adds every alpha/beta entry of the model's BiCG schedule (unbounded).
  void add_schedule(const Model& model);
  /// Throws ConstructionError when a handle is out of bounds for `model`.
  void check(const Model& model) const;
};

struct TrainConfig {
  double step_size = 1e-3;
  int batch_size = 8;
  int patience = 5;
  double fd_epsilon = 1e-4;
  int max_epochs = 20;
  int threads = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// A training patch: the prepared observation and ground truth at the
/// missing positions (n_index order).
struct TrainingPatch {
  PreparedPatch prep;
  Vec truth_n;
};

/// Observations taken from the truth itself through an even-phase checkerboard.
TrainingPatch make_training_patch(const GrayImage& truth);
/// Observations supplied separately (e.g. noisy) from the truth.
TrainingPatch make_training_patch(PixelPartition part, Vec y, Vec truth_n);

struct PatchDataset {
  std::vector<TrainingPatch> train;
  std::vector<TrainingPatch> validation;
};

/// `count` patches at uniformly random positions, reproducible from `seed`.
std::vector<TrainingPatch> sample_patches(const GrayImage& img, int patch_size, int count,
                                          std::uint64_t seed);

double loss_mse(const Vec& pred, const Vec& truth);

/// Mean over patches of the dr-mode MSE on missing pixels. Solver failures propagate.
double batch_loss(const Model& model, const std::vector<const TrainingPatch*>& batch,
                  int threads = 1);
double dataset_loss(const Model& model, const std::vector<TrainingPatch>& patches,
                    int threads = 1);

/// Central difference of `loss` at theta. Falls back to a one-sided
/// difference when theta sits within eps of a bound. Returns nullopt when the
/// loss throws or is not finite at either probe.
std::optional<double> fd_gradient(const std::function<double(double)>& loss, double theta,
                                  double eps, double lower, double upper);

std::optional<double> fd_gradient(const ParamHandle& handle,
                                  const std::vector<const TrainingPatch*>& batch,
                                  const Model& model, double eps, int threads = 1);

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  int accepted = 0;  // coordinate updates accepted in this epoch
};

struct TuneResult {
  Model model;
  std::vector<EpochRecord> history;  // history[0] is the starting point
};

/// Finite-difference coordinate descent. A coordinate step is kept only if
/// the validation loss does not increase. Stops after `patience` epochs
/// without strict improvement or after max_epochs.
TuneResult tune(const Model& model, const PatchDataset& data, const TrainConfig& cfg,
                const TunableSet& tunables);

void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history);

}  // namespace gsvi
