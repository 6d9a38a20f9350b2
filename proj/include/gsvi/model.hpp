#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "gsvi/graph.hpp"
#include "gsvi/solver.hpp"

namespace gsvi {

inline constexpr const char* kModelFormat = "gsv-interp-model";
inline constexpr int kModelVersion = 1;
inline constexpr const char* kFeatureExtractorTag = "handcrafted-v1";

/// Everything needed to run the interpolation pipeline on a patch. Gains
/// default to zero, which makes every mode reproduce the base interpolator.
struct Model {
  SolverParams solver;
  EdgeParams edges;
  MetricMatrix metric_p = MetricMatrix::identity(FeatureSet::kDefaultDim, 1.0);
  MetricMatrix metric_r = MetricMatrix::identity(FeatureSet::kDefaultDim, 0.5);
  double gain_s = 0.0;
  double gain_s2 = 0.0;
  std::string feature_extractor = kFeatureExtractorTag;
  std::optional<double> validation_mse;

  void validate() const;
};

nlohmann::json model_to_json(const Model& model);
/// Strict: unknown or missing fields and out-of-range values throw ConstructionError.
Model model_from_json(const nlohmann::json& doc);

Model load_model_file(const std::string& path);
void save_model_file(const std::string& path, const Model& model);

}  // namespace gsvi
