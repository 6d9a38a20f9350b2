#include "gsvi/model.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

namespace gsvi {

using nlohmann::json;

namespace {

void expect_object(const json& j, const std::string& where,
                   std::initializer_list<const char*> required,
                   std::initializer_list<const char*> optional = {}) {
  if (!j.is_object()) throw ConstructionError("model: " + where + " must be an object");
  std::set<std::string> known;
  for (const char* k : required) {
    known.insert(k);
    if (!j.contains(k)) throw ConstructionError("model: " + where + " is missing '" + k + "'");
  }
  for (const char* k : optional) known.insert(k);
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      throw ConstructionError("model: unknown field '" + item.key() + "' in " + where);
}

double number(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number()) throw ConstructionError("model: " + where + "." + key + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConstructionError("model: " + where + "." + key + " is not finite");
  return d;
}

int integer(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number_integer())
    throw ConstructionError("model: " + where + "." + key + " must be an integer");
  return v.get<int>();
}

json metric_to_json(const MetricMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.factor().rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.factor().cols(); ++c) row.push_back(m.factor()(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MetricMatrix metric_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConstructionError("model: " + where + " must be a matrix");
  const auto k = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd f(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != k)
      throw ConstructionError("model: " + where + " must be square");
    for (Eigen::Index c = 0; c < k; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ConstructionError("model: " + where + " has a non-number entry");
      f(r, c) = v.get<double>();
    }
  }
  return MetricMatrix(f);
}

std::vector<double> number_array(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConstructionError("model: " + where + " must be an array");
  std::vector<double> out;
  for (const json& v : j) {
    if (!v.is_number()) throw ConstructionError("model: " + where + " has a non-number entry");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

void Model::validate() const {
  solver.validate();
  edges.validate();
  if (metric_p.k_dim() != FeatureSet::kDefaultDim || metric_r.k_dim() != FeatureSet::kDefaultDim)
    throw ConstructionError("model: metric matrices must be " +
                            std::to_string(FeatureSet::kDefaultDim) + "x" +
                            std::to_string(FeatureSet::kDefaultDim));
  if (!std::isfinite(gain_s)) throw ConstructionError("model: gain s must be finite");
  if (!(gain_s2 >= 0.0) || !std::isfinite(gain_s2))
    throw ConstructionError("model: gain s2 must be finite and >= 0");
  if (feature_extractor != kFeatureExtractorTag)
    throw ConstructionError("model: unsupported feature extractor '" + feature_extractor + "'");
  if (validation_mse && !(*validation_mse >= 0.0))
    throw ConstructionError("model: validation_mse must be >= 0");
}

json model_to_json(const Model& model) {
  json doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelVersion;
  doc["feature_extractor"] = model.feature_extractor;
  doc["solver"] = {{"mu", model.solver.mu},
                   {"gamma", model.solver.gamma},
                   {"n_bicg_layers", model.solver.n_bicg_layers},
                   {"n_dr_layers", model.solver.n_dr_layers},
                   {"tol", model.solver.tol},
                   {"cg_tol", model.solver.cg_tol}};
  doc["edges"] = {{"d_star", model.edges.d_star},
                  {"window_radius", model.edges.window_radius},
                  {"max_neighbors", model.edges.max_neighbors}};
  doc["metric_p"] = metric_to_json(model.metric_p);
  doc["metric_r"] = metric_to_json(model.metric_r);
  doc["gains"] = {{"s", model.gain_s}, {"s2", model.gain_s2}};
  if (model.solver.bicg_schedule)
    doc["bicg_schedule"] = {{"alpha", model.solver.bicg_schedule->alpha},
                            {"beta", model.solver.bicg_schedule->beta}};
  else
    doc["bicg_schedule"] = nullptr;
  doc["validation_mse"] = model.validation_mse ? json(*model.validation_mse) : json(nullptr);
  return doc;
}

Model model_from_json(const json& doc) {
  expect_object(doc, "document",
                {"format", "version", "feature_extractor", "solver", "edges", "metric_p",
                 "metric_r", "gains"},
                {"bicg_schedule", "validation_mse"});
  if (doc.at("format") != kModelFormat)
    throw ConstructionError("model: format must be '" + std::string(kModelFormat) + "'");
  if (!doc.at("version").is_number_integer() || doc.at("version").get<int>() != kModelVersion)
    throw ConstructionError("model: unsupported version");
  if (!doc.at("feature_extractor").is_string())
    throw ConstructionError("model: feature_extractor must be a string");

  Model m;
  m.feature_extractor = doc.at("feature_extractor").get<std::string>();

  const json& s = doc.at("solver");
  expect_object(s, "solver", {"mu", "gamma", "n_bicg_layers", "n_dr_layers", "tol", "cg_tol"});
  m.solver.mu = number(s, "mu", "solver");
  m.solver.gamma = number(s, "gamma", "solver");
  m.solver.n_bicg_layers = integer(s, "n_bicg_layers", "solver");
  m.solver.n_dr_layers = integer(s, "n_dr_layers", "solver");
  m.solver.tol = number(s, "tol", "solver");
  m.solver.cg_tol = number(s, "cg_tol", "solver");

  const json& e = doc.at("edges");
  expect_object(e, "edges", {"d_star", "window_radius", "max_neighbors"});
  m.edges.d_star = number(e, "d_star", "edges");
  m.edges.window_radius = integer(e, "window_radius", "edges");
  m.edges.max_neighbors = integer(e, "max_neighbors", "edges");

  m.metric_p = metric_from_json(doc.at("metric_p"), "metric_p");
  m.metric_r = metric_from_json(doc.at("metric_r"), "metric_r");

  const json& g = doc.at("gains");
  expect_object(g, "gains", {"s", "s2"});
  m.gain_s = number(g, "s", "gains");
  m.gain_s2 = number(g, "s2", "gains");

  if (doc.contains("bicg_schedule") && !doc.at("bicg_schedule").is_null()) {
    const json& sch = doc.at("bicg_schedule");
    expect_object(sch, "bicg_schedule", {"alpha", "beta"});
    LayerSchedule<double> schedule;
    schedule.alpha = number_array(sch.at("alpha"), "bicg_schedule.alpha");
    schedule.beta = number_array(sch.at("beta"), "bicg_schedule.beta");
    m.solver.bicg_schedule = std::move(schedule);
  }
  if (doc.contains("validation_mse") && !doc.at("validation_mse").is_null())
    m.validation_mse = number(doc, "validation_mse", "document");

  m.validate();
  return m;
}

Model load_model_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open model file " + path);
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ParseError("model: invalid JSON in " + path, e.byte);
  }
  return model_from_json(doc);
}

void save_model_file(const std::string& path, const Model& model) {
  model.validate();
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write model file " + path);
  f << model_to_json(model).dump(2) << '\n';
  if (!f) throw std::runtime_error("failed writing model file " + path);
}

}  // namespace gsvi
