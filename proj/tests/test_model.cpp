#include "doctest.h"

#include <fstream>

#include "gsvi/model.hpp"
#include "support.hpp"

using namespace gsvi;
using nlohmann::json;

namespace {

Model non_default_model() {
  Model m;
  m.solver.mu = 2.5;
  m.solver.gamma = 0.07;
  m.solver.n_bicg_layers = 3;
  m.solver.n_dr_layers = 2;
  m.solver.bicg_schedule = LayerSchedule<double>{{0.1, 0.2, 0.3}, {0.0, 0.5, 0.25}};
  m.edges.d_star = 1.5;
  m.edges.window_radius = 2;
  m.edges.max_neighbors = 5;
  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(8, 8);
  l(3, 1) = -0.125;
  l(7, 7) = 0.3;
  m.metric_p = MetricMatrix(l);
  m.gain_s = -0.02;
  m.gain_s2 = 0.1;
  m.validation_mse = 1.25e-3;
  return m;
}

void check_same(const Model& a, const Model& b) {
  CHECK(model_to_json(a) == model_to_json(b));
  CHECK(a.solver.mu == b.solver.mu);
  CHECK(a.gain_s == b.gain_s);
  CHECK(a.metric_p.factor() == b.metric_p.factor());
  CHECK(a.solver.bicg_schedule.has_value() == b.solver.bicg_schedule.has_value());
  CHECK(a.validation_mse == b.validation_mse);
}

}  // namespace

TEST_CASE("default model starts at the base interpolator") {
  const Model m;
  CHECK(m.gain_s == 0.0);
  CHECK(m.gain_s2 == 0.0);
  CHECK_NOTHROW(m.validate());
  const json j = model_to_json(m);
  CHECK(j["format"] == "gsv-interp-model");
  CHECK(j["version"] == 1);
  CHECK(j["bicg_schedule"].is_null());
}

TEST_CASE("model JSON round trip is field-identical") {
  const Model m = non_default_model();
  check_same(model_from_json(model_to_json(m)), m);

  const auto dir = testing::temp_dir("model");
  const std::string path = (dir / "m.json").string();
  save_model_file(path, m);
  check_same(load_model_file(path), m);
  // Saving what was loaded reproduces the same bytes.
  save_model_file((dir / "m2.json").string(), load_model_file(path));
  std::ifstream f1(path), f2(dir / "m2.json");
  std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
}

TEST_CASE("strict schema: unknown, missing and out-of-range fields are rejected") {
  const json good = model_to_json(Model{});
  auto broken = [&](auto edit) {
    json j = good;
    edit(j);
    return j;
  };
  CHECK_THROWS_AS(model_from_json(broken([](json& j) { j["extra"] = 1; })), ConstructionError);
  CHECK_THROWS_AS(model_from_json(broken([](json& j) { j["solver"]["momentum"] = 1; })),
                  ConstructionError);
  CHECK_THROWS_AS(model_from_json(broken([](json& j) { j.erase("gains"); })), ConstructionError);
  CHECK_THROWS_AS(model_from_json(broken([](json& j) { j["version"] = 2; })), ConstructionError);
  CHECK_THROWS_AS(model_from_json(broken([](json& j) { j["solver"]["gamma"] = 1.5; })),
                  ConstructionError);
  CHECK_THROWS_AS(model_from_json(broken([](json& j) { j["gains"]["s2"] = -0.1; })),
                  ConstructionError);
  CHECK_THROWS_AS(model_from_json(broken([](json& j) { j["solver"]["n_dr_layers"] = 1.5; })),
                  ConstructionError);
  CHECK_THROWS_AS(model_from_json(broken([](json& j) { j["metric_p"][0][3] = 1.0; })),
                  ConstructionError);
  CHECK_THROWS_AS(model_from_json(broken([](json& j) { j["metric_r"] = json::array({json::array({1.0})}); })),
                  ConstructionError);
  CHECK_THROWS_AS(model_from_json(broken([](json& j) { j["feature_extractor"] = "cnn"; })),
                  ConstructionError);
  CHECK_THROWS_AS(
      model_from_json(broken([](json& j) { j["bicg_schedule"] = {{"alpha", {1.0}}, {"beta", {0.0}}}; })),
      ConstructionError);
  CHECK_NOTHROW(model_from_json(broken([](json& j) { j.erase("validation_mse"); })));
}

TEST_CASE("invalid JSON files report a parse offset") {
  const auto dir = testing::temp_dir("model_bad");
  const std::string path = (dir / "bad.json").string();
  std::ofstream(path) << "{\"format\": ";
  CHECK_THROWS_AS(load_model_file(path), ParseError);
  CHECK_THROWS_AS(load_model_file((dir / "missing.json").string()), std::runtime_error);
}
