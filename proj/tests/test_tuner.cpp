#include "doctest.h"

#include <random>
#include <sstream>

#include "gsvi/tuner.hpp"
#include "support.hpp"

using namespace gsvi;

namespace {

// Constant truth, noisy observations: smoothing the missing pixels helps.
PatchDataset denoisable_set(int per_split, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.08);
  PatchDataset d;
  for (int k = 0; k < 2 * per_split; ++k) {
    auto part = checkerboard_partition(16, 16);
    Vec y(part.m());
    for (auto& v : y) v = 0.5 + noise(rng);
    auto p = make_training_patch(part, y, Vec::Constant(part.n(), 0.5));
    (k < per_split ? d.train : d.validation).push_back(std::move(p));
  }
  return d;
}

}  // namespace

TEST_CASE("mse loss") {
  CHECK(loss_mse(Vec::Zero(3), Vec::Zero(3)) == 0.0);
  CHECK(loss_mse(Vec::Ones(4), Vec::Zero(4)) == 1.0);
  CHECK(loss_mse((Vec(2) << 0, 2).finished(), (Vec(2) << 1, 0).finished()) == 2.5);
  CHECK_THROWS_AS(loss_mse(Vec::Zero(2), Vec::Zero(3)), DimensionError);
}

TEST_CASE("finite differences") {
  auto sq = [](double t) { return t * t; };
  CHECK(*fd_gradient(sq, 1.0, 1e-4, -10, 10) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(*fd_gradient([](double) { return 3.0; }, 0.5, 1e-4, 0, 1) == 0.0);
  // At the lower bound only the inward probe is taken.
  const auto at_bound = fd_gradient(sq, 0.0, 1e-4, 0.0, 1.0);
  REQUIRE(at_bound.has_value());
  CHECK(*at_bound == doctest::Approx(1e-4));
  auto fails = [](double t) -> double {
    if (t > 1.0) throw std::runtime_error("no");
    return t;
  };
  CHECK_FALSE(fd_gradient(fails, 1.0 - 1e-5, 1e-4, -10, 10).has_value());
  CHECK_FALSE(fd_gradient([](double) { return std::nan(""); }, 0.0, 1e-4, -1, 1).has_value());
}

TEST_CASE("tunable sets keep their bounds") {
  const auto gains = TunableSet::gains();
  REQUIRE(gains.size() == 2);
  CHECK(gains.handles[0].lower == -1.0);
  CHECK(gains.handles[1].lower == 0.0);
  CHECK(gains.handles[1].clamp(-3.0) == 0.0);

  const auto std_set = TunableSet::standard();
  CHECK(std_set.size() == 5 + 2 * FeatureSet::kDefaultDim);
  Model m;
  CHECK_NOTHROW(std_set.check(m));
  for (const auto& h : std_set.handles) {
    Model copy = m;
    h.set(copy, h.clamp(h.get(m) + 0.01));
    CHECK(h.contains(h.get(copy)));
  }
  m.solver.bicg_schedule = LayerSchedule<double>{{0.5, 0.5}, {0.0, 0.1}};
  TunableSet sched;
  sched.add_schedule(m);
  CHECK(sched.size() == 3);  // alpha0, alpha1, beta1
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK(cfg.batch_size == 8);
  CHECK(cfg.step_size == 1e-3);
  CHECK(cfg.patience == 5);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConstructionError);
}

TEST_CASE("with nothing to tune the history is the starting point") {
  const auto d = denoisable_set(2, 1);
  const auto res = tune(Model{}, d, TrainConfig{}, TunableSet{});
  REQUIRE(res.history.size() == 1);
  CHECK(res.history[0].epoch == 0);
  CHECK(res.model.gain_s2 == 0.0);
  CHECK(res.history[0].val_mse == doctest::Approx(dataset_loss(Model{}, d.validation)));
  CHECK_THROWS_AS(tune(Model{}, PatchDataset{}, TrainConfig{}, TunableSet::gains()),
                  std::invalid_argument);
}

TEST_CASE("the smoothing gain has a negative loss slope on a denoisable patch") {
  const auto d = denoisable_set(1, 2);
  std::vector<const TrainingPatch*> batch{&d.train[0]};
  const auto g = fd_gradient(TunableSet::gains().handles[1], batch, Model{}, 1e-4);
  REQUIRE(g.has_value());
  CHECK(*g < 0.0);
}

TEST_CASE("tuning on a denoisable set raises s2 and lowers validation error") {
  const auto d = denoisable_set(4, 11);
  TrainConfig cfg;
  const auto res = tune(Model{}, d, cfg, TunableSet::gains());
  CHECK(res.model.gain_s2 > 0.0);
  const double before = res.history.front().val_mse;
  const double after = res.history.back().val_mse;
  CHECK(after <= 0.99 * before);
  for (std::size_t i = 1; i < res.history.size(); ++i)
    CHECK(res.history[i].val_mse <= res.history[i - 1].val_mse);
  REQUIRE(res.model.validation_mse.has_value());
  CHECK(*res.model.validation_mse == after);

  // Same inputs, same result.
  const auto again = tune(Model{}, d, cfg, TunableSet::gains());
  CHECK(again.model.gain_s == res.model.gain_s);
  CHECK(again.model.gain_s2 == res.model.gain_s2);
}

TEST_CASE("tuning natural-looking patches never loses to the starting point") {
  const GrayImage img = testing::textured_image(96, 4);
  PatchDataset d;
  d.train = sample_patches(img, 16, 6, 1);
  d.validation = sample_patches(img, 16, 6, 2);
  TrainConfig cfg;
  cfg.max_epochs = 4;
  const auto res = tune(Model{}, d, cfg, TunableSet::standard());
  CHECK(res.history.back().val_mse <= res.history.front().val_mse);
  const auto handles = TunableSet::standard();
  for (const auto& h : handles.handles) CHECK(h.contains(h.get(res.model)));
  CHECK_NOTHROW(res.model.validate());
}

TEST_CASE("sampled patches are reproducible and history CSV is parseable") {
  const GrayImage img = testing::smooth_image(40, 30);
  const auto a = sample_patches(img, 16, 3, 5);
  const auto b = sample_patches(img, 16, 3, 5);
  REQUIRE(a.size() == 3);
  CHECK(a[2].truth_n == b[2].truth_n);
  CHECK(a[0].truth_n.size() == 128);
  CHECK_THROWS_AS(sample_patches(img, 32, 1, 0), DimensionError);

  std::ostringstream os;
  write_history_csv(os, {{0, 0.5, 0.25, 0}, {1, 0.125, 0.0625, 2}});
  CHECK(os.str() == "epoch,train_mse,val_mse\n0,0.5,0.25\n1,0.125,0.0625\n");
}
