#include "gsvi/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gsvi/parallel.hpp"

namespace gsvi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ParamHandle metric_diagonal(const std::string& name, MetricMatrix Model::*metric, int j) {
  return {name + "[" + std::to_string(j) + "]", 0.0, 10.0,
          [metric, j](const Model& m) { return (m.*metric).factor()(j, j); },
          [metric, j](Model& m, double v) {
            Eigen::MatrixXd f = (m.*metric).factor();
            f(j, j) = v;
            m.*metric = MetricMatrix(f);
          }};
}

double probe(const std::function<double(double)>& loss, double theta) {
  const double v = loss(theta);
  if (!std::isfinite(v)) throw DivergenceError("non-finite loss", 0);
  return v;
}

}  // namespace

double ParamHandle::clamp(double v) const { return std::clamp(v, lower, upper); }

TunableSet TunableSet::gains() {
  TunableSet t;
  t.handles.push_back({"s", -1.0, 1.0, [](const Model& m) { return m.gain_s; },
                       [](Model& m, double v) { m.gain_s = v; }});
  t.handles.push_back({"s2", 0.0, 1.0, [](const Model& m) { return m.gain_s2; },
                       [](Model& m, double v) { m.gain_s2 = v; }});
  return t;
}

TunableSet TunableSet::standard(int k_dim) {
  TunableSet t = gains();
  t.handles.push_back({"mu", kOpenMargin, 100.0, [](const Model& m) { return m.solver.mu; },
                       [](Model& m, double v) { m.solver.mu = v; }});
  t.handles.push_back({"gamma", 0.01 + kOpenMargin, 0.99 - kOpenMargin,
                       [](const Model& m) { return m.solver.gamma; },
                       [](Model& m, double v) { m.solver.gamma = v; }});
  t.handles.push_back({"d_star", kOpenMargin, 100.0, [](const Model& m) { return m.edges.d_star; },
                       [](Model& m, double v) { m.edges.d_star = v; }});
  for (int j = 0; j < k_dim; ++j) t.handles.push_back(metric_diagonal("metric_p", &Model::metric_p, j));
  for (int j = 0; j < k_dim; ++j) t.handles.push_back(metric_diagonal("metric_r", &Model::metric_r, j));
  return t;
}

void TunableSet::add_schedule(const Model& model) {
  if (!model.solver.bicg_schedule) return;
  const std::size_t len = model.solver.bicg_schedule->size();
  for (std::size_t i = 0; i < len; ++i)
    handles.push_back({"alpha[" + std::to_string(i) + "]", -kInf, kInf,
                       [i](const Model& m) { return m.solver.bicg_schedule->alpha[i]; },
                       [i](Model& m, double v) { m.solver.bicg_schedule->alpha[i] = v; }});
  // beta[0] never enters the recurrence.
  for (std::size_t i = 1; i < len; ++i)
    handles.push_back({"beta[" + std::to_string(i) + "]", -kInf, kInf,
                       [i](const Model& m) { return m.solver.bicg_schedule->beta[i]; },
                       [i](Model& m, double v) { m.solver.bicg_schedule->beta[i] = v; }});
}

void TunableSet::check(const Model& model) const {
  for (const auto& h : handles) {
    const double v = h.get(model);
    if (!h.contains(v))
      throw ConstructionError("tunable " + h.name + " = " + std::to_string(v) + " is outside [" +
                              std::to_string(h.lower) + ", " + std::to_string(h.upper) + "]");
  }
}

void TrainConfig::validate() const {
  if (!(step_size > 0.0) || batch_size <= 0 || patience <= 0 || !(fd_epsilon > 0.0) ||
      max_epochs <= 0 || threads <= 0)
    throw ConstructionError("train config: all settings must be positive");
}

TrainingPatch make_training_patch(const GrayImage& truth) {
  PixelPartition part = checkerboard_partition(truth.width(), truth.height());
  Vec y(part.m()), t(part.n());
  for (Eigen::Index i = 0; i < part.m(); ++i) {
    const Pixel& p = part.m_index()[static_cast<std::size_t>(i)];
    y[i] = truth(p.row, p.col);
  }
  for (Eigen::Index i = 0; i < part.n(); ++i) {
    const Pixel& p = part.n_index()[static_cast<std::size_t>(i)];
    t[i] = truth(p.row, p.col);
  }
  return make_training_patch(std::move(part), std::move(y), std::move(t));
}

TrainingPatch make_training_patch(PixelPartition part, Vec y, Vec truth_n) {
  if (truth_n.size() != part.n())
    throw DimensionError("training patch: truth has " + std::to_string(truth_n.size()) +
                         " entries, partition has " + std::to_string(part.n()) + " missing");
  return {prepare_patch(std::move(part), std::move(y)), std::move(truth_n)};
}

std::vector<TrainingPatch> sample_patches(const GrayImage& img, int patch_size, int count,
                                          std::uint64_t seed) {
  if (patch_size <= 0 || patch_size > img.width() || patch_size > img.height())
    throw DimensionError("sample_patches: patch size " + std::to_string(patch_size) +
                         " does not fit a " + std::to_string(img.width()) + "x" +
                         std::to_string(img.height()) + " image");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> rows(0, img.height() - patch_size);
  std::uniform_int_distribution<int> cols(0, img.width() - patch_size);
  std::vector<TrainingPatch> out;
  out.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) {
    const int r = rows(rng);
    const int c = cols(rng);
    out.push_back(make_training_patch(img.crop(r, c, patch_size, patch_size)));
  }
  return out;
}

double loss_mse(const Vec& pred, const Vec& truth) {
  if (pred.size() != truth.size())
    throw DimensionError("loss_mse: lengths " + std::to_string(pred.size()) + " and " +
                         std::to_string(truth.size()) + " differ");
  if (pred.size() == 0) return 0.0;
  return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

double batch_loss(const Model& model, const std::vector<const TrainingPatch*>& batch,
                  int threads) {
  if (batch.empty()) throw ConstructionError("batch_loss: empty batch");
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    losses[i] = loss_mse(interpolate_patch(batch[i]->prep, model, Mode::dr), batch[i]->truth_n);
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

double dataset_loss(const Model& model, const std::vector<TrainingPatch>& patches, int threads) {
  std::vector<const TrainingPatch*> all;
  all.reserve(patches.size());
  for (const auto& p : patches) all.push_back(&p);
  return batch_loss(model, all, threads);
}

std::optional<double> fd_gradient(const std::function<double(double)>& loss, double theta,
                                  double eps, double lower, double upper) {
  if (!(eps > 0.0)) throw ConstructionError("fd_gradient: epsilon must be positive");
  const bool room_below = theta - eps >= lower;
  const bool room_above = theta + eps <= upper;
  try {
    if (room_below && room_above)
      return (probe(loss, theta + eps) - probe(loss, theta - eps)) / (2.0 * eps);
    if (room_above) return (probe(loss, theta + eps) - probe(loss, theta)) / eps;
    if (room_below) return (probe(loss, theta) - probe(loss, theta - eps)) / eps;
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return std::nullopt;
}

std::optional<double> fd_gradient(const ParamHandle& handle,
                                  const std::vector<const TrainingPatch*>& batch,
                                  const Model& model, double eps, int threads) {
  auto loss = [&](double v) {
    Model m = model;
    handle.set(m, v);
    return batch_loss(m, batch, threads);
  };
  return fd_gradient(loss, handle.get(model), eps, handle.lower, handle.upper);
}

TuneResult tune(const Model& model, const PatchDataset& data, const TrainConfig& cfg,
                const TunableSet& tunables) {
  cfg.validate();
  if (data.train.empty()) throw ConstructionError("tune: training set is empty");
  model.validate();
  tunables.check(model);
  const auto& val_set = data.validation.empty() ? data.train : data.validation;

  TuneResult result{model, {}};
  Model& cur = result.model;
  double cur_val = dataset_loss(cur, val_set, cfg.threads);
  result.history.push_back({0, dataset_loss(cur, data.train, cfg.threads), cur_val, 0});

  std::vector<double> eta(tunables.size(), cfg.step_size);
  const double eta_floor = cfg.step_size / 1024.0;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  int stale = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs && !tunables.empty(); ++epoch) {
    const double epoch_start = cur_val;
    int accepted = 0;
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const TrainingPatch*> batch;
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = b; i < end; ++i) batch.push_back(&data.train[order[i]]);

      for (std::size_t h = 0; h < tunables.size(); ++h) {
        const ParamHandle& handle = tunables.handles[h];
        const auto g = fd_gradient(handle, batch, cur, cfg.fd_epsilon, cfg.threads);
        if (!g || *g == 0.0) continue;
        const double theta = handle.get(cur);
        const double next = handle.clamp(theta - eta[h] * (*g > 0.0 ? 1.0 : -1.0));
        if (next == theta) continue;

        Model cand = cur;
        handle.set(cand, next);
        double v = std::numeric_limits<double>::quiet_NaN();
        try {
          cand.validate();
          v = dataset_loss(cand, val_set, cfg.threads);
        } catch (const std::exception&) {
        }
        if (std::isfinite(v) && v <= cur_val) {
          cur = std::move(cand);
          cur_val = v;
          ++accepted;
          const double span = std::isfinite(handle.upper - handle.lower)
                                  ? 0.25 * (handle.upper - handle.lower)
                                  : 1.0;
          eta[h] = std::min(2.0 * eta[h], span);
        } else {
          eta[h] = std::max(0.5 * eta[h], eta_floor);
        }
      }
    }

    result.history.push_back(
        {epoch, dataset_loss(cur, data.train, cfg.threads), cur_val, accepted});
    stale = cur_val < epoch_start ? 0 : stale + 1;
    if (stale >= cfg.patience) break;
  }
  cur.validation_mse = cur_val;
  return result;
}

void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history) {
  const auto old = os.precision(17);
  os << "epoch,train_mse,val_mse\n";
  for (const auto& r : history) os << r.epoch << ',' << r.train_mse << ',' << r.val_mse << '\n';
  os.precision(old);
}

}  // namespace gsvi
