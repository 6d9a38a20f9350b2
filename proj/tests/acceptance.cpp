// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Oracles are built here from Eigen's dense decompositions, not from the
// library's own solvers.

#include <chrono>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "gsvi/instances.hpp"
#include "gsvi/pipeline.hpp"
#include "gsvi/solver.hpp"
#include "gsvi/tuner.hpp"
#include "gsvi/verify.hpp"
#include "support.hpp"

using namespace gsvi;
using testing::dense;
using testing::oracle_solve;
using testing::rel_err;
using Rng = instances::Rng;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Vec stack(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

struct Verdict {
  bool pass;
  std::string detail;
};

char buf[512];

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- 1 -----------------------------------------------------------------------
Verdict map_solution_filter() {
  Rng rng(101);
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (int i = 0; i < 50; ++i) {
    const Eigen::Index n = Eigen::Index{4} << (i % 3);
    const Mat th = dense(instances::random_theta(n, rng).theta);
    const Vec y = instances::random_vector(n, rng);
    worst = std::max(worst, rel_err(dense_map_solve(th, y, 1.0), stack(y, Vec(th * y))));
  }
  const double ms = ms_since(t0);
  return {worst <= 1e-8 && ms < 1000.0, fmt("max rel err %.2e (<= 1e-8), %.1f ms (< 1000)", worst, ms)};
}

// --- 2 -----------------------------------------------------------------------
Verdict perturbed_matches_lu() {
  Rng rng(202);
  double worst = 0.0, slowest = 0.0;
  const SolverParams params;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = 4 + (i * 60) / 99;  // 4 .. 64
    const auto theta = instances::random_theta(n, rng);
    const auto p = instances::random_perturbation(n, n, 0.1 + 0.2 * (i % 3), rng);
    const Vec y = instances::random_vector(n, rng);
    const auto t0 = Clock::now();
    const Vec x = perturbed_interpolate(theta, p, y, params);
    slowest = std::max(slowest, ms_since(t0));
    const Mat th = dense(theta.theta);
    const Mat a = Mat::Identity(n, n) + th * dense(p.effective());
    worst = std::max(worst, rel_err(x, oracle_solve(a, Vec(th * y))));
  }
  return {worst <= 1e-6 && slowest < 50.0,
          fmt("max rel err %.2e (<= 1e-6), slowest solve %.3f ms (< 50)", worst, slowest)};
}

// --- 3 -----------------------------------------------------------------------
Verdict prox_steps_match_lu() {
  Rng rng(303);
  double g_worst = 0.0, h_worst = 0.0;
  SolverParams params;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = 4 + (i * 60) / 99;
    params.mu = 0.5 + (i % 4);
    params.gamma = 0.05 + 0.4 * ((i % 5) / 4.0);
    const auto lap = instances::random_laplacian(n, 0.2 + 0.8 * ((i % 7) / 6.0), rng);
    DRState s;
    s.x_prev = instances::random_vector(n, rng);
    s.x_curr = instances::random_vector(n, rng);
    s.z = instances::random_vector(n, rng);
    const Vec v = g_step(lap, s, params);
    const Mat ga = 2.0 * params.mu * dense(lap.effective()) + Mat::Identity(n, n) / params.gamma;
    g_worst = std::max(g_worst, rel_err(v, oracle_solve(ga, Vec((2.0 * s.z - s.x_curr) / params.gamma))));

    const auto theta = instances::random_theta(n, rng);
    const auto p = instances::random_perturbation(n, n, 0.2, rng);
    const Vec y = instances::random_vector(n, rng);
    const Vec z = h_step(theta, p, y, s, params);
    const Mat th = dense(theta.theta);
    const Mat ha = Mat::Identity(n, n) + th * dense(p.effective());
    const Vec rhs = th * (y + (s.x_prev - s.x_curr) / (2.0 * params.gamma));
    h_worst = std::max(h_worst, rel_err(z, oracle_solve(ha, rhs)));
  }
  return {g_worst <= 1e-8 && h_worst <= 1e-6,
          fmt("g-step %.2e (<= 1e-8), h-step %.2e (<= 1e-6)", g_worst, h_worst)};
}

// --- 4 -----------------------------------------------------------------------
Verdict zero_gain_is_baseline() {
  const GrayImage img = testing::textured_image(256, 404);
  const auto patches = sample_patches(img, 64, 12, 4);
  double worst = 0.0;
  const Model zero;
  for (const auto& tp : patches) {
    const Vec base = tp.prep.theta.apply(tp.prep.y);
    worst = std::max(worst, (interpolate_patch(tp.prep, zero, Mode::dr) - base).cwiseAbs().maxCoeff());
  }
  Rng rng(404);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Index n = 8 + i;
    const auto theta = instances::random_theta(n, rng);
    const auto p = instances::random_perturbation(n, n, 0.0, rng);
    const auto lap = instances::random_laplacian(n, 0.0, rng);
    const Vec y = instances::random_vector(n, rng);
    worst = std::max(worst, (dr_run(theta, p, lap, y, SolverParams{}) - theta.apply(y)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, fmt("max abs diff %.2e on 12 patches and 20 random instances (<= 1e-12)", worst)};
}

// --- 5 -----------------------------------------------------------------------
// The two-prior objective is quadratic, f(x) = x'Qx - 2b'x + c, so Q and b
// are recovered exactly from objective values alone and the optimum is a
// dense solve of Qx = b.
struct Quadratic {
  Mat q;
  Vec b;
};

Quadratic recover_quadratic(const std::function<double(const Vec&)>& f, Eigen::Index dim) {
  const double c = f(Vec::Zero(dim));
  Vec fe(dim), fm(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    fe[i] = f(Vec::Unit(dim, i));
    fm[i] = f(-Vec::Unit(dim, i));
  }
  Quadratic out{Mat(dim, dim), Vec(dim)};
  for (Eigen::Index i = 0; i < dim; ++i) {
    out.q(i, i) = 0.5 * (fe[i] + fm[i]) - c;
    out.b[i] = 0.25 * (fm[i] - fe[i]);
  }
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = i + 1; j < dim; ++j) {
      const double fij = f(Vec::Unit(dim, i) + Vec::Unit(dim, j));
      out.q(i, j) = out.q(j, i) = 0.5 * (fij - fe[i] - fe[j] + c);
    }
  return out;
}

Verdict objective_non_increase() {
  Rng rng(505);
  int violations = 0;
  double worst_grad = 0.0, worst_opt = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Eigen::Index n = 4 + (i % 3) * 2;
    const auto theta = instances::random_theta(n, rng);
    const Mat th = dense(theta.theta);
    const auto p = instances::random_perturbation(n, n, 0.05, rng);
    const auto lap = instances::random_laplacian(n, 0.5, rng);
    const Vec y = instances::random_vector(n, rng);
    const double mu = 1.0;
    auto f = [&](const Vec& x) { return objective_value_two_prior(x, y, th, p, lap, mu); };

    const double f_base = f(stack(y, theta.apply(y)));
    const double f_dr = f(stack(y, dr_run(theta, p, lap, y, SolverParams{})));
    const Vec x_opt = dense_two_prior_solve(th, p, lap, y, mu);
    const double f_opt = f(x_opt);

    const Quadratic quad = recover_quadratic(f, 2 * n);
    const Vec x_ref = oracle_solve(quad.q, quad.b);
    worst_opt = std::max(worst_opt, rel_err(x_opt, x_ref));
    worst_grad = std::max(worst_grad, two_prior_gradient(x_opt, y, th, p, lap, mu).norm());
    if (f_dr > f_base || f_opt > f_dr || f_opt > f_base) ++violations;
  }
  return {violations == 0 && worst_grad <= 1e-8 && worst_opt <= 1e-8,
          fmt("%d ordering violations, gradient norm %.2e (<= 1e-8), optimum vs quadratic oracle %.2e",
              violations, worst_grad, worst_opt)};
}

// --- 6 -----------------------------------------------------------------------
Verdict edge_weights() {
  const EdgeParams params;
  double worst = 0.0;
  for (int k = -400; k <= 400; ++k) {
    const double d = 50.0 * k / 400.0;
    worst = std::max(worst, std::abs(signed_weight(d, params) + std::tanh((d - params.d_star) / 2.0)));
  }
  const bool zero = signed_weight(params.d_star, params) == 0.0;
  const bool one = unsigned_weight(0.0) == 1.0;
  return {zero && one && worst <= 1e-12,
          fmt("w(d*) = 0: %s, w'(0) = 1: %s, max tanh deviation %.2e (<= 1e-12)", zero ? "yes" : "no",
              one ? "yes" : "no", worst)};
}

// --- 7 -----------------------------------------------------------------------
Verdict laplacian_properties() {
  double row_sum = 0.0, asym = 0.0, min_quad = std::numeric_limits<double>::infinity();
  int count = 0;
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Model model;
  model.gain_s2 = 1.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const GrayImage img = testing::textured_image(128, seed);
    for (const auto& tp : sample_patches(img, 32, 4, seed)) {
      const Mat l = dense(model_laplacian(tp.prep, model).effective());
      ++count;
      row_sum = std::max(row_sum, l.rowwise().sum().cwiseAbs().maxCoeff());
      asym = std::max(asym, (l - l.transpose()).cwiseAbs().maxCoeff());
      for (int k = 0; k < 100; ++k) {
        Vec x(l.rows());
        for (auto& v : x) v = u(rng);
        min_quad = std::min(min_quad, x.dot(l * x));
      }
    }
  }
  return {row_sum <= 1e-12 && asym == 0.0 && min_quad >= -1e-10,
          fmt("%d graphs: |row sum| %.2e (<= 1e-12), asymmetry %.1e (== 0), min x'Lx %.2e (>= -1e-10)",
              count, row_sum, asym, min_quad)};
}

// --- 8 -----------------------------------------------------------------------
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

Verdict tuning_non_degradation() {
  PatchDataset synth;
  const GrayImage img = testing::textured_image(192, 808);
  synth.train = sample_patches(img, 32, 10, 1);
  synth.validation = sample_patches(img, 32, 10, 2);
  const TrainConfig cfg;
  const auto natural = tune(Model{}, synth, cfg, TunableSet::standard());
  bool monotone = true;
  for (std::size_t i = 1; i < natural.history.size(); ++i)
    monotone = monotone && natural.history[i].val_mse <= natural.history[i - 1].val_mse;
  const double n0 = natural.history.front().val_mse, n1 = natural.history.back().val_mse;

  const auto den = tune(Model{}, denoisable_set(10, 11), cfg, TunableSet::gains());
  const double d0 = den.history.front().val_mse, d1 = den.history.back().val_mse;
  const double drop = (d0 - d1) / d0;
  return {monotone && n1 <= n0 && den.model.gain_s2 > 0.0 && drop >= 0.01,
          fmt("synthetic val %.4e -> %.4e (monotone: %s); denoisable s2 = %.3g, val drop %.1f%% (>= 1%%)",
              n0, n1, monotone ? "yes" : "no", den.model.gain_s2, 100.0 * drop)};
}

// --- 9 -----------------------------------------------------------------------
GrayImage masked_of(const GrayImage& img) {
  const auto m = apply_checkerboard_mask(img);
  return assemble_image(m.part, m.y, Vec::Zero(m.part.n()));
}

Verdict end_to_end() {
  const GrayImage img = testing::textured_image(512, 909);
  const auto m = apply_checkerboard_mask(img);
  const GrayImage strawman = assemble_image(m.part, m.y, Vec::Constant(m.part.n(), 0.5));
  Model model;
  model.gain_s = 0.005;
  model.gain_s2 = 0.02;
  const auto t0 = Clock::now();
  const auto run = interpolate_image(masked_of(img), model, Mode::dr, PatchGrid{}, 1);
  const double sec = ms_since(t0) / 1000.0;
  const double p_dr = psnr(run.output, img), p_straw = psnr(strawman, img);

  const GrayImage ramp = testing::gradient_image(256, 256);
  const auto base = interpolate_image(masked_of(ramp), Model{}, Mode::baseline, PatchGrid{}, 1);
  const double p_ramp = psnr(base.output, ramp);
  return {run.failures.empty() && p_dr >= p_straw + 10.0 && p_ramp >= 40.0 && sec < 60.0,
          fmt("dr %.2f dB vs strawman %.2f dB (gap >= 10), gradient baseline %.2f dB (>= 40), "
              "512x512 in %.2f s (< 60)",
              p_dr, p_straw, p_ramp, sec)};
}

// --- 10 ----------------------------------------------------------------------
Verdict protocol_defaults() {
  const PatchGrid grid;
  const SolverParams solver;
  const TrainConfig train;
  const bool ok = grid.patch_size == 64 && solver.n_bicg_layers == 15 &&
                  solver.n_dr_layers == 15 && train.batch_size == 8 && train.step_size == 1e-3 &&
                  train.patience == 5 && check_protocol_defaults().passed;
  return {ok, fmt("patch %d, bicg layers %d, dr layers %d, batch %d, step %g, patience %d",
                  grid.patch_size, solver.n_bicg_layers, solver.n_dr_layers, train.batch_size,
                  train.step_size, train.patience)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Verdict (*)()>> criteria{
      {"map solution filter", map_solution_filter},
      {"perturbed solve vs dense LU", perturbed_matches_lu},
      {"prox steps vs dense LU", prox_steps_match_lu},
      {"zero gains reproduce the base interpolator", zero_gain_is_baseline},
      {"objective non-increase", objective_non_increase},
      {"edge-weight identities", edge_weights},
      {"laplacian properties", laplacian_properties},
      {"tuning non-degradation", tuning_non_degradation},
      {"end-to-end sanity", end_to_end},
      {"protocol defaults", protocol_defaults},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s criterion %zu: %s | %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                v.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
