#include "gsvi/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "gsvi/imaging.hpp"
#include "gsvi/instances.hpp"
#include "gsvi/pipeline.hpp"
#include "gsvi/tuner.hpp"

namespace gsvi {

namespace {

using instances::Rng;

double rel_err(const Vec& got, const Vec& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

Mat dense(const SpMat& m) { return Mat(m.toDense()); }

Vec stack(const Vec& top, const Vec& bottom) {
  Vec out(top.size() + bottom.size());
  out << top, bottom;
  return out;
}

CheckResult finish(CheckResult r) {
  r.passed = r.max_error <= r.tolerance;
  return r;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

/// Smooth random test image: a few random cosines.
GrayImage smooth_image(int size, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PixelArray px(size, size);
  const double a = u(rng), b = u(rng), c = u(rng);
  for (int r = 0; r < size; ++r)
    for (int col = 0; col < size; ++col)
      px(r, col) = 0.5 + 0.2 * std::cos(0.3 * a * r + 0.2 * b * col) + 0.2 * std::sin(0.25 * c * (r - col));
  return GrayImage(px);
}

}  // namespace

CheckResult check_map_filter(std::uint64_t seed) {
  Rng rng(seed);
  CheckResult r{"map_solution_filter", 50, 0.0, 1e-8, false, {}};
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < r.instances; ++i) {
    const Eigen::Index n = Eigen::Index{4} << (i % 3);
    const Mat theta = dense(instances::random_theta(n, rng).theta);
    const Vec y = instances::random_vector(n, rng);
    const Vec x = dense_map_solve(theta, y, 1.0);
    r.max_error = std::max(r.max_error, rel_err(x, stack(y, theta * y)));
  }
  r.note = "total " + std::to_string(elapsed_ms(t0)) + " ms";
  return finish(r);
}

CheckResult check_map_mu_independence(std::uint64_t seed) {
  Rng rng(seed);
  CheckResult r{"map_mu_independence", 10, 0.0, 1e-8, false, {}};
  for (int i = 0; i < r.instances; ++i) {
    const Mat theta = dense(instances::random_theta(8, rng).theta);
    const Vec y = instances::random_vector(8, rng);
    const Vec ref = dense_map_solve(theta, y, 1.0);
    for (double mu : {0.1, 10.0})
      r.max_error = std::max(r.max_error, rel_err(dense_map_solve(theta, y, mu), ref));
  }
  return finish(r);
}

CheckResult check_perturbed_vs_lu(std::uint64_t seed) {
  Rng rng(seed);
  CheckResult r{"perturbed_vs_lu", 100, 0.0, 1e-6, false, {}};
  const Eigen::Index sizes[] = {4, 8, 16, 32, 64};
  double worst_ms = 0.0;
  for (int i = 0; i < r.instances; ++i) {
    const Eigen::Index n = sizes[i % 5];
    const auto theta = instances::random_theta(n, rng);
    const auto p = instances::random_perturbation(n, n, 0.2, rng);
    const Vec y = instances::random_vector(n, rng);
    const auto t0 = std::chrono::steady_clock::now();
    const Vec x = perturbed_interpolate(theta, p, y, SolverParams{});
    worst_ms = std::max(worst_ms, elapsed_ms(t0));
    const Mat th = dense(theta.theta);
    const Mat a = Mat::Identity(n, n) + th * dense(p.effective());
    r.max_error = std::max(r.max_error, rel_err(x, lu_solve(a, Vec(th * y))));
  }
  r.note = "slowest solve " + std::to_string(worst_ms) + " ms";
  return finish(r);
}

CheckResult check_h_step_vs_lu(std::uint64_t seed) {
  Rng rng(seed);
  CheckResult r{"h_step_vs_lu", 100, 0.0, 1e-6, false, {}};
  const SolverParams params;
  for (int i = 0; i < r.instances; ++i) {
    const Eigen::Index n = Eigen::Index{4} << (i % 4);
    const auto theta = instances::random_theta(n, rng);
    const auto p = instances::random_perturbation(n, n, 0.2, rng);
    const Vec y = instances::random_vector(n, rng);
    DRState s;
    s.x_prev = instances::random_vector(n, rng);
    s.x_curr = instances::random_vector(n, rng);
    const Vec z = h_step(theta, p, y, s, params);
    const Mat th = dense(theta.theta);
    const Mat a = Mat::Identity(n, n) + th * dense(p.effective());
    const Vec rhs = th * (y + (s.x_prev - s.x_curr) / (2.0 * params.gamma));
    r.max_error = std::max(r.max_error, rel_err(z, lu_solve(a, rhs)));
  }
  return finish(r);
}

CheckResult check_g_step_vs_lu(std::uint64_t seed, const GStepFn& g_step_fn) {
  Rng rng(seed);
  std::uniform_real_distribution<double> gain(0.1, 1.0), gamma(0.05, 0.95), mu(0.1, 10.0);
  CheckResult r{"g_step_vs_lu", 100, 0.0, 1e-8, false, {}};
  for (int i = 0; i < r.instances; ++i) {
    const Eigen::Index n = 4 + i % 29;
    const auto lap = instances::random_laplacian(n, gain(rng), rng);
    SolverParams params;
    params.gamma = gamma(rng);
    params.mu = mu(rng);
    DRState s;
    s.z = instances::random_vector(n, rng);
    s.x_curr = instances::random_vector(n, rng);
    s.x_prev = s.x_curr;
    const Vec v = g_step_fn(lap, s, params);
    const Mat a = 2.0 * params.mu * dense(lap.effective()) +
                  Mat::Identity(n, n) / params.gamma;
    const Vec rhs = (2.0 * s.z - s.x_curr) / params.gamma;
    r.max_error = std::max(r.max_error, rel_err(v, lu_solve(a, rhs)));
  }
  return finish(r);
}

CheckResult check_two_prior_stationarity(std::uint64_t seed) {
  Rng rng(seed);
  CheckResult r{"two_prior_stationarity", 20, 0.0, 1e-8, false, "gradient norm"};
  for (int i = 0; i < r.instances; ++i) {
    const Eigen::Index n = Eigen::Index{4} << (i % 3);
    const Mat theta = dense(instances::random_theta(n, rng).theta);
    const auto p = instances::random_perturbation(n, n, 0.1, rng);
    const auto lap = instances::random_laplacian(n, 0.5, rng);
    const Vec y = instances::random_vector(n, rng);
    const Vec x = dense_two_prior_solve(theta, p, lap, y, 1.0);
    r.max_error = std::max(r.max_error, two_prior_gradient(x, y, theta, p, lap, 1.0).norm());
  }
  return finish(r);
}

CheckResult check_dr_objective(std::uint64_t seed) {
  Rng rng(seed);
  CheckResult r{"dr_objective_descent", 20, 0.0, 1e-12, false,
                "worst relative excess of f(dr) over f(theta y), or of f(opt) over either"};
  const SolverParams params;
  for (int i = 0; i < r.instances; ++i) {
    const Eigen::Index n = Eigen::Index{4} << (i % 3);
    const auto theta = instances::random_theta(n, rng);
    const Mat th = dense(theta.theta);
    const auto p = instances::random_perturbation(n, n, 0.05, rng);
    const auto lap = instances::random_laplacian(n, 0.5, rng);
    const Vec y = instances::random_vector(n, rng);
    const Vec x_dr = dr_run(theta, p, lap, y, params);
    const double f_dr = objective_value_two_prior(stack(y, x_dr), y, th, p, lap, params.mu);
    const double f_base =
        objective_value_two_prior(stack(y, theta.apply(y)), y, th, p, lap, params.mu);
    const double f_opt = objective_value_two_prior(dense_two_prior_solve(th, p, lap, y, params.mu),
                                                   y, th, p, lap, params.mu);
    const double scale = std::max(f_base, 1e-300);
    r.max_error = std::max({r.max_error, (f_dr - f_base) / scale, (f_opt - f_dr) / scale});
  }
  return finish(r);
}

CheckResult check_dr_baseline(std::uint64_t seed) {
  Rng rng(seed);
  CheckResult r{"dr_zero_gain_baseline", 0, 0.0, 1e-12, false, "max abs difference"};
  const SolverParams params;
  for (int size : {8, 16, 32}) {
    for (int k = 0; k < 3; ++k) {
      const auto masked = apply_checkerboard_mask(smooth_image(size, rng));
      const PreparedPatch prep = prepare_patch(masked.part, masked.y);
      const Model model;
      const Vec x = interpolate_patch(prep, model, Mode::dr);
      r.max_error = std::max(r.max_error, (x - prep.theta.apply(prep.y)).cwiseAbs().maxCoeff());
      ++r.instances;
    }
  }
  for (int k = 0; k < 6; ++k) {
    const Eigen::Index n = 8 << (k % 3);
    const auto theta = instances::random_theta(n, rng);
    DirectedPerturbation p = instances::random_perturbation(n, n, 0.0, rng);
    DenoisingLaplacian lap = instances::random_laplacian(n, 0.0, rng);
    const Vec y = instances::random_vector(n, rng);
    const Vec x = dr_run(theta, p, lap, y, params);
    r.max_error = std::max(r.max_error, (x - theta.apply(y)).cwiseAbs().maxCoeff());
    ++r.instances;
  }
  return finish(r);
}

CheckResult check_cascade(std::uint64_t seed) {
  Rng rng(seed);
  CheckResult r{"cascade_residual", 20, 0.0, 1e-9, false, {}};
  for (int i = 0; i < r.instances; ++i) {
    const Eigen::Index n = 6;
    const Mat th = dense(instances::random_theta(n, rng).theta);
    const Mat p1 = dense(instances::random_perturbation(n, n, 0.2, rng).effective());
    const Mat p2 = dense(instances::random_perturbation(n, n, 0.2, rng).effective());
    const Vec y = instances::random_vector(n, rng);
    const Vec x2 = cascade_interpolate_dense(th, p1, p2, y);
    const Mat theta_p = lu_inverse(Mat(Mat::Identity(n, n) + th * p1));
    const Vec x1 = theta_p * th * y;
    const Vec residual = (Mat::Identity(n, n) + theta_p * th * p2) * x2 - x1;
    r.max_error = std::max(r.max_error, residual.norm() / std::max(x1.norm(), 1e-300));
  }
  return finish(r);
}

CheckResult check_adjoints(std::uint64_t seed) {
  Rng rng(seed);
  CheckResult r{"adjoint_consistency", 30, 0.0, 1e-12, false, "<u, A v> vs <A^T u, v>"};
  auto gap = [](double lhs, double rhs, double scale) {
    return std::abs(lhs - rhs) / std::max(scale, 1e-300);
  };
  for (int i = 0; i < r.instances; ++i) {
    const Eigen::Index n = 4 + 2 * i;
    const auto theta = instances::random_theta(n, rng);
    const auto p = instances::random_perturbation(n, n, 0.3, rng);
    const Vec u = instances::random_vector(n, rng, -1.0, 1.0);
    const Vec v = instances::random_vector(n, rng, -1.0, 1.0);
    const auto op = perturbed_operator(theta, p);
    const Vec av = op.apply(v), atu = op.apply_transpose(u);
    r.max_error = std::max(r.max_error, gap(u.dot(av), atu.dot(v), u.norm() * av.norm()));
    const Vec tv = theta.apply(v), ttu = theta.apply_transpose(u);
    r.max_error = std::max(r.max_error, gap(u.dot(tv), ttu.dot(v), u.norm() * tv.norm()));
    const Vec pv = p.apply(v), ptu = p.apply_transpose(u);
    r.max_error = std::max(r.max_error, gap(u.dot(pv), ptu.dot(v), u.norm() * pv.norm()));
  }
  return finish(r);
}

CheckResult check_edge_weights() {
  CheckResult r{"edge_weight_identities", 0, 0.0, 1e-12, false, {}};
  const EdgeParams params;
  bool exact = signed_weight(params.d_star, params) == 0.0 && unsigned_weight(0.0) == 1.0;
  for (int i = -5000; i <= 5000; ++i) {
    const double d = i * 0.01;
    const double want = -std::tanh((d - params.d_star) / 2.0);
    r.max_error = std::max(r.max_error, std::abs(signed_weight(d, params) - want));
    ++r.instances;
  }
  if (!exact) {
    r.note = "signed_weight(d*) != 0 or unsigned_weight(0) != 1";
    r.max_error = std::max(r.max_error, 1.0);
  }
  return finish(r);
}

CheckResult check_laplacians(std::uint64_t seed) {
  Rng rng(seed);
  CheckResult r{"laplacian_properties", 0, 0.0, 1e-12, false, "max |row sum|"};
  double asym = 0.0, min_quad = 0.0;
  Model model;
  auto inspect = [&](const SpMat& lap) {
    const Mat d = dense(lap);
    r.max_error = std::max(r.max_error, d.rowwise().sum().cwiseAbs().maxCoeff());
    asym = std::max(asym, (d - d.transpose()).cwiseAbs().maxCoeff());
    for (int k = 0; k < 100; ++k) {
      const Vec x = instances::random_vector(d.rows(), rng, -1.0, 1.0);
      min_quad = std::min(min_quad, x.dot(d * x));
    }
    ++r.instances;
  };
  for (int size : {8, 16}) {
    for (int k = 0; k < 3; ++k) {
      const auto masked = apply_checkerboard_mask(smooth_image(size, rng));
      const PreparedPatch prep = prepare_patch(masked.part, masked.y);
      inspect(build_denoising_laplacian(prep.features_mis, model.metric_r, model.edges, prep.part).lap);
    }
  }
  for (int k = 0; k < 10; ++k) inspect(instances::random_laplacian(5 + 3 * k, 1.0, rng).lap);
  r = finish(r);
  if (asym != 0.0 || min_quad < -1e-10) {
    r.passed = false;
    r.note = "asymmetry " + std::to_string(asym) + ", min quadratic form " + std::to_string(min_quad);
  }
  return r;
}

CheckResult check_protocol_defaults() {
  CheckResult r{"protocol_defaults", 1, 0.0, 0.0, false, {}};
  const PatchGrid grid;
  const SolverParams solver;
  const TrainConfig train;
  std::ostringstream bad;
  if (grid.patch_size != 64) bad << " patch_size=" << grid.patch_size;
  if (solver.n_bicg_layers != 15) bad << " n_bicg_layers=" << solver.n_bicg_layers;
  if (solver.n_dr_layers != 15) bad << " n_dr_layers=" << solver.n_dr_layers;
  if (train.batch_size != 8) bad << " batch_size=" << train.batch_size;
  if (train.step_size != 1e-3) bad << " step_size=" << train.step_size;
  if (train.patience != 5) bad << " patience=" << train.patience;
  r.note = bad.str().empty() ? "64x64 patches, 15 BiCG, 15 DR, batch 8, step 1e-3, patience 5"
                             : "mismatch:" + bad.str();
  r.max_error = bad.str().empty() ? 0.0 : 1.0;
  return finish(r);
}

std::vector<CheckResult> run_verify(const VerifyOptions& opts) {
  const auto s = opts.seed;
  return {check_map_filter(s),         check_map_mu_independence(s + 1),
          check_perturbed_vs_lu(s + 2), check_h_step_vs_lu(s + 3),
          check_g_step_vs_lu(s + 4, opts.g_step), check_two_prior_stationarity(s + 5),
          check_dr_objective(s + 6), check_dr_baseline(s + 7),
          check_cascade(s + 8),      check_adjoints(s + 9),
          check_edge_weights(),      check_laplacians(s + 10),
          check_protocol_defaults()};
}

void print_verify_table(std::ostream& os, const std::vector<CheckResult>& rows) {
  os << std::left << std::setw(26) << "check" << std::right << std::setw(6) << "n"
     << std::setw(13) << "max_err" << std::setw(11) << "tol" << "  result\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(26) << r.name << std::right << std::setw(6) << r.instances
       << std::scientific << std::setprecision(3) << std::setw(13) << r.max_error
       << std::setw(11) << r.tolerance << std::defaultfloat << "  " << (r.passed ? "PASS" : "FAIL");
    if (!r.note.empty()) os << "  (" << r.note << ")";
    os << '\n';
  }
}

}  // namespace gsvi
