#include "gsvi/solver.hpp"

#include <cmath>
#include <utility>

namespace gsvi {

namespace {

void require_oracle_size(Eigen::Index m, Eigen::Index n, const char* who) {
  if (m > kOracleLimit || n > kOracleLimit)
    throw DimensionError(std::string(who) + ": dense oracle limited to n <= " +
                         std::to_string(kOracleLimit) + ", got M=" + std::to_string(m) +
                         " N=" + std::to_string(n));
}

void record(SolveTrace* trace, const BiCGResult<double>& r) {
  if (!trace) return;
  trace->bicg_iterations += r.iterations;
  trace->bicg_residual = r.residual;
}

Vec solve_perturbed(const BaseInterpolator& theta, const DirectedPerturbation& p, const Vec& rhs,
                    const SolverParams& params, int dr_layer, SolveTrace* trace) {
  if (p.gain == 0.0) return rhs;
  const auto op = perturbed_operator(theta, p);
  const auto schedule = params.schedule_for_layer(dr_layer);
  SolveOptions<double> opts;
  opts.tol = params.tol;
  if (schedule) opts.max_iters = static_cast<std::size_t>(params.n_bicg_layers);
  auto result = bicg_solve(op, rhs, schedule ? &*schedule : nullptr, opts);
  record(trace, result);
  return std::move(result.x);
}

Mat effective_dense(const DirectedPerturbation& p) { return Mat(p.effective()); }

// Stationarity matrix HtH + mu B + mu Gt L G of the two-prior objective.
Mat two_prior_system(const Mat& shift, const Mat& lap_effective, Eigen::Index m, double mu) {
  const Eigen::Index total = shift.rows();
  Mat hth = Mat::Zero(total, total);
  hth.topLeftCorner(m, m).setIdentity();
  const Mat i_minus_a = Mat::Identity(total, total) - shift;
  Mat c = hth + mu * i_minus_a.transpose() * hth * i_minus_a;
  c.bottomRightCorner(total - m, total - m) += mu * lap_effective;
  return c;
}

}  // namespace

void SolverParams::validate() const {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ConstructionError("solver: mu must be > 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConstructionError("solver: gamma must lie in (0, 1)");
  if (n_bicg_layers < 1 || n_dr_layers < 1)
    throw ConstructionError("solver: layer counts must be >= 1");
  if (!(tol > 0.0) || !(cg_tol > 0.0)) throw ConstructionError("solver: tolerances must be > 0");
  if (bicg_schedule) {
    bicg_schedule->validate();
    const auto len = bicg_schedule->size();
    const auto shared = static_cast<std::size_t>(n_bicg_layers);
    if (len != shared && len != shared * static_cast<std::size_t>(n_dr_layers))
      throw ConstructionError("solver: schedule length " + std::to_string(len) +
                              " is neither n_bicg_layers nor n_bicg_layers * n_dr_layers");
  }
}

std::optional<LayerSchedule<double>> SolverParams::schedule_for_layer(int dr_layer) const {
  if (!bicg_schedule) return std::nullopt;
  const auto block = static_cast<std::size_t>(n_bicg_layers);
  if (bicg_schedule->size() == block) return bicg_schedule;
  const auto layer = static_cast<std::size_t>(dr_layer) % static_cast<std::size_t>(n_dr_layers);
  return bicg_schedule->slice(layer * block, block);
}

LinearOperator<double> perturbed_operator(const BaseInterpolator& theta,
                                          const DirectedPerturbation& p) {
  if (theta.m() != p.p.rows() || theta.n() != p.p.cols())
    throw DimensionError("perturbed operator: theta is " + std::to_string(theta.n()) + "x" +
                         std::to_string(theta.m()) + ", P is " + std::to_string(p.p.rows()) +
                         "x" + std::to_string(p.p.cols()));
  const Eigen::Index n = theta.n();
  return {n, n,
          [&theta, &p](const Vec& v) -> Vec { return v + theta.apply(p.apply(v)); },
          [&theta, &p](const Vec& v) -> Vec {
            return v + p.apply_transpose(theta.apply_transpose(v));
          }};
}

Vec perturbed_interpolate(const BaseInterpolator& theta, const DirectedPerturbation& p,
                          const Vec& y, const SolverParams& params, SolveTrace* trace) {
  if (y.size() != theta.m())
    throw DimensionError("perturbed_interpolate: y has length " + std::to_string(y.size()) +
                         ", theta expects " + std::to_string(theta.m()));
  return solve_perturbed(theta, p, theta.apply(y), params, 0, trace);
}

Vec h_step(const BaseInterpolator& theta, const DirectedPerturbation& p, const Vec& y,
           const DRState& state, const SolverParams& params, int dr_layer, SolveTrace* trace) {
  if (theta.m() != theta.n())
    throw DimensionError("h_step: the correction term needs M == N");
  if (y.size() != theta.m() || state.x_prev.size() != theta.n() ||
      state.x_curr.size() != theta.n())
    throw DimensionError("h_step: inconsistent vector lengths");
  const Vec corrected = y + (state.x_prev - state.x_curr) / (2.0 * params.gamma);
  return solve_perturbed(theta, p, theta.apply(corrected), params, dr_layer, trace);
}

Vec g_step(const DenoisingLaplacian& lap, const DRState& state, const SolverParams& params,
           SolveTrace* trace) {
  if (state.z.size() != lap.lap.rows() || state.x_curr.size() != lap.lap.rows())
    throw DimensionError("g_step: inconsistent vector lengths");
  const Vec u = 2.0 * state.z - state.x_curr;
  if (lap.gain == 0.0) return u;
  const double inv_gamma = 1.0 / params.gamma;
  const double scale = 2.0 * params.mu;
  const Eigen::Index n = u.size();
  auto apply = [&lap, scale, inv_gamma](const Vec& v) -> Vec {
    return scale * lap.apply(v) + inv_gamma * v;
  };
  const LinearOperator<double> op{n, n, apply, apply};
  SolveOptions<double> opts;
  opts.tol = params.cg_tol;
  auto result = cg_solve(op, Vec(inv_gamma * u), opts);
  if (trace) {
    trace->cg_iterations += result.iterations;
    trace->cg_residual = result.residual;
  }
  return std::move(result.x);
}

DRState dr_update(const DRState& state, const SolverParams& params) {
  if (state.v.size() != state.x_curr.size() || state.z.size() != state.x_curr.size())
    throw DimensionError("dr_update: inconsistent vector lengths");
  DRState next = state;
  next.x_prev = state.x_curr;
  next.x_curr = state.x_curr + 2.0 * params.gamma * (state.v - state.z);
  next.k = state.k + 1;
  return next;
}

namespace {

DRState dr_layer(const BaseInterpolator& theta, const DirectedPerturbation& p,
                 const DenoisingLaplacian& lap, const Vec& y, const SolverParams& params,
                 DRState state, SolveTrace* trace) {
  try {
    state.z = h_step(theta, p, y, state, params, state.k, trace);
    state.v = g_step(lap, state, params, trace);
  } catch (const DimensionError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw DrLayerError(state.k, e.what());
  }
  return dr_update(state, params);
}

DRState dr_start(const BaseInterpolator& theta, const DenoisingLaplacian& lap, const Vec& y) {
  if (y.size() != theta.m())
    throw DimensionError("dr_run: y has length " + std::to_string(y.size()) +
                         ", theta expects " + std::to_string(theta.m()));
  if (lap.lap.rows() != theta.n())
    throw DimensionError("dr_run: laplacian size does not match theta");
  DRState state;
  state.x_curr = theta.apply(y);
  state.x_prev = state.x_curr;
  return state;
}

}  // namespace

Vec dr_run(const BaseInterpolator& theta, const DirectedPerturbation& p,
           const DenoisingLaplacian& lap, const Vec& y, const SolverParams& params,
           SolveTrace* trace) {
  params.validate();
  DRState state = dr_start(theta, lap, y);
  for (int layer = 0; layer < params.n_dr_layers; ++layer)
    state = dr_layer(theta, p, lap, y, params, std::move(state), trace);
  return state.x_curr;
}

DrConvergence dr_run_until(const BaseInterpolator& theta, const DirectedPerturbation& p,
                           const DenoisingLaplacian& lap, const Vec& y,
                           const SolverParams& params, double tol, int max_layers) {
  params.validate();
  DRState state = dr_start(theta, lap, y);
  DrConvergence out;
  for (int layer = 0; layer < max_layers; ++layer) {
    state = dr_layer(theta, p, lap, y, params, std::move(state), nullptr);
    out.layers = layer + 1;
    const double ref = state.x_prev.norm();
    out.last_step = (state.x_curr - state.x_prev).norm() / (ref > 0.0 ? ref : 1.0);
    if (out.last_step <= tol) break;
  }
  out.x = state.x_curr;
  return out;
}

// ---------------------------------------------------------------------------

Mat dense_shift_matrix(const Mat& theta, const Mat& p_effective) {
  const Eigen::Index n = theta.rows();
  const Eigen::Index m = theta.cols();
  if (m != n) throw DimensionError("dense shift: theta must be square (M == N)");
  if (p_effective.rows() != m || p_effective.cols() != n)
    throw DimensionError("dense shift: P must be M x N");
  Mat shift = Mat::Zero(m + n, m + n);
  shift.topRightCorner(m, n) = lu_inverse(theta) + p_effective;
  return shift;
}

Vec dense_map_solve(const Mat& theta, const Vec& y, double mu) {
  require_oracle_size(theta.cols(), theta.rows(), "dense_map_solve");
  if (y.size() != theta.cols()) throw DimensionError("dense_map_solve: y length mismatch");
  const Eigen::Index m = theta.cols();
  const Mat shift = dense_shift_matrix(theta, Mat::Zero(m, theta.rows()));
  const Mat c = two_prior_system(shift, Mat::Zero(theta.rows(), theta.rows()), m, mu);
  Vec rhs = Vec::Zero(shift.rows());
  rhs.head(m) = y;
  return lu_solve(c, rhs);
}

Vec dense_two_prior_solve(const Mat& theta, const DirectedPerturbation& p,
                          const DenoisingLaplacian& lap, const Vec& y, double mu) {
  require_oracle_size(theta.cols(), theta.rows(), "dense_two_prior_solve");
  if (y.size() != theta.cols()) throw DimensionError("dense_two_prior_solve: y length mismatch");
  const Eigen::Index m = theta.cols();
  const Mat shift = dense_shift_matrix(theta, effective_dense(p));
  const Mat c = two_prior_system(shift, Mat(lap.effective()), m, mu);
  Vec rhs = Vec::Zero(shift.rows());
  rhs.head(m) = y;
  return lu_solve(c, rhs);
}

Vec cascade_interpolate_dense(const Mat& theta, const Mat& p_effective, const Mat& p2_effective,
                              const Vec& y) {
  require_oracle_size(theta.cols(), theta.rows(), "cascade_interpolate_dense");
  const Eigen::Index n = theta.rows();
  if (p_effective.rows() != theta.cols() || p_effective.cols() != n ||
      p2_effective.rows() != theta.cols() || p2_effective.cols() != n || y.size() != theta.cols())
    throw DimensionError("cascade_interpolate_dense: inconsistent sizes");
  const Mat id = Mat::Identity(n, n);
  const Mat theta_p = lu_inverse(Mat(id + theta * p_effective));
  const Mat lhs = id + theta_p * theta * p2_effective;
  return lu_solve(lhs, Vec(theta_p * (theta * y)));
}

double objective_value(const Vec& x, const Vec& y, const Mat& shift, double mu) {
  const Eigen::Index m = y.size();
  if (x.size() != shift.rows() || shift.rows() != shift.cols() || m > x.size())
    throw DimensionError("objective_value: inconsistent sizes");
  const Vec shifted = x - shift * x;
  return (y - x.head(m)).squaredNorm() + mu * shifted.head(m).squaredNorm();
}

double objective_value_two_prior(const Vec& x, const Vec& y, const Mat& theta,
                                 const DirectedPerturbation& p, const DenoisingLaplacian& lap,
                                 double mu) {
  require_oracle_size(theta.cols(), theta.rows(), "objective_value_two_prior");
  const Mat shift = dense_shift_matrix(theta, effective_dense(p));
  const Vec x_n = x.tail(theta.rows());
  return objective_value(x, y, shift, mu) + mu * x_n.dot(lap.apply(x_n));
}

Vec two_prior_gradient(const Vec& x, const Vec& y, const Mat& theta,
                       const DirectedPerturbation& p, const DenoisingLaplacian& lap, double mu) {
  require_oracle_size(theta.cols(), theta.rows(), "two_prior_gradient");
  const Eigen::Index m = theta.cols();
  const Mat shift = dense_shift_matrix(theta, effective_dense(p));
  const Mat c = two_prior_system(shift, Mat(lap.effective()), m, mu);
  Vec rhs = Vec::Zero(shift.rows());
  rhs.head(m) = y;
  return 2.0 * (c * x - rhs);
}

}  // namespace gsvi
