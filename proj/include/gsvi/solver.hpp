#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include "gsvi/graph.hpp"
#include "gsvi/linalg.hpp"

namespace gsvi {

struct SolverParams {
  double mu = 1.0;
  double gamma = 0.1;
  int n_bicg_layers = 15;
  int n_dr_layers = 15;
  double tol = 1e-8;      // BiCG relative residual
  double cg_tol = 1e-12;  // CG relative residual in the g-step
  // Either n_bicg_layers entries (shared by every DR layer) or
  // n_bicg_layers * n_dr_layers entries (one block per DR layer).
  std::optional<LayerSchedule<double>> bicg_schedule;

  void validate() const;
  /// Schedule block used by the h-step of `dr_layer`, if any.
  std::optional<LayerSchedule<double>> schedule_for_layer(int dr_layer) const;
};

/// Douglas-Rachford iterate over the missing-pixel coordinates.
struct DRState {
  Vec x_prev;  // x(k-1)
  Vec x_curr;  // x(k)
  Vec z;       // h-step output at k
  Vec v;       // g-step output at k
  int k = 0;
};

/// Iteration bookkeeping collected across solves.
struct SolveTrace {
  std::size_t bicg_iterations = 0;
  std::size_t cg_iterations = 0;
  double bicg_residual = 0.0;  // last reported
  double cg_residual = 0.0;
};

/// Inner-solver failure inside an unrolled DR layer.
class DrLayerError : public std::runtime_error {
 public:
  DrLayerError(int layer, const std::string& what)
      : std::runtime_error("dr layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

/// v -> v + Theta (P v) and its transpose v -> v + P^T (Theta^T v), never
/// materializing either product. Holds references: `theta` and `p` must
/// outlive the operator.
LinearOperator<double> perturbed_operator(const BaseInterpolator& theta,
                                          const DirectedPerturbation& p);

/// Solves (I + Theta P) x = Theta y matrix-free with BiCG.
Vec perturbed_interpolate(const BaseInterpolator& theta, const DirectedPerturbation& p,
                          const Vec& y, const SolverParams& params, SolveTrace* trace = nullptr);

/// Proximal step on the fidelity + directed-prior term:
///   (I + Theta P) z = Theta (y + (x(k-1) - x(k)) / (2 gamma))
Vec h_step(const BaseInterpolator& theta, const DirectedPerturbation& p, const Vec& y,
           const DRState& state, const SolverParams& params, int dr_layer = 0,
           SolveTrace* trace = nullptr);

/// Proximal step on the denoising prior:
///   (2 mu P2 + I / gamma) v = (2 z - x) / gamma, solved by CG.
Vec g_step(const DenoisingLaplacian& lap, const DRState& state, const SolverParams& params,
           SolveTrace* trace = nullptr);

/// x(k+1) = x(k) + 2 gamma (v - z).
DRState dr_update(const DRState& state, const SolverParams& params);

/// Runs exactly params.n_dr_layers DR iterations from x(0) = x(-1) = Theta y.
Vec dr_run(const BaseInterpolator& theta, const DirectedPerturbation& p,
           const DenoisingLaplacian& lap, const Vec& y, const SolverParams& params,
           SolveTrace* trace = nullptr);

struct DrConvergence {
  Vec x;
  int layers = 0;
  double last_step = 0.0;  // ||x(k+1) - x(k)|| / ||x(k)||
};

/// Tolerance-driven variant for oracle studies: iterates until the relative
/// change of x drops below `tol` or `max_layers` is reached.
DrConvergence dr_run_until(const BaseInterpolator& theta, const DirectedPerturbation& p,
                           const DenoisingLaplacian& lap, const Vec& y,
                           const SolverParams& params, double tol, int max_layers);

// ---------------------------------------------------------------------------
// Dense oracles. Limited to M, N <= kOracleLimit.

inline constexpr Eigen::Index kOracleLimit = 64;

/// Full (M+N) x (M+N) shift matrix with Theta^{-1} + P in its top-right block.
Mat dense_shift_matrix(const Mat& theta, const Mat& p_effective);

/// Closed-form MAP solution of ||y - Hx||^2 + mu ||H(x - Ax)||^2 with
/// A_{M,N} = Theta^{-1}; returns [x_M; x_N].
Vec dense_map_solve(const Mat& theta, const Vec& y, double mu);

/// Minimizer of the two-prior objective via one LU solve of its stationarity system.
Vec dense_two_prior_solve(const Mat& theta, const DirectedPerturbation& p,
                          const DenoisingLaplacian& lap, const Vec& y, double mu);

/// Two-step cascade: Theta_P = (I + Theta P)^{-1} densely, then
/// (I + Theta_P Theta P2) x2 = Theta_P Theta y.
Vec cascade_interpolate_dense(const Mat& theta, const Mat& p_effective, const Mat& p2_effective,
                              const Vec& y);

/// ||y - Hx||^2 + mu ||H(x - A x)||^2 for x = [x_M; x_N].
double objective_value(const Vec& x, const Vec& y, const Mat& shift, double mu);

/// Adds mu * x_N^T (gain * L) x_N to the single-prior objective built from Theta and P.
double objective_value_two_prior(const Vec& x, const Vec& y, const Mat& theta,
                                 const DirectedPerturbation& p, const DenoisingLaplacian& lap,
                                 double mu);

/// Gradient of the two-prior objective at x = [x_M; x_N].
Vec two_prior_gradient(const Vec& x, const Vec& y, const Mat& theta,
                       const DirectedPerturbation& p, const DenoisingLaplacian& lap, double mu);

}  // namespace gsvi
