#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "gsvi/solver.hpp"

namespace gsvi {

/// One row of the oracle report. `max_error` is the worst relative error (or
/// violation) seen over all instances, compared against `tolerance`.
struct CheckResult {
  std::string name;
  int instances = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string note;
};

using GStepFn = std::function<Vec(const DenoisingLaplacian&, const DRState&, const SolverParams&)>;

struct VerifyOptions {
  std::uint64_t seed = 7;
  // Replaceable so a deliberately broken g-step can be shown to fail its row.
  GStepFn g_step = [](const DenoisingLaplacian& lap, const DRState& s, const SolverParams& p) {
    return gsvi::g_step(lap, s, p);
  };
};

// Individual checks, each reproducible from the seed.
CheckResult check_map_filter(std::uint64_t seed);
CheckResult check_map_mu_independence(std::uint64_t seed);
CheckResult check_perturbed_vs_lu(std::uint64_t seed);
CheckResult check_h_step_vs_lu(std::uint64_t seed);
CheckResult check_g_step_vs_lu(std::uint64_t seed, const GStepFn& g_step);
CheckResult check_two_prior_stationarity(std::uint64_t seed);
CheckResult check_dr_objective(std::uint64_t seed);
CheckResult check_dr_baseline(std::uint64_t seed);
CheckResult check_cascade(std::uint64_t seed);
CheckResult check_adjoints(std::uint64_t seed);
CheckResult check_edge_weights();
CheckResult check_laplacians(std::uint64_t seed);
CheckResult check_protocol_defaults();

std::vector<CheckResult> run_verify(const VerifyOptions& opts = {});
void print_verify_table(std::ostream& os, const std::vector<CheckResult>& rows);

}  // namespace gsvi
