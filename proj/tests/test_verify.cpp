#include "doctest.h"

#include <sstream>

#include "gsvi/verify.hpp"

using namespace gsvi;

TEST_CASE("every oracle check passes on the real solvers") {
  const auto rows = run_verify();
  CHECK(rows.size() == 13);
  for (const auto& r : rows) {
    INFO(r.name << ": " << r.max_error << " vs " << r.tolerance);
    CHECK(r.passed);
  }
  std::ostringstream os;
  print_verify_table(os, rows);
  CHECK(os.str().find("PASS") != std::string::npos);
}

TEST_CASE("a sign error in the g-step fails exactly its own row") {
  VerifyOptions opts;
  opts.g_step = [](const DenoisingLaplacian& lap, const DRState& s, const SolverParams& p) {
    DenoisingLaplacian flipped = lap;
    flipped.gain = -lap.gain;
    return g_step(flipped, s, p);
  };
  for (const auto& r : run_verify(opts)) {
    INFO(r.name);
    CHECK(r.passed == (r.name != "g_step_vs_lu"));
  }
}

TEST_CASE("checks are reproducible from the seed") {
  const auto a = check_perturbed_vs_lu(3), b = check_perturbed_vs_lu(3);
  CHECK(a.max_error == b.max_error);
  CHECK(a.instances == 100);
}
