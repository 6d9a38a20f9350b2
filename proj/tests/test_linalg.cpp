#include "doctest.h"

#include <random>

#include "gsvi/linalg.hpp"
#include "support.hpp"

using namespace gsvi;
using testing::oracle_solve;
using testing::rel_err;

namespace {

Mat random_matrix(Eigen::Index n, std::mt19937_64& rng, double diag_boost) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = u(rng);
  a.diagonal().array() += diag_boost;
  return a;
}

Vec random_vec(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("matvec rejects mismatched shapes with the dimensions in the message") {
  Mat a = Mat::Ones(2, 3);
  try {
    matvec(a, Vec(Vec::Ones(2)));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("2x3") != std::string::npos);
  }
  SpMat s = sparse_from_triplets<double>(2, 3, {{0, 1, 2.0}});
  CHECK_THROWS_AS(matvec(s, Vec(Vec::Ones(4))), DimensionError);
  CHECK(matvec(s, Vec(Vec::Ones(3)))[0] == 2.0);
}

TEST_CASE("sparse and dense operators agree, transposes included") {
  std::mt19937_64 rng(1);
  const Mat a = random_matrix(5, rng, 0.0);
  const auto dense_op = make_operator(a);
  const auto sparse_op = make_operator(SpMat(a.sparseView()));
  const Vec v = random_vec(5, rng);
  CHECK((dense_op.apply(v) - sparse_op.apply(v)).norm() < 1e-14);
  CHECK((dense_op.apply_transpose(v) - Vec(a.transpose() * v)).norm() < 1e-14);
  CHECK((to_dense(sparse_op) - a).norm() < 1e-15);
  CHECK_THROWS_AS(dense_op.apply(Vec(Vec::Ones(4))), DimensionError);
}

TEST_CASE("LU solve matches an independent full-pivot oracle") {
  std::mt19937_64 rng(2);
  for (int n : {1, 2, 5, 17, 40}) {
    const Mat a = random_matrix(n, rng, 0.5);
    const Vec b = random_vec(n, rng);
    CHECK(rel_err(lu_solve(a, b), oracle_solve(a, b)) < 1e-10);
  }
  const Mat a = random_matrix(6, rng, 1.0);
  CHECK((lu_inverse(a) * a - Mat::Identity(6, 6)).norm() < 1e-12);
}

TEST_CASE("LU needs pivoting on a zero leading entry") {
  Mat a(2, 2);
  a << 0, 1, 1, 0;
  const Vec x = lu_solve(a, Vec(Vec::LinSpaced(2, 3, 4)));
  CHECK(x[0] == doctest::Approx(4.0));
  CHECK(x[1] == doctest::Approx(3.0));
}

TEST_CASE("singular matrices report the failing pivot") {
  Mat a(3, 3);
  a << 1, 2, 3, 2, 4, 6, 1, 0, 1;  // row 1 = 2 * row 0
  try {
    lu_solve(a, Vec(Vec::Ones(3)));
    FAIL("expected SingularMatrixError");
  } catch (const SingularMatrixError& e) {
    CHECK(e.pivot() == 2);
  }
  CHECK_THROWS_AS(lu_solve(Mat(Mat::Zero(2, 2)), Vec(Vec::Ones(2))), SingularMatrixError);
  CHECK_THROWS_AS(lu_solve(Mat(Mat::Ones(2, 3)), Vec(Vec::Ones(2))), DimensionError);
}

TEST_CASE("CG solves SPD systems and returns zero for b = 0") {
  std::mt19937_64 rng(3);
  const Mat g = random_matrix(30, rng, 0.0);
  const Mat spd = g * g.transpose() + Mat::Identity(30, 30);
  const Vec b = random_vec(30, rng);
  SolveOptions<double> opts;
  opts.tol = 1e-13;
  opts.max_iters = 300;  // finite precision needs more than n steps
  const auto res = cg_solve(make_operator(spd), b, opts);
  CHECK(rel_err(res.x, oracle_solve(spd, b)) < 1e-10);
  CHECK(res.residual <= 1e-13);
  const auto zero = cg_solve(make_operator(spd), Vec(Vec::Zero(30)));
  CHECK(zero.x.norm() == 0.0);
  CHECK(zero.iterations == 0);
}

TEST_CASE("BiCG solves nonsymmetric systems to its tolerance") {
  std::mt19937_64 rng(4);
  for (int n : {3, 10, 50}) {
    const Mat a = random_matrix(n, rng, 4.0);
    const Vec b = random_vec(n, rng);
    SolveOptions<double> opts;
    opts.tol = 1e-12;
    opts.max_iters = static_cast<std::size_t>(10 * n);
    const auto res = bicg_solve(make_operator(a), b, nullptr, opts);
    CHECK(res.residual <= 1e-12);
    CHECK(rel_err(res.x, oracle_solve(a, b)) < 1e-9);
    CHECK(res.coefficients.size() == res.iterations);
  }
}

TEST_CASE("BiCG detects breakdown of the bi-orthogonality product") {
  // A swaps coordinates: for b = e0, <p~, A p> = <e0, e1> = 0 on the first step.
  Mat a(2, 2);
  a << 0, 1, 1, 0;
  Vec b(2);
  b << 1, 0;
  try {
    bicg_solve(make_operator(a), b);
    FAIL("expected BreakdownError");
  } catch (const BreakdownError& e) {
    CHECK(e.iteration() == 0);
  }
}

TEST_CASE("a schedule equal to the computed coefficients reproduces the run exactly") {
  std::mt19937_64 rng(5);
  const Mat a = random_matrix(12, rng, 3.0);
  const Vec b = random_vec(12, rng);
  SolveOptions<double> opts;
  opts.max_iters = 6;
  opts.tol = 0.0;
  const auto free_run = bicg_solve(make_operator(a), b, nullptr, opts);
  REQUIRE(free_run.iterations == 6);

  int transposes = 0;
  auto op = make_operator(a);
  auto fwd = op.forward;
  op.transpose = [&transposes, fwd](const Vec& v) {
    ++transposes;
    return fwd(v);
  };
  const auto scheduled = bicg_solve(op, b, &free_run.coefficients, opts);
  CHECK(scheduled.iterations == 6);
  CHECK((scheduled.x - free_run.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(transposes == 0);
}

TEST_CASE("scheduled BiCG runs every layer and validates the schedule") {
  const Mat a = Mat::Identity(3, 3);
  LayerSchedule<double> s{{1.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0}};
  SolveOptions<double> opts;
  opts.tol = 1e-1;
  const auto res = bicg_solve(make_operator(a), Vec(Vec::Ones(3)), &s, opts);
  CHECK(res.iterations == 4);  // no early exit although converged after one layer
  CHECK(res.residual == 0.0);

  LayerSchedule<double> uneven{{1.0, 2.0}, {0.0}};
  CHECK_THROWS_AS(uneven.validate(), ConstructionError);
  LayerSchedule<double> bad{{1.0, std::nan("")}, {0.0, 0.0}};
  CHECK_THROWS_AS(bad.validate(), ConstructionError);
  opts.max_iters = 9;
  CHECK_THROWS_AS(bicg_solve(make_operator(a), Vec(Vec::Ones(3)), &s, opts), DimensionError);
  CHECK(s.slice(1, 2).alpha == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(s.slice(3, 2), DimensionError);
}

TEST_CASE("templated kernels also work in single precision") {
  DenseMatrix<float> a(2, 2);
  a << 4, 1, 1, 3;
  Vector<float> b(2);
  b << 1, 2;
  const auto x = lu_solve(a, b);
  CHECK((a * x - b).norm() < 1e-5f);
  const auto cg = cg_solve(make_operator(a), b);
  CHECK((a * cg.x - b).norm() < 1e-5f);
}
