#pragma once

// Dense and sparse real linear algebra on top of Eigen: matrix-vector
// products, a partial-pivoting LU used as the dense oracle, conjugate
// gradient for SPD operators and classical biconjugate gradient (with an
// optional unrolled alpha/beta schedule) for asymmetric ones.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <type_traits>
#include <vector>

#include "gsvi/errors.hpp"

namespace gsvi {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Compressed row storage: outerIndexPtr() are the row offsets, innerIndexPtr()
// the per-entry columns (sorted within a row once compressed).
template <typename Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;

using Vec = Vector<double>;
using Mat = DenseMatrix<double>;
using SpMat = SparseMatrix<double>;
using Triplet = Eigen::Triplet<double, int>;

namespace detail {

inline std::string dims(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

}  // namespace detail

/// Validates the CSR invariants of a compressed sparse matrix: monotone row
/// offsets ending at nnz, strictly increasing in-range columns per row, and
/// finite values. Throws ConstructionError on the first violation.
template <typename Scalar>
void check_sparse(const SparseMatrix<Scalar>& m) {
  if (!m.isCompressed()) throw ConstructionError("sparse matrix is not compressed");
  const int* offsets = m.outerIndexPtr();
  const int* cols = m.innerIndexPtr();
  const Scalar* values = m.valuePtr();
  if (offsets[0] != 0 || offsets[m.rows()] != m.nonZeros())
    throw ConstructionError("sparse row offsets do not span the stored entries");
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (offsets[r + 1] < offsets[r]) throw ConstructionError("sparse row offsets decrease");
    for (int e = offsets[r]; e < offsets[r + 1]; ++e) {
      if (cols[e] < 0 || cols[e] >= m.cols())
        throw ConstructionError("sparse column index out of range in row " + std::to_string(r));
      if (e > offsets[r] && cols[e] <= cols[e - 1])
        throw ConstructionError("sparse columns not strictly increasing in row " +
                                std::to_string(r));
      if (!std::isfinite(values[e]))
        throw ConstructionError("non-finite sparse value in row " + std::to_string(r));
    }
  }
}

template <typename Scalar>
SparseMatrix<Scalar> sparse_from_triplets(Eigen::Index rows, Eigen::Index cols,
                                          const std::vector<Eigen::Triplet<Scalar, int>>& t) {
  SparseMatrix<Scalar> m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

template <typename Scalar>
Vector<Scalar> matvec(const DenseMatrix<Scalar>& m, const Vector<Scalar>& v) {
  if (v.size() != m.cols())
    throw DimensionError("matvec: matrix is " + detail::dims(m.rows(), m.cols()) +
                         " but vector has length " + std::to_string(v.size()));
  return m * v;
}

template <typename Scalar>
Vector<Scalar> matvec(const SparseMatrix<Scalar>& m, const Vector<Scalar>& v) {
  if (v.size() != m.cols())
    throw DimensionError("matvec: matrix is " + detail::dims(m.rows(), m.cols()) +
                         " but vector has length " + std::to_string(v.size()));
  return m * v;
}

/// A matrix-free linear map with its transpose. Copies share nothing mutable.
template <typename Scalar>
struct LinearOperator {
  using Apply = std::function<Vector<Scalar>(const Vector<Scalar>&)>;

  Eigen::Index out_dim = 0;
  Eigen::Index in_dim = 0;
  Apply forward;
  Apply transpose;

  Vector<Scalar> apply(const Vector<Scalar>& v) const {
    if (v.size() != in_dim)
      throw DimensionError("operator expects length " + std::to_string(in_dim) + ", got " +
                           std::to_string(v.size()));
    return forward(v);
  }
  Vector<Scalar> apply_transpose(const Vector<Scalar>& v) const {
    if (v.size() != out_dim)
      throw DimensionError("operator transpose expects length " + std::to_string(out_dim) +
                           ", got " + std::to_string(v.size()));
    return transpose(v);
  }
  bool square() const { return out_dim == in_dim; }
};

// The returned operators hold a copy of the matrix.
template <typename Scalar>
LinearOperator<Scalar> make_operator(DenseMatrix<Scalar> m) {
  auto shared = std::make_shared<const DenseMatrix<Scalar>>(std::move(m));
  return {shared->rows(), shared->cols(),
          [shared](const Vector<Scalar>& v) -> Vector<Scalar> { return (*shared) * v; },
          [shared](const Vector<Scalar>& v) -> Vector<Scalar> {
            return shared->transpose() * v;
          }};
}

template <typename Scalar>
LinearOperator<Scalar> make_operator(SparseMatrix<Scalar> m) {
  auto shared = std::make_shared<const SparseMatrix<Scalar>>(std::move(m));
  return {shared->rows(), shared->cols(),
          [shared](const Vector<Scalar>& v) -> Vector<Scalar> { return (*shared) * v; },
          [shared](const Vector<Scalar>& v) -> Vector<Scalar> {
            return shared->transpose() * v;
          }};
}

template <typename Scalar>
LinearOperator<Scalar> identity_operator(Eigen::Index n) {
  auto id = [](const Vector<Scalar>& v) -> Vector<Scalar> { return v; };
  return {n, n, id, id};
}

/// Materializes an operator column by column. Only meant for oracle-sized problems.
template <typename Scalar>
DenseMatrix<Scalar> to_dense(const LinearOperator<Scalar>& op) {
  DenseMatrix<Scalar> out(op.out_dim, op.in_dim);
  Vector<Scalar> e = Vector<Scalar>::Zero(op.in_dim);
  for (Eigen::Index j = 0; j < op.in_dim; ++j) {
    e[j] = Scalar(1);
    out.col(j) = op.apply(e);
    e[j] = Scalar(0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dense LU with partial pivoting.

template <typename Scalar>
class LuFactor {
 public:
  explicit LuFactor(DenseMatrix<Scalar> a) : lu_(std::move(a)) {
    if (lu_.rows() != lu_.cols())
      throw DimensionError("lu: matrix is " + detail::dims(lu_.rows(), lu_.cols()) +
                           ", expected square");
    if (!detail::all_finite(lu_)) throw DimensionError("lu: matrix has non-finite entries");
    const Eigen::Index n = lu_.rows();
    perm_.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) perm_[static_cast<std::size_t>(i)] = i;
    const Scalar scale = n > 0 ? lu_.cwiseAbs().maxCoeff() : Scalar(0);
    const Scalar threshold =
        std::numeric_limits<Scalar>::epsilon() * static_cast<Scalar>(n) * scale;
    for (Eigen::Index k = 0; k < n; ++k) {
      Eigen::Index pivot_row = k;
      lu_.col(k).tail(n - k).cwiseAbs().maxCoeff(&pivot_row);
      pivot_row += k;
      if (!(std::abs(lu_(pivot_row, k)) > threshold) || scale == Scalar(0))
        throw SingularMatrixError("lu: matrix is singular to working precision",
                                  static_cast<std::size_t>(k));
      if (pivot_row != k) {
        lu_.row(k).swap(lu_.row(pivot_row));
        std::swap(perm_[static_cast<std::size_t>(k)], perm_[static_cast<std::size_t>(pivot_row)]);
      }
      const Scalar pivot = lu_(k, k);
      for (Eigen::Index i = k + 1; i < n; ++i) {
        const Scalar f = lu_(i, k) / pivot;
        lu_(i, k) = f;
        if (f != Scalar(0)) lu_.row(i).tail(n - k - 1) -= f * lu_.row(k).tail(n - k - 1);
      }
    }
  }

  Eigen::Index size() const { return lu_.rows(); }

  Vector<Scalar> solve(const Vector<Scalar>& b) const {
    const Eigen::Index n = lu_.rows();
    if (b.size() != n)
      throw DimensionError("lu_solve: matrix is " + detail::dims(n, n) +
                           " but right-hand side has length " + std::to_string(b.size()));
    Vector<Scalar> x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = b[perm_[static_cast<std::size_t>(i)]];
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      for (Eigen::Index j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
      x[i] /= lu_(i, i);
    }
    return x;
  }

  DenseMatrix<Scalar> inverse() const {
    const Eigen::Index n = lu_.rows();
    DenseMatrix<Scalar> inv(n, n);
    Vector<Scalar> e = Vector<Scalar>::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      e[j] = Scalar(1);
      inv.col(j) = solve(e);
      e[j] = Scalar(0);
    }
    return inv;
  }

 private:
  DenseMatrix<Scalar> lu_;
  std::vector<Eigen::Index> perm_;
};

template <typename Scalar>
Vector<Scalar> lu_solve(const DenseMatrix<Scalar>& a, const Vector<Scalar>& b) {
  if (b.size() != a.rows())
    throw DimensionError("lu_solve: matrix is " + detail::dims(a.rows(), a.cols()) +
                         " but right-hand side has length " + std::to_string(b.size()));
  return LuFactor<Scalar>(a).solve(b);
}

template <typename Scalar>
DenseMatrix<Scalar> lu_inverse(const DenseMatrix<Scalar>& a) {
  return LuFactor<Scalar>(a).inverse();
}

// ---------------------------------------------------------------------------
// Krylov solvers.

template <typename Scalar>
struct SolveOptions {
  std::size_t max_iters = 0;  // 0 means the system dimension
  Scalar tol = Scalar(1e-8);  // relative residual ||b - Ax|| / ||b||
};

template <typename Scalar>
struct SolveResult {
  Vector<Scalar> x;
  std::size_t iterations = 0;
  Scalar residual = Scalar(0);  // relative, from the recurrence
};

/// Per-iteration step sizes (alpha) and momentum terms (beta) of an unrolled
/// BiCG. beta[0] is never used: the first direction is the residual itself.
template <typename Scalar>
struct LayerSchedule {
  std::vector<Scalar> alpha;
  std::vector<Scalar> beta;

  std::size_t size() const { return alpha.size(); }

  void validate() const {
    if (alpha.size() != beta.size())
      throw ConstructionError("layer schedule: alpha has " + std::to_string(alpha.size()) +
                              " entries, beta has " + std::to_string(beta.size()));
    for (std::size_t k = 0; k < alpha.size(); ++k)
      if (!std::isfinite(alpha[k]) || !std::isfinite(beta[k]))
        throw ConstructionError("layer schedule: non-finite entry at layer " + std::to_string(k));
  }

  LayerSchedule slice(std::size_t offset, std::size_t count) const {
    if (offset + count > alpha.size())
      throw DimensionError("layer schedule: slice [" + std::to_string(offset) + ", " +
                           std::to_string(offset + count) + ") exceeds length " +
                           std::to_string(alpha.size()));
    LayerSchedule out;
    out.alpha.assign(alpha.begin() + static_cast<std::ptrdiff_t>(offset),
                     alpha.begin() + static_cast<std::ptrdiff_t>(offset + count));
    out.beta.assign(beta.begin() + static_cast<std::ptrdiff_t>(offset),
                    beta.begin() + static_cast<std::ptrdiff_t>(offset + count));
    return out;
  }
};

template <typename Scalar>
struct BiCGResult : SolveResult<Scalar> {
  LayerSchedule<Scalar> coefficients;  // the alpha/beta actually applied
};

template <typename Scalar>
SolveResult<Scalar> cg_solve(const LinearOperator<Scalar>& op, const Vector<Scalar>& b,
                             SolveOptions<Scalar> opts = {}) {
  if (!op.square() || b.size() != op.in_dim)
    throw DimensionError("cg_solve: operator is " + detail::dims(op.out_dim, op.in_dim) +
                         " but right-hand side has length " + std::to_string(b.size()));
  const std::size_t max_iters = opts.max_iters ? opts.max_iters : static_cast<std::size_t>(b.size());
  SolveResult<Scalar> out;
  out.x = Vector<Scalar>::Zero(b.size());
  const Scalar bnorm = b.norm();
  if (bnorm == Scalar(0)) return out;

  Vector<Scalar> r = b;
  Vector<Scalar> p = r;
  Scalar rr = r.squaredNorm();
  out.residual = Scalar(1);
  for (std::size_t k = 0; k < max_iters; ++k) {
    const Vector<Scalar> q = op.apply(p);
    const Scalar pq = p.dot(q);
    const Scalar alpha = rr / pq;
    out.x += alpha * p;
    r -= alpha * q;
    const Scalar rr_next = r.squaredNorm();
    out.iterations = k + 1;
    out.residual = std::sqrt(rr_next) / bnorm;
    if (!std::isfinite(out.residual)) throw DivergenceError("cg_solve: non-finite residual", k);
    if (out.residual <= opts.tol) break;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return out;
}

/// Classical (unpreconditioned) biconjugate gradient from a zero initial guess.
///
/// Without a schedule the textbook coefficients are used:
///   rho_k = <r~_k, r_k>, beta_k = rho_k / rho_{k-1}, alpha_k = rho_k / <p~_k, A p_k>
/// and the solve stops once the relative residual reaches `opts.tol`.
///
/// With a schedule, alpha_k and beta_k are taken from it and exactly
/// `opts.max_iters` (or schedule-length, if zero) iterations run without an
/// early exit. The shadow recurrence is not needed then, so the transpose is
/// never applied and no division by a computed inner product happens.
template <typename Scalar>
BiCGResult<Scalar> bicg_solve(const LinearOperator<Scalar>& op, const Vector<Scalar>& b,
                              const std::type_identity_t<LayerSchedule<Scalar>>* schedule = nullptr,
                              SolveOptions<Scalar> opts = {}) {
  if (!op.square() || b.size() != op.in_dim)
    throw DimensionError("bicg_solve: operator is " + detail::dims(op.out_dim, op.in_dim) +
                         " but right-hand side has length " + std::to_string(b.size()));
  std::size_t iters = opts.max_iters ? opts.max_iters : static_cast<std::size_t>(b.size());
  if (schedule) {
    schedule->validate();
    if (!opts.max_iters) iters = schedule->size();
    if (schedule->size() < iters)
      throw DimensionError("bicg_solve: schedule has " + std::to_string(schedule->size()) +
                           " layers, " + std::to_string(iters) + " requested");
  }

  BiCGResult<Scalar> out;
  out.x = Vector<Scalar>::Zero(b.size());
  const Scalar bnorm = b.norm();
  if (bnorm == Scalar(0) && !schedule) return out;
  const Scalar denom_b = bnorm == Scalar(0) ? Scalar(1) : bnorm;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();

  Vector<Scalar> r = b;
  Vector<Scalar> p;
  Vector<Scalar> r_shadow, p_shadow;
  if (!schedule) r_shadow = r;
  Scalar rho_prev = Scalar(0);
  out.residual = bnorm == Scalar(0) ? Scalar(0) : Scalar(1);

  for (std::size_t k = 0; k < iters; ++k) {
    Scalar alpha, beta = Scalar(0);
    Scalar rho = Scalar(0);
    if (!schedule) {
      rho = r_shadow.dot(r);
      if (!(std::abs(rho) > eps * r_shadow.norm() * r.norm()))
        throw BreakdownError("bicg_solve: breakdown, <r~, r> vanished", k);
    }
    if (k == 0) {
      p = r;
      if (!schedule) p_shadow = r_shadow;
    } else {
      beta = schedule ? schedule->beta[k] : rho / rho_prev;
      p = r + beta * p;
      if (!schedule) p_shadow = r_shadow + beta * p_shadow;
    }
    const Vector<Scalar> q = op.apply(p);
    if (schedule) {
      alpha = schedule->alpha[k];
    } else {
      const Scalar pq = p_shadow.dot(q);
      if (!(std::abs(pq) > eps * p_shadow.norm() * q.norm()))
        throw BreakdownError("bicg_solve: breakdown, <p~, Ap> vanished", k);
      alpha = rho / pq;
    }
    out.x += alpha * p;
    r -= alpha * q;
    if (!schedule) r_shadow -= alpha * op.apply_transpose(p_shadow);
    rho_prev = rho;

    out.coefficients.alpha.push_back(alpha);
    out.coefficients.beta.push_back(beta);
    out.iterations = k + 1;
    out.residual = r.norm() / denom_b;
    if (!std::isfinite(out.residual)) throw DivergenceError("bicg_solve: non-finite residual", k);
    if (!schedule && out.residual <= opts.tol) break;
  }
  return out;
}

}  // namespace gsvi
