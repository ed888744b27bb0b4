#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <utility>

#include "dppfit/errors.hpp"
#include "dppfit/index_set.hpp"
#include "dppfit/rng.hpp"

namespace dppfit {

/// Dense symmetric matrix. Construction symmetrizes via (M + M^T)/2, so
/// entries(i,j) == entries(j,i) holds exactly and floating-point asymmetry
/// cannot accumulate across repeated operations. The 0x0 matrix is permitted:
/// it is the compression of any matrix by the empty set and has det 1.
class SymMatrix {
 public:
  SymMatrix() : m_(0, 0) {}

  explicit SymMatrix(Eigen::MatrixXd m) {
    if (m.rows() != m.cols()) {
      throw DimensionMismatch("SymMatrix requires a square matrix");
    }
    // IEEE addition is commutative, so (m(i,j)+m(j,i))/2 == (m(j,i)+m(i,j))/2
    // exactly and the result is bitwise symmetric.
    m_ = 0.5 * (m + m.transpose()).eval();
  }

  static SymMatrix identity(Eigen::Index n) {
    return SymMatrix(Eigen::MatrixXd::Identity(n, n));
  }

  static SymMatrix zero(Eigen::Index n) {
    return SymMatrix(Eigen::MatrixXd::Zero(n, n));
  }

  Eigen::Index dim() const { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  const Eigen::MatrixXd& mat() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

/// Lower-triangularCholesky factor C with C C^T equal to the factored
/// matrix; every diagonal entry is strictly positive.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(Eigen::MatrixXd lower) : lower_(std::move(lower)) {}

  Eigen::Index dim() const { return lower_.rows(); }
  const Eigen::MatrixXd& lower() const { return lower_; }

 private:
  Eigen::MatrixXd lower_;
};

/// Cholesky factorization; the library's only positive-definiteness test.
/// A pivot d_j must exceed dim * machine_epsilon * max(diag) or the matrix is
/// declared not positive definite, with the failing pivot reported 1-based.
inline CholeskyFactor cholesky(const SymMatrix& m) {
  const Eigen::Index n = m.dim();
  const Eigen::MatrixXd& a = m.mat();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  const double max_diag = n > 0 ? a.diagonal().maxCoeff() : 0.0;
  const double tol = static_cast<double>(n) *
                     std::numeric_limits<double>::epsilon() * max_diag;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = a(j, j) - c.row(j).head(j).squaredNorm();
    if (!(d > tol)) {  // also rejects NaN
      throw NotPositiveDefinite(static_cast<int>(j) + 1);
    }
    c(j, j) = std::sqrt(d);
    if (j + 1 < n) {
      c.col(j).tail(n - j - 1) =
          (a.col(j).tail(n - j - 1) -
           c.bottomLeftCorner(n - j - 1, j) * c.row(j).head(j).transpose()) /
          c(j, j);
    }
  }
  return CholeskyFactor(std::move(c));
}

/// log det of the factored matrix; the empty matrix has det 1, log det 0.
inline double logdet(const CholeskyFactor& f) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < f.dim(); ++j) {
    sum += std::log(f.lower()(j, j));
  }
  return 2.0 * sum;
}

/// Inverse of the factored matrix: with A = C C^T, A^{-1} = C^{-T} C^{-1}.
inline SymMatrix inverse(const CholeskyFactor& f) {
  const Eigen::Index n = f.dim();
  Eigen::MatrixXd w = f.lower().triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(n, n));
  return SymMatrix(w.transpose() * w);
}

/// Principal submatrix selected by y, rows and columns in y's order.
inline SymMatrix compress(const SymMatrix& m, const IndexSet& y) {
  if (!y.valid_for(m.dim())) {
    throw IndexOutOfRange("compress: index exceeds matrix dimension");
  }
  const Eigen::Index k = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd out(k, k);
  const auto& items = y.items();
  for (Eigen::Index col = 0; col < k; ++col) {
    for (Eigen::Index row = 0; row < k; ++row) {
      out(row, col) = m.mat()(items[static_cast<std::size_t>(row)] - 1,
                              items[static_cast<std::size_t>(col)] - 1);
    }
  }
  return SymMatrix(std::move(out));
}

namespace detail {

/// In-place version of scatter_add used by the accumulation loops; adds
/// `small` into the (y, y) block of `z`.
inline void scatter_add_inplace(Eigen::MatrixXd& z, const IndexSet& y,
                                const Eigen::MatrixXd& small) {
  const auto& items = y.items();
  const Eigen::Index k = static_cast<Eigen::Index>(items.size());
  for (Eigen::Index col = 0; col < k; ++col) {
    for (Eigen::Index row = 0; row < k; ++row) {
      z(items[static_cast<std::size_t>(row)] - 1,
        items[static_cast<std::size_t>(col)] - 1) += small(row, col);
    }
  }
}

}  // namespace detail

/// z with `small` added into the (y, y) principal block.
inline SymMatrix scatter_add(const SymMatrix& z, const IndexSet& y,
                             const SymMatrix& small) {
  if (static_cast<std::size_t>(small.dim()) != y.size()) {
    throw DimensionMismatch("scatter_add: block size does not match |y|");
  }
  if (!y.valid_for(z.dim())) {
    throw DimensionMismatch("scatter_add: index exceeds matrix dimension");
  }
  Eigen::MatrixXd out = z.mat();
  detail::scatter_add_inplace(out, y, small.mat());
  return SymMatrix(std::move(out));
}

struct ExtremeEigs {
  double min;
  double max;
};

namespace detail {

inline bool is_exactly_diagonal(const Eigen::MatrixXd& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (i != j && a(i, j) != 0.0) return false;
    }
  }
  return true;
}

/// Dominant eigenvalue of a PSD matrix by power iteration with a fixed
/// deterministic start vector. Rayleigh-quotient stagnation below
/// 1e-10 * scale is the stop test.
inline double dominant_eig_psd(const Eigen::MatrixXd& b, double scale,
                               int max_iter) {
  const Eigen::Index n = b.rows();
  SeededRng rng(0x0ddba11u);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
  v.normalize();
  double rho_prev = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = b * v;
    const double rho = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;  // v in the kernel and nothing dominant
    v = w / norm;
    if (it > 0 && std::abs(rho - rho_prev) <= 1e-10 * scale) {
      return rho;
    }
    rho_prev = rho;
  }
  throw NoConvergence(max_iter);
}

}  // namespace detail

/// Smallest and largest eigenvalue via power iteration on the Gershgorin
/// shifts g*I + m and g*I - m, both PSD. Iteration cap 10*dim.
inline ExtremeEigs extreme_eigs_power(const SymMatrix& m, int max_iter) {
  const Eigen::Index n = m.dim();
  if (n < 1) throw DimensionMismatch("extreme_eigs requires dim >= 1");
  const double g = m.mat().cwiseAbs().rowwise().sum().maxCoeff();
  if (g == 0.0) return {0.0, 0.0};
  const Eigen::MatrixXd shift = g * Eigen::MatrixXd::Identity(n, n);
  const double hi = detail::dominant_eig_psd(shift + m.mat(), g, max_iter) - g;
  const double lo = g - detail::dominant_eig_psd(shift - m.mat(), g, max_iter);
  return {lo, hi};
}

/// Extreme eigenvalues of a symmetric matrix. Exactly diagonal matrices are
/// read off directly; small matrices use a full symmetric eigensolve; larger
/// ones fall back to the iterative path.
inline ExtremeEigs extreme_eigs(const SymMatrix& m) {
  const Eigen::Index n = m.dim();
  if (n < 1) throw DimensionMismatch("extreme_eigs requires dim >= 1");
  if (detail::is_exactly_diagonal(m.mat())) {
    return {m.mat().diagonal().minCoeff(), m.mat().diagonal().maxCoeff()};
  }
  if (n <= 256) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.mat(),
                                                      Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
      throw EigenFailure("symmetric eigensolver failed");
    }
    return {es.eigenvalues()(0), es.eigenvalues()(n - 1)};
  }
  return extreme_eigs_power(m, 10 * static_cast<int>(n));
}

}  // namespace dppfit
