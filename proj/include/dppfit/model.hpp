#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "dppfit/errors.hpp"
#include "dppfit/sym_matrix.hpp"

namespace dppfit {

/// A DPP kernel L. Construction runs the Cholesky test, so a Kernel value is
/// known positive definite; NotPositiveDefinite propagates otherwise.
class Kernel {
 public:
  explicit Kernel(SymMatrix l) : l_(std::move(l)) {
    if (l_.dim() < 1) {
      throw DimensionMismatch("Kernel requires dim >= 1");
    }
    cholesky(l_);
  }

  Eigen::Index dim() const { return l_.dim(); }
  const SymMatrix& matrix() const { return l_; }

 private:
  SymMatrix l_;
};

/// A marginal kernel K = L(L+I)^{-1}; spectrum confined to [0, 1] within
/// 1e-10.
class MarginalKernel {
 public:
  explicit MarginalKernel(SymMatrix k) : k_(std::move(k)) {
    if (k_.dim() < 1) {
      throw DimensionMismatch("MarginalKernel requires dim >= 1");
    }
    const ExtremeEigs eigs = extreme_eigs(k_);
    if (eigs.min < -1e-10 || eigs.max > 1.0 + 1e-10) {
      throw std::invalid_argument(
          "MarginalKernel spectrum must lie in [0, 1]: got [" +
          std::to_string(eigs.min) + ", " + std::to_string(eigs.max) + "]");
    }
  }

  Eigen::Index dim() const { return k_.dim(); }
  const SymMatrix& matrix() const { return k_; }

 private:
  SymMatrix k_;
};

/// Observed subsets of a ground set of size N. Repeats and empty subsets are
/// allowed; at least one observation is required.
class ObservationData {
 public:
  ObservationData(Eigen::Index ground_size, std::vector<IndexSet> subsets)
      : ground_size_(ground_size), subsets_(std::move(subsets)) {
    if (ground_size_ < 1) {
      throw DimensionMismatch("ground set size must be >= 1");
    }
    if (subsets_.empty()) {
      throw InvalidCount("at least one observed subset is required");
    }
    for (const IndexSet& y : subsets_) {
      if (!y.valid_for(ground_size_)) {
        throw IndexOutOfRange("observed subset exceeds the ground set");
      }
    }
  }

  Eigen::Index ground_size() const { return ground_size_; }
  Eigen::Index count() const {
    return static_cast<Eigen::Index>(subsets_.size());
  }
  const std::vector<IndexSet>& subsets() const { return subsets_; }

  /// Largest observed subset size.
  Eigen::Index kappa() const {
    std::size_t k = 0;
    for (const IndexSet& y : subsets_) k = std::max(k, y.size());
    return static_cast<Eigen::Index>(k);
  }

 private:
  Eigen::Index ground_size_;
  std::vector<IndexSet> subsets_;
};

namespace detail {

inline Eigen::MatrixXd identity_plus(const SymMatrix& l) {
  return Eigen::MatrixXd::Identity(l.dim(), l.dim()) + l.mat();
}

}  // namespace detail

/// P(Y) = det(L_Y) / det(L + I). Underflowed determinants come back as 0;
/// a submatrix that fails the pivot test propagates NotPositiveDefinite.
inline double subset_prob(const Kernel& k, const IndexSet& y) {
  if (!y.valid_for(k.dim())) {
    throw IndexOutOfRange("subset exceeds the ground set");
  }
  const double logdet_y = logdet(cholesky(compress(k.matrix(), y)));
  const double logdet_norm =
      logdet(cholesky(SymMatrix(detail::identity_plus(k.matrix()))));
  return std::exp(logdet_y - logdet_norm);
}

/// Log-likelihood of the observations:
/// sum_i log det(L_{Y_i}) - n log det(I + L).
/// Empty subsets contribute 0 to the sum but still count in n.
inline double log_likelihood(const Kernel& k, const ObservationData& data) {
  if (data.ground_size() != k.dim()) {
    throw DimensionMismatch("data ground size does not match kernel");
  }
  double sum = 0.0;
  int index = 0;
  for (const IndexSet& y : data.subsets()) {
    ++index;
    if (y.empty()) continue;
    try {
      sum += logdet(cholesky(compress(k.matrix(), y)));
    } catch (const NotPositiveDefinite&) {
      throw SingularSubmatrix(index);
    }
  }
  const double logdet_norm =
      logdet(cholesky(SymMatrix(detail::identity_plus(k.matrix()))));
  return sum - static_cast<double>(data.count()) * logdet_norm;
}

/// log_likelihood / n, the per-sample value used for traces and plots.
inline double normalized_log_likelihood(const Kernel& k,
                                        const ObservationData& data) {
  return log_likelihood(k, data) / static_cast<double>(data.count());
}

namespace detail {

/// sum_i U_i (L_{Y_i})^{-1} U_i^T, the scatter of per-observation inverses.
inline Eigen::MatrixXd accumulate_block_inverses(const Kernel& k,
                                                 const ObservationData& data) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(k.dim(), k.dim());
  int index = 0;
  for (const IndexSet& y : data.subsets()) {
    ++index;
    if (y.empty()) continue;
    try {
      const SymMatrix inv_block = inverse(cholesky(compress(k.matrix(), y)));
      scatter_add_inplace(z, y, inv_block.mat());
    } catch (const NotPositiveDefinite&) {
      throw SingularSubmatrix(index);
    }
  }
  return z;
}

}  // namespace detail

/// Gradient of the log-likelihood with respect to L:
/// sum_i U_i (L_{Y_i})^{-1} U_i^T - n (I + L)^{-1}.
inline SymMatrix gradient(const Kernel& k, const ObservationData& data) {
  if (data.ground_size() != k.dim()) {
    throw DimensionMismatch("data ground size does not match kernel");
  }
  Eigen::MatrixXd z = detail::accumulate_block_inverses(k, data);
  const SymMatrix inv_norm =
      inverse(cholesky(SymMatrix(detail::identity_plus(k.matrix()))));
  z -= static_cast<double>(data.count()) * inv_norm.mat();
  return SymMatrix(std::move(z));
}

/// K = L(L+I)^{-1}, computed as I - (I+L)^{-1} which is symmetric by
/// construction.
inline MarginalKernel marginal_kernel(const Kernel& k) {
  const SymMatrix inv_norm =
      inverse(cholesky(SymMatrix(detail::identity_plus(k.matrix()))));
  Eigen::MatrixXd km =
      Eigen::MatrixXd::Identity(k.dim(), k.dim()) - inv_norm.mat();
  return MarginalKernel(SymMatrix(std::move(km)));
}

/// P(A is contained in a draw) = det(K_A). The empty set has probability 1.
inline double marginal_prob(const MarginalKernel& mk, const IndexSet& a) {
  if (!a.valid_for(mk.dim())) {
    throw IndexOutOfRange("subset exceeds the ground set");
  }
  if (a.empty()) return 1.0;
  const SymMatrix block = compress(mk.matrix(), a);
  const double det = Eigen::PartialPivLU<Eigen::MatrixXd>(block.mat())
                         .determinant();
  return std::min(1.0, std::max(0.0, det));
}

struct ConvexityWitness {
  double lhs;  // g((x+y)/2)
  double rhs;  // (g(x)+g(y))/2
};

/// Midpoint-convexity witness for g(S) = log det(U^T S^{-1} U) with U an
/// orthonormal N x k frame; convexity means lhs <= rhs.
inline ConvexityWitness convexity_witness(const SymMatrix& x,
                                          const SymMatrix& y,
                                          const Eigen::MatrixXd& u) {
  if (x.dim() != y.dim() || u.rows() != x.dim() || u.cols() > u.rows()) {
    throw DimensionMismatch("convexity_witness: inconsistent dimensions");
  }
  const Eigen::MatrixXd gram = u.transpose() * u;
  if ((gram - Eigen::MatrixXd::Identity(u.cols(), u.cols())).cwiseAbs()
          .maxCoeff() > 1e-8) {
    throw std::invalid_argument("convexity_witness: u must be orthonormal");
  }
  const auto g = [&u](const SymMatrix& s) {
    const SymMatrix s_inv = inverse(cholesky(s));
    return logdet(cholesky(SymMatrix(u.transpose() * s_inv.mat() * u)));
  };
  const SymMatrix midpoint(0.5 * (x.mat() + y.mat()));
  return {g(midpoint), 0.5 * (g(x) + g(y))};
}

}  // namespace dppfit
