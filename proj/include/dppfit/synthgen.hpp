#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "dppfit/errors.hpp"
#include "dppfit/model.hpp"
#include "dppfit/rng.hpp"

namespace dppfit {

enum class KernelKind { Basic, Wishart };

struct KernelDistribution {
  KernelKind kind;
  Eigen::Index dim;
};

namespace detail {

constexpr int kMaxKernelRedraws = 1000;

}  // namespace detail

/// L = M M^T with M an N x N matrix of uniform [0, sqrt(2)] entries, redrawn
/// until the Cholesky test passes.
inline Kernel generate_basic(Eigen::Index n_dim, SeededRng& rng) {
  if (n_dim < 1) throw InvalidCount("kernel dimension must be >= 1");
  const double hi = std::sqrt(2.0);
  for (int attempt = 0; attempt < detail::kMaxKernelRedraws; ++attempt) {
    Eigen::MatrixXd m(n_dim, n_dim);
    for (Eigen::Index i = 0; i < n_dim; ++i) {
      for (Eigen::Index j = 0; j < n_dim; ++j) {
        m(i, j) = rng.uniform(0.0, hi);
      }
    }
    try {
      return Kernel(SymMatrix(m * m.transpose()));
    } catch (const NotPositiveDefinite&) {
      // redraw
    }
  }
  throw GenerationFailed("no positive definite draw in 1000 attempts");
}

/// L = (1/N) G G^T with G an N x N standard normal matrix, i.e. a Wishart
/// draw with N degrees of freedom and identity covariance, rescaled by 1/N.
inline Kernel generate_wishart(Eigen::Index n_dim, SeededRng& rng) {
  if (n_dim < 1) throw InvalidCount("kernel dimension must be >= 1");
  for (int attempt = 0; attempt < detail::kMaxKernelRedraws; ++attempt) {
    Eigen::MatrixXd g(n_dim, n_dim);
    for (Eigen::Index i = 0; i < n_dim; ++i) {
      for (Eigen::Index j = 0; j < n_dim; ++j) {
        g(i, j) = rng.normal();
      }
    }
    try {
      return Kernel(
          SymMatrix((g * g.transpose()) / static_cast<double>(n_dim)));
    } catch (const NotPositiveDefinite&) {
      // redraw
    }
  }
  throw GenerationFailed("no positive definite draw in 1000 attempts");
}

/// Draws a kernel from `dist` on an independent substream of `rng`, leaving
/// the caller's stream untouched.
inline Kernel generate_init(const KernelDistribution& dist,
                            const SeededRng& rng) {
  SeededRng stream = rng.substream(0x696e6974u);  // "init"
  switch (dist.kind) {
    case KernelKind::Basic:
      return generate_basic(dist.dim, stream);
    case KernelKind::Wishart:
      return generate_wishart(dist.dim, stream);
  }
  throw std::invalid_argument("unknown kernel distribution");
}

}  // namespace dppfit
