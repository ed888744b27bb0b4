#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "dppfit/errors.hpp"
#include "dppfit/model.hpp"
#include "dppfit/rng.hpp"

namespace dppfit {

/// Exact DPP distribution by enumeration of all 2^N subsets, in binary
/// counting order. Guarded to N <= 20.
inline std::vector<std::pair<IndexSet, double>> enumerate_distribution(
    const Kernel& k) {
  const Eigen::Index n = k.dim();
  if (n > 20) {
    throw GroundSetTooLarge("enumeration requires N <= 20");
  }
  const double logdet_norm =
      logdet(cholesky(SymMatrix(detail::identity_plus(k.matrix()))));
  std::vector<std::pair<IndexSet, double>> dist;
  const std::uint64_t count = std::uint64_t{1} << n;
  dist.reserve(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    std::vector<int> items;
    for (Eigen::Index b = 0; b < n; ++b) {
      if (mask & (std::uint64_t{1} << b)) items.push_back(static_cast<int>(b) + 1);
    }
    IndexSet y(std::move(items));
    const double logdet_y = logdet(cholesky(compress(k.matrix(), y)));
    dist.emplace_back(std::move(y), std::exp(logdet_y - logdet_norm));
  }
  return dist;
}

/// n independent draws from the exact enumerated distribution via inverse
/// CDF; draw d consumes the substream tagged d, so results do not depend on
/// evaluation order.
inline ObservationData sample_exact(const Kernel& k, Eigen::Index n,
                                    const SeededRng& rng) {
  if (n < 1) throw InvalidCount("sample count must be >= 1");
  const auto dist = enumerate_distribution(k);
  std::vector<double> cdf(dist.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    acc += dist[i].second;
    cdf[i] = acc;
  }
  std::vector<IndexSet> subsets;
  subsets.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index d = 0; d < n; ++d) {
    SeededRng stream = rng.substream(static_cast<std::uint64_t>(d));
    const double u = stream.uniform01() * acc;
    std::size_t lo = 0, hi = cdf.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cdf[mid] <= u) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    subsets.push_back(dist[lo].first);
  }
  return ObservationData(k.dim(), std::move(subsets));
}

namespace detail {

/// One spectral-sampler draw. `vectors` holds the kernel eigenvectors as
/// columns, `inclusion` the per-eigenvector probabilities lambda/(1+lambda).
inline IndexSet spectral_draw(const Eigen::MatrixXd& vectors,
                              const std::vector<double>& inclusion,
                              SeededRng& stream) {
  const Eigen::Index n = vectors.rows();
  std::vector<Eigen::Index> chosen;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (stream.uniform01() < inclusion[static_cast<std::size_t>(j)]) {
      chosen.push_back(j);
    }
  }
  Eigen::MatrixXd v(n, static_cast<Eigen::Index>(chosen.size()));
  for (std::size_t c = 0; c < chosen.size(); ++c) {
    v.col(static_cast<Eigen::Index>(c)) = vectors.col(chosen[c]);
  }

  std::vector<int> items;
  std::vector<bool> picked(static_cast<std::size_t>(n), false);
  while (v.cols() > 0) {
    // Item weights are the squared row norms of the orthonormal frame.
    Eigen::VectorXd weights = v.rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (picked[static_cast<std::size_t>(i)]) weights(i) = 0.0;
    }
    const double total = weights.sum();
    if (total <= 0.0) break;
    const double u = stream.uniform01() * total;
    Eigen::Index pick = n - 1;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += weights(i);
      if (u < acc) {
        pick = i;
        break;
      }
    }
    items.push_back(static_cast<int>(pick) + 1);
    picked[static_cast<std::size_t>(pick)] = true;
    if (v.cols() == 1) break;

    // Restrict the frame to the part of its span with zero coordinate at
    // `pick`: remove the component along the in-span projection of e_pick,
    // then re-orthonormalize by modified Gram-Schmidt, dropping the vector
    // that collapses.
    Eigen::VectorXd dir = v * v.row(pick).transpose();
    const double dir_norm = dir.norm();
    if (dir_norm < 1e-12) break;
    dir /= dir_norm;
    v -= dir * (dir.transpose() * v);

    Eigen::MatrixXd reduced(n, v.cols());
    Eigen::Index kept = 0;
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      Eigen::VectorXd w = v.col(c);
      for (Eigen::Index p = 0; p < kept; ++p) {
        w -= reduced.col(p) * reduced.col(p).dot(w);
      }
      const double norm = w.norm();
      if (norm >= 1e-12) {
        reduced.col(kept++) = w / norm;
      }
    }
    v = reduced.leftCols(kept);
  }
  return IndexSet(std::move(items));
}

}  // namespace detail

/// n draws via the spectral sampler: eigenvector j is included independently
/// with probability lambda_j/(1+lambda_j), then items are drawn sequentially
/// from the selected span. Draw d consumes substream d of `rng`, matching
/// sample_exact's stream layout.
inline ObservationData sample_spectral(const Kernel& k, Eigen::Index n,
                                       const SeededRng& rng) {
  if (n < 1) throw InvalidCount("sample count must be >= 1");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.matrix().mat());
  if (es.info() != Eigen::Success) {
    throw EigenFailure("eigendecomposition of the kernel failed");
  }
  std::vector<double> inclusion(static_cast<std::size_t>(k.dim()));
  for (Eigen::Index j = 0; j < k.dim(); ++j) {
    const double lambda = std::max(0.0, es.eigenvalues()(j));
    inclusion[static_cast<std::size_t>(j)] = lambda / (1.0 + lambda);
  }
  std::vector<IndexSet> subsets;
  subsets.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index d = 0; d < n; ++d) {
    SeededRng stream = rng.substream(static_cast<std::uint64_t>(d));
    subsets.push_back(detail::spectral_draw(es.eigenvectors(), inclusion,
                                            stream));
  }
  return ObservationData(k.dim(), std::move(subsets));
}

}  // namespace dppfit
