#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dppfit/model.hpp"
#include "dppfit/rng.hpp"
#include "dppfit/sym_matrix.hpp"

namespace testsup {

inline Eigen::MatrixXd random_gaussian(dppfit::SeededRng& rng, Eigen::Index rows,
                                       Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

inline dppfit::SymMatrix random_symmetric(dppfit::SeededRng& rng,
                                          Eigen::Index n) {
  return dppfit::SymMatrix(random_gaussian(rng, n, n));
}

/// Well-conditioned random SPD matrix: G G^T / n + ridge I.
inline dppfit::SymMatrix random_spd(dppfit::SeededRng& rng, Eigen::Index n,
                                    double ridge = 0.1) {
  const Eigen::MatrixXd g = random_gaussian(rng, n, n);
  return dppfit::SymMatrix(g * g.transpose() / static_cast<double>(n) +
                           ridge * Eigen::MatrixXd::Identity(n, n));
}

inline Eigen::MatrixXd random_orthonormal(dppfit::SeededRng& rng,
                                          Eigen::Index n, Eigen::Index k) {
  const Eigen::MatrixXd g = random_gaussian(rng, n, k);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
}

/// Random observations: each item joins each subset independently. Subsets
/// may repeat and may be empty.
inline dppfit::ObservationData random_observations(dppfit::SeededRng& rng,
                                                   Eigen::Index ground,
                                                   Eigen::Index count,
                                                   double incl_prob = 0.4) {
  std::vector<dppfit::IndexSet> subsets;
  subsets.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index s = 0; s < count; ++s) {
    std::vector<int> items;
    for (Eigen::Index i = 0; i < ground; ++i) {
      if (rng.uniform01() < incl_prob) items.push_back(static_cast<int>(i) + 1);
    }
    subsets.emplace_back(std::move(items));
  }
  return dppfit::ObservationData(ground, std::move(subsets));
}

inline double rel_frobenius_error(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b) {
  const double scale = b.norm();
  return scale == 0.0 ? (a - b).norm() : (a - b).norm() / scale;
}

}  // namespace testsup
