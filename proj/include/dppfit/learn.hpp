#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dppfit/errors.hpp"
#include "dppfit/model.hpp"

namespace dppfit {

struct FitConfig {
  double step_a = 1.0;    // fixed step size, set once at initialization
  double epsilon = 1e-7;  // relative log-likelihood change tolerance
  int max_iter = 500;
  bool safeguard = true;  // halve the step toward 1 on a PD failure
  std::uint64_t seed = 0; // recorded for reproducibility of the surrounding
                          // experiment; the fit itself draws no randomness

  void validate() const {
    if (!(step_a > 0.0)) throw std::invalid_argument("step_a must be > 0");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  }
};

struct TraceRow {
  int iter;                  // 1-based iteration index
  double time_s;             // seconds since fit start
  double loglik;
  double normalized_loglik;  // loglik / n
  double step_a;             // effective step size used for this update
  int safeguard_halvings;    // halvings spent inside this iteration
};

enum class FitStatus { Converged, MaxIterations, Failed };

inline const char* to_string(FitStatus s) {
  switch (s) {
    case FitStatus::Converged: return "Converged";
    case FitStatus::MaxIterations: return "MaxIterations";
    case FitStatus::Failed: return "Failed";
  }
  return "Unknown";
}

struct IterationTrace {
  std::vector<TraceRow> rows;
  FitStatus status = FitStatus::MaxIterations;
  std::string failure_reason;     // set when status == Failed
  double initial_loglik = 0.0;    // log-likelihood of the supplied init
  int ascent_warnings = 0;        // likelihood decreases observed at step > 1
  double offdiag_mass_fraction = 0.0;  // final kernel: off-diagonal share of
                                       // the squared Frobenius norm
  double total_seconds = 0.0;
};

/// Feasible step-size certificate: any a <= a_max keeps the update positive
/// definite; a_max = 1/(1-gamma), infinite when gamma reaches 1.
struct StepSizeBound {
  double gamma;
  double a_max;
};

namespace detail {

/// Everything the fit loop needs from one pass over the observations at a
/// fixed kernel: the ascent direction, the mean scatter of block inverses
/// (for the step bound), (I+L)^{-1}, and the log-likelihood. Block
/// factorizations are shared between the log-det and inverse, so one pass
/// costs O(n kappa^3 + N^3).
struct DeltaStats {
  SymMatrix delta;              // z_mean - (I+L)^{-1}
  SymMatrix z_mean;             // (1/n) sum_i U_i (L_{Y_i})^{-1} U_i^T
  SymMatrix inv_identity_plus;  // (I+L)^{-1}
  double loglik;
};

inline DeltaStats delta_stats(const Kernel& k, const ObservationData& data) {
  if (data.ground_size() != k.dim()) {
    throw DimensionMismatch("data ground size does not match kernel");
  }
  const double n = static_cast<double>(data.count());
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(k.dim(), k.dim());
  double logdet_sum = 0.0;
  int index = 0;
  for (const IndexSet& y : data.subsets()) {
    ++index;
    if (y.empty()) continue;
    try {
      const CholeskyFactor f = cholesky(compress(k.matrix(), y));
      logdet_sum += logdet(f);
      scatter_add_inplace(z, y, inverse(f).mat());
    } catch (const NotPositiveDefinite&) {
      throw SingularSubmatrix(index);
    }
  }
  const CholeskyFactor norm_factor =
      cholesky(SymMatrix(identity_plus(k.matrix())));
  SymMatrix inv_identity_plus = inverse(norm_factor);
  SymMatrix z_mean(z / n);
  SymMatrix delta(z_mean.mat() - inv_identity_plus.mat());
  const double loglik = logdet_sum - n * logdet(norm_factor);
  return {std::move(delta), std::move(z_mean), std::move(inv_identity_plus),
          loglik};
}

inline double offdiag_mass_fraction(const Eigen::MatrixXd& m) {
  const double total = m.squaredNorm();
  if (total == 0.0) return 0.0;
  const double diag = m.diagonal().squaredNorm();
  return (total - diag) / total;
}

}  // namespace detail

/// The ascent direction of the fixed-point iteration:
/// Delta = (1/n) sum_i U_i (L_{Y_i})^{-1} U_i^T - (I+L)^{-1}.
/// Vanishes exactly at stationary points of the log-likelihood.
inline SymMatrix compute_delta(const Kernel& k, const ObservationData& data) {
  return detail::delta_stats(k, data).delta;
}

/// One update L' = L + a L Delta L. For a = 1 the result is positive
/// definite unconditionally; larger steps may fail the Cholesky test, which
/// surfaces as NotPositiveDefinite.
inline Kernel fixed_point_map(const Kernel& k, const ObservationData& data,
                              double a) {
  if (!(a > 0.0)) throw std::invalid_argument("step size must be > 0");
  const SymMatrix delta = compute_delta(k, data);
  const Eigen::MatrixXd& l = k.matrix().mat();
  return Kernel(SymMatrix(l + a * (l * delta.mat() * l)));
}

/// Scale-free stationarity diagnostic:
/// ||Delta||_F / ||(I+L)^{-1}||_F, exactly 0 at stationary points.
inline double stationarity_residual(const Kernel& k,
                                    const ObservationData& data) {
  const detail::DeltaStats st = detail::delta_stats(k, data);
  return st.delta.mat().norm() / st.inv_identity_plus.mat().norm();
}

/// Feasibility bound gamma = max(lambda_min(LZ), 1/lambda_max(I+L)) with
/// Z = (1/n) sum_i U_i (L_{Y_i})^{-1} U_i^T. LZ is not symmetric, so
/// lambda_min(LZ) is taken from the similar symmetric matrix C^T Z C with
/// L = C C^T.
inline StepSizeBound step_size_bound(const Kernel& k,
                                     const ObservationData& data) {
  const detail::DeltaStats st = detail::delta_stats(k, data);
  const Eigen::MatrixXd& c = cholesky(k.matrix()).lower();
  const SymMatrix similar(c.transpose() * st.z_mean.mat() * c);
  const double lz_min = extreme_eigs(similar).min;
  const double norm_max =
      extreme_eigs(SymMatrix(detail::identity_plus(k.matrix()))).max;
  double gamma = std::max(lz_min, 1.0 / norm_max);
  gamma = std::min(1.0, std::max(0.0, gamma));
  const double a_max =
      gamma < 1.0 ? 1.0 / (1.0 - gamma)
                  : std::numeric_limits<double>::infinity();
  return {gamma, a_max};
}

struct FitResult {
  Kernel kernel;
  IterationTrace trace;
};

/// Observer invoked with each accepted iterate; used by tests to audit
/// per-iteration invariants.
using KernelObserver = std::function<void(int iter, const Kernel&)>;

/// Picard iteration: repeat L <- L + a L Delta L until the relative
/// log-likelihood change is <= epsilon or max_iter is reached. When the
/// safeguard is enabled, a positive-definiteness failure halves the
/// effective step (never below 1) and keeps the reduced value from then on;
/// with the safeguard off, or when even the step lower bound fails, the fit
/// stops with status Failed.
inline FitResult picard_fit(const Kernel& init, const ObservationData& data,
                            const FitConfig& cfg,
                            const KernelObserver& on_iterate = {}) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&start]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  };
  const double n = static_cast<double>(data.count());

  IterationTrace trace;
  Kernel current = init;
  detail::DeltaStats stats = detail::delta_stats(current, data);
  trace.initial_loglik = stats.loglik;
  double loglik_prev = stats.loglik;
  double a_eff = cfg.step_a;

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    int halvings = 0;
    Kernel next = current;
    bool updated = false;
    while (!updated) {
      const Eigen::MatrixXd& l = current.matrix().mat();
      try {
        next = Kernel(
            SymMatrix(l + a_eff * (l * stats.delta.mat() * l)));
        updated = true;
      } catch (const NotPositiveDefinite& e) {
        if (!cfg.safeguard || a_eff <= 1.0) {
          trace.status = FitStatus::Failed;
          trace.failure_reason = e.what();
          trace.total_seconds = elapsed();
          trace.offdiag_mass_fraction =
              detail::offdiag_mass_fraction(current.matrix().mat());
          return {std::move(current), std::move(trace)};
        }
        a_eff = std::max(a_eff / 2.0, 1.0);
        ++halvings;
      }
    }

    try {
      stats = detail::delta_stats(next, data);
    } catch (const Error& e) {
      trace.status = FitStatus::Failed;
      trace.failure_reason = e.what();
      trace.total_seconds = elapsed();
      trace.offdiag_mass_fraction =
          detail::offdiag_mass_fraction(current.matrix().mat());
      return {std::move(current), std::move(trace)};
    }
    const double loglik = stats.loglik;
    trace.rows.push_back(
        {iter, elapsed(), loglik, loglik / n, a_eff, halvings});
    if (a_eff > 1.0 && loglik < loglik_prev) ++trace.ascent_warnings;
    current = std::move(next);
    if (on_iterate) on_iterate(iter, current);
    if (std::abs(loglik - loglik_prev) <= cfg.epsilon * std::abs(loglik_prev)) {
      trace.status = FitStatus::Converged;
      break;
    }
    loglik_prev = loglik;
  }

  trace.total_seconds = elapsed();
  trace.offdiag_mass_fraction =
      detail::offdiag_mass_fraction(current.matrix().mat());
  return {std::move(current), std::move(trace)};
}

/// Spectral projection onto the clipped marginal-kernel set: eigenvalues are
/// clamped to [clip_lo, 1 - clip_lo] and the matrix rebuilt. Idempotent.
inline MarginalKernel project_to_unit_interval(const SymMatrix& m,
                                               double clip_lo = 1e-6) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.mat());
  if (es.info() != Eigen::Success) {
    throw EigenFailure("projection eigendecomposition failed");
  }
  Eigen::VectorXd vals = es.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    vals(i) = std::min(1.0 - clip_lo, std::max(clip_lo, vals(i)));
  }
  return MarginalKernel(SymMatrix(es.eigenvectors() * vals.asDiagonal() *
                                  es.eigenvectors().transpose()));
}

namespace detail {

/// log |det(K - I_{Y^c})| and optionally the inverse, via LU. I_{Y^c} is the
/// identity with the diagonal entries belonging to Y zeroed out.
struct MarginalTerm {
  double logabsdet;
  Eigen::MatrixXd inverse;
};

inline MarginalTerm marginal_term(const Eigen::MatrixXd& k, const IndexSet& y,
                                  bool want_inverse) {
  const Eigen::Index n = k.rows();
  Eigen::MatrixXd m = k;
  std::vector<bool> in_y(static_cast<std::size_t>(n), false);
  for (int item : y) in_y[static_cast<std::size_t>(item - 1)] = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!in_y[static_cast<std::size_t>(i)]) m(i, i) -= 1.0;
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const Eigen::VectorXd diag = lu.matrixLU().diagonal();
  const double max_abs = diag.cwiseAbs().maxCoeff();
  const double tol =
      static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_abs;
  double logabsdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = std::abs(diag(i));
    if (!(u > tol)) {
      throw SingularIterate("K - I_{Y^c} is numerically singular");
    }
    logabsdet += std::log(u);
  }
  MarginalTerm term{logabsdet, Eigen::MatrixXd()};
  if (want_inverse) term.inverse = lu.inverse();
  return term;
}

/// Marginal-kernel form of the log-likelihood:
/// sum_i log |det(K - I_{Y_i^c})|.
inline double marginal_log_likelihood(const Eigen::MatrixXd& k,
                                      const ObservationData& data) {
  double sum = 0.0;
  for (const IndexSet& y : data.subsets()) {
    sum += marginal_term(k, y, false).logabsdet;
  }
  return sum;
}

}  // namespace detail

struct PgaResult {
  MarginalKernel kernel;
  IterationTrace trace;
};

using MarginalObserver = std::function<void(int iter, const MarginalKernel&)>;

/// Projected gradient ascent on the marginal-kernel likelihood, the baseline
/// whose spectral projection step the fixed-point method avoids. Each
/// iteration takes the mean gradient (1/n) sum_i (K - I_{Y_i^c})^{-1},
/// backtracks the step from cfg.step_a by halving until the objective
/// improves, and projects back onto the clipped set.
inline PgaResult projected_gradient_fit(const MarginalKernel& init,
                                        const ObservationData& data,
                                        const FitConfig& cfg,
                                        const MarginalObserver& on_iterate = {},
                                        double clip_lo = 1e-6) {
  cfg.validate();
  if (data.ground_size() != init.dim()) {
    throw DimensionMismatch("data ground size does not match kernel");
  }
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&start]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  };
  const double n = static_cast<double>(data.count());
  constexpr int kMaxBacktracks = 40;

  IterationTrace trace;
  MarginalKernel current = project_to_unit_interval(init.matrix(), clip_lo);
  double loglik_prev;
  try {
    loglik_prev = detail::marginal_log_likelihood(current.matrix().mat(), data);
  } catch (const Error& e) {
    trace.status = FitStatus::Failed;
    trace.failure_reason = e.what();
    trace.offdiag_mass_fraction =
        detail::offdiag_mass_fraction(current.matrix().mat());
    return {std::move(current), std::move(trace)};
  }
  trace.initial_loglik = loglik_prev;

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    Eigen::MatrixXd grad;
    try {
      grad = Eigen::MatrixXd::Zero(current.dim(), current.dim());
      for (const IndexSet& y : data.subsets()) {
        grad +=
            detail::marginal_term(current.matrix().mat(), y, true).inverse;
      }
      grad /= n;
      grad = (0.5 * (grad + grad.transpose())).eval();
    } catch (const Error& e) {
      trace.status = FitStatus::Failed;
      trace.failure_reason = e.what();
      break;
    }

    double step = cfg.step_a;
    int halvings = 0;
    bool accepted = false;
    MarginalKernel candidate = current;
    double loglik = loglik_prev;
    for (int t = 0; t < kMaxBacktracks; ++t) {
      try {
        candidate = project_to_unit_interval(
            SymMatrix(current.matrix().mat() + step * grad), clip_lo);
        loglik =
            detail::marginal_log_likelihood(candidate.matrix().mat(), data);
        if (loglik > loglik_prev) {
          accepted = true;
          break;
        }
      } catch (const SingularIterate&) {
        // treat a singular candidate like a failed step and shorten
      }
      step /= 2.0;
      ++halvings;
    }
    if (!accepted) {
      // No ascent step left at any length: the iterate is stationary for
      // this line search, which is the same exit as a zero relative change.
      trace.status = FitStatus::Converged;
      break;
    }

    current = std::move(candidate);
    trace.rows.push_back(
        {iter, elapsed(), loglik, loglik / n, step, halvings});
    if (on_iterate) on_iterate(iter, current);
    if (std::abs(loglik - loglik_prev) <= cfg.epsilon * std::abs(loglik_prev)) {
      trace.status = FitStatus::Converged;
      break;
    }
    loglik_prev = loglik;
  }

  trace.total_seconds = elapsed();
  trace.offdiag_mass_fraction =
      detail::offdiag_mass_fraction(current.matrix().mat());
  return {std::move(current), std::move(trace)};
}

}  // namespace dppfit
