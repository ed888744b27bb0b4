#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "dppfit/learn.hpp"
#include "dppfit/sampling.hpp"
#include "dppfit/synthgen.hpp"
#include "test_support.hpp"

using namespace dppfit;
using Catch::Approx;

namespace {

Kernel scalar_kernel(double v) {
  return Kernel(SymMatrix(Eigen::MatrixXd::Constant(1, 1, v)));
}

const ObservationData& stationary_pair() {
  // For L = I, Z = diag(appearance counts)/n, so data covering each item in
  // exactly half the observations makes the identity a stationary point.
  static const ObservationData data(2, {IndexSet{1}, IndexSet{2}});
  return data;
}

FitConfig config(double a, double eps, int max_iter, bool safeguard = true) {
  FitConfig cfg;
  cfg.step_a = a;
  cfg.epsilon = eps;
  cfg.max_iter = max_iter;
  cfg.safeguard = safeguard;
  return cfg;
}

}  // namespace

TEST_CASE("compute_delta hand values") {
  const Kernel id = Kernel(SymMatrix::identity(2));
  CHECK(compute_delta(id, stationary_pair()).mat().cwiseAbs().maxCoeff() <=
        1e-14);

  const SymMatrix d =
      compute_delta(scalar_kernel(2.0), ObservationData(1, {IndexSet{1}}));
  CHECK(d(0, 0) == Approx(1.0 / 6.0));
}

TEST_CASE("compute_delta equals gradient over n") {
  SeededRng rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform01() * 12);
    const Kernel k(testsup::random_spd(rng, n, 0.2));
    const ObservationData data = testsup::random_observations(
        rng, n, 3 + static_cast<Eigen::Index>(rng.uniform01() * 60));
    const SymMatrix delta = compute_delta(k, data);
    const SymMatrix scaled(gradient(k, data).mat() /
                           static_cast<double>(data.count()));
    CHECK((delta.mat() - scaled.mat()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("fixed_point_map hand values") {
  // Stationary input stays put.
  const Kernel id = Kernel(SymMatrix::identity(2));
  const Kernel mapped = fixed_point_map(id, stationary_pair(), 1.0);
  CHECK((mapped.matrix().mat() - id.matrix().mat()).cwiseAbs().maxCoeff() <=
        1e-14);

  // Scalar case: L=2, observation {1}: L' = 2 + a * 4/6.
  const ObservationData single(1, {IndexSet{1}});
  const Kernel two = scalar_kernel(2.0);
  const Kernel stepped = fixed_point_map(two, single, 1.0);
  CHECK(stepped.matrix()(0, 0) == Approx(8.0 / 3.0));
  CHECK(log_likelihood(two, single) == Approx(std::log(2.0 / 3.0)));
  CHECK(log_likelihood(stepped, single) == Approx(std::log(8.0 / 11.0)));
  CHECK(log_likelihood(stepped, single) > log_likelihood(two, single));

  const Kernel big_step = fixed_point_map(two, single, 3.0);
  CHECK(big_step.matrix()(0, 0) == Approx(4.0));
}

TEST_CASE("fixed_point_map surfaces PD failures for large steps") {
  // Data of empty sets drives L down; L' = 2 - a*4/3 turns indefinite at
  // a >= 1.5, which matches the bound gamma = 1/3, a_max = 1.5 exactly.
  const ObservationData empties(1, {IndexSet{}});
  const Kernel two = scalar_kernel(2.0);
  const StepSizeBound bound = step_size_bound(two, empties);
  CHECK(bound.gamma == Approx(1.0 / 3.0));
  CHECK(bound.a_max == Approx(1.5));
  CHECK_NOTHROW(fixed_point_map(two, empties, 1.49));
  CHECK_THROWS_AS(fixed_point_map(two, empties, 5.0), NotPositiveDefinite);
}

TEST_CASE("step_size_bound hand values") {
  const StepSizeBound bound =
      step_size_bound(Kernel(SymMatrix::identity(2)), stationary_pair());
  CHECK(std::abs(bound.gamma - 0.5) <= 1e-12);
  CHECK(std::abs(bound.a_max - 2.0) <= 1e-12);
}

TEST_CASE("step_size_bound is invariant to observation order") {
  SeededRng rng(89);
  const Eigen::Index n = 8;
  const Kernel k(testsup::random_spd(rng, n, 0.2));
  const ObservationData data = testsup::random_observations(rng, n, 40);
  std::vector<IndexSet> reversed(data.subsets().rbegin(),
                                 data.subsets().rend());
  const ObservationData flipped(n, std::move(reversed));
  const StepSizeBound a = step_size_bound(k, data);
  const StepSizeBound b = step_size_bound(k, flipped);
  CHECK(a.gamma == Approx(b.gamma).margin(1e-12));
}

TEST_CASE("step_size_bound certifies feasible steps") {
  SeededRng rng(97);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform01() * 14);
    const Kernel k(testsup::random_spd(rng, n, 0.2));
    const ObservationData data = testsup::random_observations(
        rng, n, 5 + static_cast<Eigen::Index>(rng.uniform01() * 40));
    const StepSizeBound bound = step_size_bound(k, data);
    CHECK(bound.gamma >= 0.0);
    CHECK(bound.gamma <= 1.0);
    const double a = std::isfinite(bound.a_max) ? 0.999 * bound.a_max : 1e6;
    CHECK_NOTHROW(fixed_point_map(k, data, a));
  }
}

TEST_CASE("stationarity_residual hand values") {
  CHECK(stationarity_residual(Kernel(SymMatrix::identity(2)),
                              stationary_pair()) <= 1e-14);
  CHECK(stationarity_residual(scalar_kernel(2.0),
                              ObservationData(1, {IndexSet{1}})) ==
        Approx(0.5));
}

TEST_CASE("picard_fit converges immediately at a stationary init") {
  const Kernel id = Kernel(SymMatrix::identity(2));
  const FitResult result =
      picard_fit(id, stationary_pair(), config(1.0, 1e-7, 50));
  CHECK(result.trace.status == FitStatus::Converged);
  CHECK(result.trace.rows.size() == 1);
  CHECK((result.kernel.matrix().mat() - id.matrix().mat())
            .cwiseAbs()
            .maxCoeff() <= 1e-14);
}

TEST_CASE("picard_fit reproduces the scalar hand iteration") {
  const ObservationData single(1, {IndexSet{1}});
  const FitResult result =
      picard_fit(scalar_kernel(2.0), single, config(1.0, 1e-12, 3));
  REQUIRE(result.trace.rows.size() == 3);
  CHECK(result.trace.initial_loglik == Approx(std::log(2.0 / 3.0)));
  CHECK(result.trace.rows[0].loglik == Approx(std::log(8.0 / 11.0)));
  CHECK(result.trace.rows[0].loglik > result.trace.initial_loglik);
  CHECK(result.trace.rows[1].loglik > result.trace.rows[0].loglik);
  CHECK(result.trace.rows[2].loglik > result.trace.rows[1].loglik);
  CHECK(result.trace.status == FitStatus::MaxIterations);
}

TEST_CASE("picard_fit is monotone at a = 1 and keeps iterates PD") {
  SeededRng rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.uniform01() * 17);
    SeededRng gen = rng.substream(static_cast<std::uint64_t>(trial));
    const Kernel truth =
        trial % 2 == 0 ? generate_basic(n, gen) : generate_wishart(n, gen);
    const ObservationData data =
        sample_spectral(truth, 200, rng.substream(1000 + trial));
    const Kernel init = generate_init(
        {trial % 2 == 0 ? KernelKind::Basic : KernelKind::Wishart, n},
        rng.substream(2000 + trial));

    int observed = 0;
    const FitResult result = picard_fit(
        init, data, config(1.0, 1e-9, 25),
        [&observed](int iter, const Kernel& k) {
          ++observed;
          CHECK_NOTHROW(cholesky(k.matrix()));
        });
    CHECK(observed == static_cast<int>(result.trace.rows.size()));

    double prev = result.trace.initial_loglik;
    double prev_time = 0.0;
    for (const TraceRow& row : result.trace.rows) {
      CHECK(row.loglik >= prev - 1e-9 * std::abs(prev));
      CHECK(row.time_s >= prev_time);
      CHECK(row.step_a == 1.0);
      CHECK(row.safeguard_halvings == 0);
      prev = row.loglik;
      prev_time = row.time_s;
    }
    CHECK(result.trace.ascent_warnings == 0);
  }
}

TEST_CASE("picard_fit safeguard halves toward 1 and stays reduced") {
  const ObservationData empties(1, {IndexSet{}});

  // a = 5 halves to 1.25 (two halvings) before the update is PD.
  const FitResult result =
      picard_fit(scalar_kernel(2.0), empties, config(5.0, 1e-9, 10));
  REQUIRE(!result.trace.rows.empty());
  CHECK(result.trace.rows[0].safeguard_halvings == 2);
  CHECK(result.trace.rows[0].step_a == Approx(1.25));
  for (const TraceRow& row : result.trace.rows) {
    CHECK(row.step_a <= 1.25);
  }
  CHECK(result.trace.status != FitStatus::Failed);
  CHECK(result.kernel.matrix()(0, 0) > 0.0);

  // a = 8 halves all the way down to exactly 1.
  const FitResult to_one =
      picard_fit(scalar_kernel(2.0), empties, config(8.0, 1e-9, 10));
  REQUIRE(!to_one.trace.rows.empty());
  CHECK(to_one.trace.rows[0].safeguard_halvings == 3);
  CHECK(to_one.trace.rows[0].step_a == 1.0);

  // Safeguard disabled: the same instance is a hard failure.
  const FitResult failed = picard_fit(scalar_kernel(2.0), empties,
                                      config(5.0, 1e-9, 10, false));
  CHECK(failed.trace.status == FitStatus::Failed);
  CHECK(!failed.trace.failure_reason.empty());
  CHECK(failed.trace.rows.empty());
}

TEST_CASE("picard_fit is deterministic") {
  SeededRng rng(103);
  const Eigen::Index n = 10;
  const Kernel truth(testsup::random_spd(rng, n, 0.2));
  const ObservationData data = sample_spectral(truth, 100, SeededRng(5));
  const Kernel init(testsup::random_spd(rng, n, 0.2));
  const FitResult a = picard_fit(init, data, config(1.0, 1e-8, 30));
  const FitResult b = picard_fit(init, data, config(1.0, 1e-8, 30));
  CHECK(a.kernel.matrix().mat() == b.kernel.matrix().mat());
  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  for (std::size_t i = 0; i < a.trace.rows.size(); ++i) {
    CHECK(a.trace.rows[i].loglik == b.trace.rows[i].loglik);
  }
}

TEST_CASE("converged fits sit near a fixed point") {
  SeededRng rng(107);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.uniform01() * 12);
    const Kernel truth(testsup::random_spd(rng, n, 0.3));
    const ObservationData data =
        sample_spectral(truth, 150, rng.substream(10 + trial));
    const Kernel init(testsup::random_spd(rng, n, 0.3));
    const FitResult result = picard_fit(init, data, config(1.0, 1e-9, 4000));
    REQUIRE(result.trace.status == FitStatus::Converged);
    CHECK(stationarity_residual(result.kernel, data) < 1e-3);
  }
}

TEST_CASE("a vanishing residual pins the fixed point and conversely") {
  const Kernel id = Kernel(SymMatrix::identity(2));
  const ObservationData data = stationary_pair();
  // residual == 0 (up to fp dust) implies the map leaves the kernel alone.
  REQUIRE(stationarity_residual(id, data) <= 1e-14);
  const Kernel mapped = fixed_point_map(id, data, 1.0);
  CHECK((mapped.matrix().mat() - id.matrix().mat()).cwiseAbs().maxCoeff() <=
        1e-12);

  // An unchanged iterate implies a vanishing residual: N=3 variant with the
  // same half-coverage structure.
  const ObservationData half(3, {IndexSet{1, 2}, IndexSet{3}});
  const Kernel id3 = Kernel(SymMatrix::identity(3));
  const Kernel mapped3 = fixed_point_map(id3, half, 1.0);
  REQUIRE((mapped3.matrix().mat() - id3.matrix().mat()).cwiseAbs().maxCoeff() <=
          1e-14);
  CHECK(stationarity_residual(id3, half) <= 1e-10);
}

TEST_CASE("projection clips eigenvalues and is idempotent") {
  // Symmetric matrix with eigenvalues {1.5, -0.2}.
  SeededRng rng(109);
  const Eigen::MatrixXd q = testsup::random_orthonormal(rng, 2, 2);
  Eigen::VectorXd vals(2);
  vals << 1.5, -0.2;
  const SymMatrix m(q * vals.asDiagonal() * q.transpose());
  const MarginalKernel projected = project_to_unit_interval(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(projected.matrix().mat());
  CHECK(es.eigenvalues()(0) == Approx(1e-6).margin(1e-12));
  CHECK(es.eigenvalues()(1) == Approx(1.0 - 1e-6).margin(1e-12));

  const MarginalKernel twice = project_to_unit_interval(projected.matrix());
  CHECK((twice.matrix().mat() - projected.matrix().mat())
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
}

TEST_CASE("projected gradient ascends and respects the clip bounds") {
  SeededRng rng(113);
  const Eigen::Index n = 8;
  const Kernel truth(testsup::random_spd(rng, n, 0.3));
  const ObservationData data = sample_spectral(truth, 200, SeededRng(19));
  const Kernel init(testsup::random_spd(rng, n, 0.3));

  // The marginal-form objective at the init equals the L-form likelihood.
  const PgaResult result = projected_gradient_fit(
      marginal_kernel(init), data, config(1.0, 1e-7, 60),
      [](int, const MarginalKernel& k) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.matrix().mat(),
                                                          Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues()(0) >= 1e-6 - 1e-12);
        CHECK(es.eigenvalues()(es.eigenvalues().size() - 1) <=
              1.0 - 1e-6 + 1e-12);
      });
  CHECK(result.trace.initial_loglik ==
        Approx(log_likelihood(init, data)).epsilon(1e-6));
  REQUIRE(!result.trace.rows.empty());
  CHECK(result.trace.rows.back().loglik > result.trace.initial_loglik);
  double prev = result.trace.initial_loglik;
  for (const TraceRow& row : result.trace.rows) {
    CHECK(row.loglik > prev);  // accepted steps strictly improve
    prev = row.loglik;
  }
  CHECK(result.trace.offdiag_mass_fraction >= 0.0);
  CHECK(result.trace.offdiag_mass_fraction <= 1.0);
}

TEST_CASE("fit config validation") {
  CHECK_THROWS_AS(config(0.0, 1e-7, 10).validate(), std::invalid_argument);
  CHECK_THROWS_AS(config(1.0, 0.0, 10).validate(), std::invalid_argument);
  CHECK_THROWS_AS(config(1.0, 1e-7, 0).validate(), std::invalid_argument);
}
