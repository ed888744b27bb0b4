#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dppfit/errors.hpp"
#include "dppfit/io.hpp"
#include "dppfit/learn.hpp"
#include "dppfit/model.hpp"
#include "dppfit/sampling.hpp"
#include "dppfit/synthgen.hpp"

namespace dppfit {

inline constexpr const char* kVersion = "0.1.0";

/// Exact enumeration sampling is used up to this ground size; above it the
/// spectral sampler takes over.
inline constexpr Eigen::Index kExactSamplerMaxN = 12;

struct ExperimentSpec {
  Eigen::Index n_items = 0;    // ground set size N
  Eigen::Index n_samples = 0;  // number of subsets n
  std::string dist = "wishart";
  double step_a = 1.0;
  double epsilon = 1e-7;
  int max_iter = 500;
  std::uint64_t seed = 0;
  std::string solver = "picard";
  bool safeguard = true;
  bool drop_empty = false;
  std::string kernel_in;
  std::string kernel_out;
  std::string data_in;
  std::string data_out;
  std::string trace_out;
  std::optional<double> ref_loglik;  // external reference for time-to-99%
};

inline KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "basic") return KernelKind::Basic;
  if (name == "wishart") return KernelKind::Wishart;
  throw std::invalid_argument("unknown distribution '" + name +
                              "' (expected basic or wishart)");
}

inline const char* to_string(KernelKind kind) {
  return kind == KernelKind::Basic ? "basic" : "wishart";
}

namespace detail {

// Substream tags for the experiment master seed.
constexpr std::uint64_t kTruthStream = 1;
constexpr std::uint64_t kDataStream = 2;
constexpr std::uint64_t kInitStream = 3;

inline Kernel draw_kernel(KernelKind kind, Eigen::Index dim, SeededRng rng) {
  return kind == KernelKind::Basic ? generate_basic(dim, rng)
                                   : generate_wishart(dim, rng);
}

inline FitConfig fit_config_from(const ExperimentSpec& spec) {
  FitConfig cfg;
  cfg.step_a = spec.step_a;
  cfg.epsilon = spec.epsilon;
  cfg.max_iter = spec.max_iter;
  cfg.safeguard = spec.safeguard;
  cfg.seed = spec.seed;
  cfg.validate();
  return cfg;
}

inline nlohmann::json spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json j;
  j["n_items"] = spec.n_items;
  j["n_samples"] = spec.n_samples;
  j["dist"] = spec.dist;
  j["a"] = spec.step_a;
  j["eps"] = spec.epsilon;
  j["max_iter"] = spec.max_iter;
  j["seed"] = spec.seed;
  j["solver"] = spec.solver;
  j["safeguard"] = spec.safeguard;
  j["drop_empty"] = spec.drop_empty;
  j["kernel_in"] = spec.kernel_in;
  j["kernel_out"] = spec.kernel_out;
  j["data_in"] = spec.data_in;
  j["data_out"] = spec.data_out;
  j["trace_out"] = spec.trace_out;
  j["rng"] = SeededRng::kAlgorithm;
  j["version"] = kVersion;
  return j;
}

inline void write_trace_sidecar(const std::string& csv_path,
                                const ExperimentSpec& spec,
                                const IterationTrace& trace,
                                double final_loglik) {
  nlohmann::json j;
  j["spec"] = spec_to_json(spec);
  j["status"] = to_string(trace.status);
  j["final_loglik"] = final_loglik;
  j["wall_s"] = trace.total_seconds;
  j["version"] = kVersion;
  nlohmann::json diag;
  diag["initial_loglik"] = trace.initial_loglik;
  diag["iterations"] = trace.rows.size();
  diag["ascent_warnings"] = trace.ascent_warnings;
  diag["offdiag_mass_fraction"] = trace.offdiag_mass_fraction;
  if (!trace.failure_reason.empty()) diag["failure"] = trace.failure_reason;
  j["diagnostics"] = diag;
  std::ofstream out(csv_path + ".json");
  if (!out) throw IoError("cannot open for writing: " + csv_path + ".json");
  out << j.dump(2) << "\n";
}

/// First wall-clock instant at which the trace reaches within 1% of the
/// target log-likelihood; NaN when it never does.
inline double time_to_99(const IterationTrace& trace, double target) {
  const double threshold = target - 0.01 * std::abs(target);
  for (const TraceRow& row : trace.rows) {
    if (row.loglik >= threshold) return row.time_s;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Writes a ground-truth kernel and n subsets sampled from it. The kernel is
/// drawn from --dist unless --kernel-in supplies one. Ground sets up to
/// kExactSamplerMaxN use the exact enumeration sampler.
inline int cmd_generate(const ExperimentSpec& spec) {
  if (spec.n_samples < 1) throw std::invalid_argument("--n-samples must be >= 1");
  if (spec.data_out.empty()) throw std::invalid_argument("--data-out is required");
  const SeededRng master(spec.seed);

  Kernel truth = [&]() {
    if (!spec.kernel_in.empty()) {
      return Kernel(read_kernel_file(spec.kernel_in));
    }
    if (spec.n_items < 1) throw std::invalid_argument("--n-items must be >= 1");
    return detail::draw_kernel(parse_kernel_kind(spec.dist), spec.n_items,
                               master.substream(detail::kTruthStream));
  }();

  const bool exact = truth.dim() <= kExactSamplerMaxN;
  const SeededRng data_stream = master.substream(detail::kDataStream);
  ObservationData data = exact
                             ? sample_exact(truth, spec.n_samples, data_stream)
                             : sample_spectral(truth, spec.n_samples,
                                               data_stream);

  std::vector<std::string> comments = {
      std::string("generated by dppfit ") + kVersion,
      "dist=" + (spec.kernel_in.empty() ? spec.dist : "file") +
          " seed=" + std::to_string(spec.seed) +
          " N=" + std::to_string(truth.dim()) +
          " n=" + std::to_string(spec.n_samples),
      std::string("sampler=") + (exact ? "exact" : "spectral") +
          " rng=" + SeededRng::kAlgorithm,
  };
  write_subsets_file(spec.data_out, data, comments);
  if (!spec.kernel_out.empty()) {
    write_kernel_file(spec.kernel_out, truth.matrix());
  } else if (spec.kernel_in.empty()) {
    throw std::invalid_argument(
        "--kernel-out is required when the kernel is generated");
  }
  return 0;
}

/// Runs the selected solver on a subsets file. The initialization comes from
/// --kernel-in or is drawn from --dist on an independent substream. Exit
/// code 0 = converged, 2 = iteration cap, 1 = failure.
inline int cmd_train(const ExperimentSpec& spec, std::ostream& out = std::cout) {
  if (spec.data_in.empty()) throw std::invalid_argument("--data-in is required");
  const ObservationData data = read_subsets_file(spec.data_in,
                                                 spec.drop_empty);
  if (spec.n_items > 0 && spec.n_items != data.ground_size()) {
    throw DimensionMismatch("--n-items does not match the data file header");
  }
  const SeededRng master(spec.seed);
  Kernel init = [&]() {
    if (!spec.kernel_in.empty()) {
      Kernel k(read_kernel_file(spec.kernel_in));
      if (k.dim() != data.ground_size()) {
        throw DimensionMismatch("initialization kernel does not match data");
      }
      return k;
    }
    return generate_init({parse_kernel_kind(spec.dist), data.ground_size()},
                         master.substream(detail::kInitStream));
  }();

  const FitConfig cfg = detail::fit_config_from(spec);
  IterationTrace trace;
  double final_loglik = 0.0;
  SymMatrix learned = init.matrix();
  if (spec.solver == "picard") {
    FitResult result = picard_fit(init, data, cfg);
    trace = std::move(result.trace);
    learned = result.kernel.matrix();
    final_loglik =
        trace.rows.empty() ? trace.initial_loglik : trace.rows.back().loglik;
  } else if (spec.solver == "pga") {
    PgaResult result = projected_gradient_fit(marginal_kernel(init), data,
                                              cfg);
    trace = std::move(result.trace);
    final_loglik =
        trace.rows.empty() ? trace.initial_loglik : trace.rows.back().loglik;
    // Convert the marginal kernel back so kernel files always hold L:
    // L = K (I - K)^{-1}, well-defined since the projection keeps the
    // spectrum strictly inside (0, 1).
    const Eigen::MatrixXd& km = result.kernel.matrix().mat();
    const Eigen::MatrixXd identity =
        Eigen::MatrixXd::Identity(km.rows(), km.cols());
    const SymMatrix complement_inv = inverse(cholesky(SymMatrix(identity - km)));
    learned = SymMatrix(km * complement_inv.mat());
  } else {
    throw std::invalid_argument("unknown solver '" + spec.solver +
                                "' (expected picard or pga)");
  }

  if (!spec.kernel_out.empty()) write_kernel_file(spec.kernel_out, learned);
  if (!spec.trace_out.empty()) {
    write_trace_csv(spec.trace_out, trace);
    detail::write_trace_sidecar(spec.trace_out, spec, trace, final_loglik);
  }
  out << "status=" << to_string(trace.status)
      << " iters=" << trace.rows.size()
      << " final_loglik=" << format_double(final_loglik)
      << " wall_s=" << format_seconds(trace.total_seconds);
  if (!trace.failure_reason.empty()) out << " reason=" << trace.failure_reason;
  out << "\n";
  switch (trace.status) {
    case FitStatus::Converged: return 0;
    case FitStatus::MaxIterations: return 2;
    case FitStatus::Failed: return 1;
  }
  return 1;
}

/// Evaluates a kernel file against a subsets file and prints a JSON report.
inline int cmd_eval(const std::string& kernel_path,
                    const std::string& data_path, bool drop_empty = false,
                    std::ostream& out = std::cout) {
  const Kernel kernel(read_kernel_file(kernel_path));
  std::vector<int> line_numbers;
  const ObservationData data =
      read_subsets_file(data_path, drop_empty, &line_numbers);
  if (kernel.dim() != data.ground_size()) {
    throw DimensionMismatch("kernel dimension does not match data file");
  }
  nlohmann::json j;
  try {
    const double loglik = log_likelihood(kernel, data);
    j["loglik"] = loglik;
    j["normalized_loglik"] = loglik / static_cast<double>(data.count());
    j["stationarity_residual"] = stationarity_residual(kernel, data);
  } catch (const SingularSubmatrix& e) {
    const int line =
        line_numbers[static_cast<std::size_t>(e.observation - 1)];
    throw SingularSubmatrix(line);
  }
  j["n"] = data.count();
  j["N"] = data.ground_size();
  out << j.dump(2) << "\n";
  return 0;
}

struct BenchGrid {
  std::vector<Eigen::Index> n_items;
  std::vector<Eigen::Index> n_samples;
  std::vector<double> step_a;
  std::vector<std::string> dists;
  int reps = 1;
};

struct BenchSummary {
  double slope = 0.0;  // seconds per (n*kappa^3 + N^3) unit, through origin
  double max_residual_factor = 0.0;
  int cells_ok = 0;
  int cells_failed = 0;
};

inline constexpr const char* kBenchCsvHeader =
    "N,n,a,dist,seed,final_loglik,time_to_99,iters,seconds_per_iter,status";

/// Runs the solver over the parameter grid, one row per cell, and fits
/// seconds-per-iteration against the n*kappa^3 + N^3 cost model. Cell
/// failures are recorded in-row and the sweep continues. When the solver is
/// picard, the per-cell tolerance is halved relative to --eps so sweeps of
/// the two solvers at the same --eps remain comparable.
inline BenchSummary cmd_bench(const ExperimentSpec& base, const BenchGrid& grid,
                              std::ostream& csv_out,
                              std::ostream& summary_out = std::cout) {
  if (grid.n_items.empty() || grid.n_samples.empty() || grid.step_a.empty() ||
      grid.dists.empty() || grid.reps < 1) {
    throw std::invalid_argument("bench grid must be non-empty");
  }
  csv_out << kBenchCsvHeader << "\n";
  struct Cell {
    double cost;  // n*kappa^3 + N^3
    double seconds_per_iter;
  };
  std::vector<Cell> cells;
  BenchSummary summary;

  for (const std::string& dist : grid.dists) {
    const KernelKind kind = parse_kernel_kind(dist);
    for (Eigen::Index n_items : grid.n_items) {
      for (Eigen::Index n_samples : grid.n_samples) {
        for (double a : grid.step_a) {
          for (int rep = 0; rep < grid.reps; ++rep) {
            const std::uint64_t seed = base.seed + static_cast<std::uint64_t>(rep);
            csv_out << n_items << ',' << n_samples << ','
                    << format_double(a) << ',' << dist << ',' << seed << ',';
            try {
              const SeededRng master(seed);
              Kernel truth = detail::draw_kernel(
                  kind, n_items, master.substream(detail::kTruthStream));
              ObservationData data =
                  n_items <= kExactSamplerMaxN
                      ? sample_exact(truth, n_samples,
                                     master.substream(detail::kDataStream))
                      : sample_spectral(truth, n_samples,
                                        master.substream(detail::kDataStream));
              Kernel init = generate_init(
                  {kind, n_items}, master.substream(detail::kInitStream));

              ExperimentSpec cell_spec = base;
              cell_spec.step_a = a;
              if (base.solver == "picard") cell_spec.epsilon = 0.5 * base.epsilon;
              const FitConfig cfg = detail::fit_config_from(cell_spec);

              IterationTrace trace;
              double final_loglik = 0.0;
              if (base.solver == "pga") {
                PgaResult result =
                    projected_gradient_fit(marginal_kernel(init), data, cfg);
                trace = std::move(result.trace);
              } else {
                FitResult result = picard_fit(init, data, cfg);
                trace = std::move(result.trace);
              }
              if (trace.rows.empty()) throw Error("solver produced no iterations");
              final_loglik = trace.rows.back().loglik;
              const double target = base.ref_loglik.value_or(final_loglik);
              const double t99 = detail::time_to_99(trace, target);
              const double spi =
                  trace.total_seconds / static_cast<double>(trace.rows.size());
              const double cost =
                  static_cast<double>(n_samples) *
                      std::pow(static_cast<double>(data.kappa()), 3) +
                  std::pow(static_cast<double>(n_items), 3);
              cells.push_back({cost, spi});
              ++summary.cells_ok;
              csv_out << format_double(final_loglik) << ','
                      << format_seconds(t99) << ',' << trace.rows.size() << ','
                      << format_double(spi) << ','
                      << to_string(trace.status) << '\n';
            } catch (const std::exception& e) {
              ++summary.cells_failed;
              std::string reason = e.what();
              std::replace(reason.begin(), reason.end(), ',', ';');
              csv_out << "nan,nan,0,nan,error:" << reason << '\n';
            }
          }
        }
      }
    }
  }

  // Least-squares fit through the origin of seconds_per_iter against the
  // cost model, plus the worst multiplicative residual.
  double xy = 0.0, xx = 0.0;
  for (const Cell& cell : cells) {
    xy += cell.cost * cell.seconds_per_iter;
    xx += cell.cost * cell.cost;
  }
  summary.slope = xx > 0.0 ? xy / xx : 0.0;
  for (const Cell& cell : cells) {
    const double predicted = summary.slope * cell.cost;
    if (predicted > 0.0 && cell.seconds_per_iter > 0.0) {
      const double factor = std::max(cell.seconds_per_iter / predicted,
                                     predicted / cell.seconds_per_iter);
      summary.max_residual_factor =
          std::max(summary.max_residual_factor, factor);
    }
  }
  nlohmann::json j;
  j["slope_seconds_per_cost_unit"] = summary.slope;
  j["max_residual_factor"] = summary.max_residual_factor;
  j["cells_ok"] = summary.cells_ok;
  j["cells_failed"] = summary.cells_failed;
  j["version"] = kVersion;
  summary_out << j.dump(2) << "\n";
  return summary;
}

}  // namespace dppfit
