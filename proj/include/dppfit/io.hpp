#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dppfit/errors.hpp"
#include "dppfit/learn.hpp"
#include "dppfit/model.hpp"

namespace dppfit {

/// 17 significant digits: enough to round-trip any finite double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_seconds(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Kernel files: header "dpp-kernel v1 N=<int>", then N rows of N values.

inline void write_kernel_file(const std::string& path, const SymMatrix& l) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "dpp-kernel v1 N=" << l.dim() << "\n";
  for (Eigen::Index i = 0; i < l.dim(); ++i) {
    for (Eigen::Index j = 0; j < l.dim(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(l(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline SymMatrix read_kernel_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string header;
  if (!std::getline(in, header)) throw ParseError("empty kernel file", 1);
  long n = 0;
  if (std::sscanf(header.c_str(), "dpp-kernel v1 N=%ld", &n) != 1 || n < 1) {
    throw ParseError("expected header 'dpp-kernel v1 N=<int>'", 1);
  }
  Eigen::MatrixXd m(n, n);
  for (long i = 0; i < n; ++i) {
    std::string line;
    if (!std::getline(in, line)) {
      throw ParseError("kernel file truncated", static_cast<int>(i) + 2);
    }
    std::istringstream row(line);
    for (long j = 0; j < n; ++j) {
      if (!(row >> m(i, j))) {
        throw ParseError("expected " + std::to_string(n) + " values",
                         static_cast<int>(i) + 2);
      }
    }
  }
  return SymMatrix(std::move(m));
}

// ---------------------------------------------------------------------------
// Subsets files: '#' comment lines, first payload line "N=<int>", then one
// subset per line as whitespace-separated 1-based indices; a blank line is an
// empty subset.

inline void write_subsets_file(const std::string& path,
                               const ObservationData& data,
                               const std::vector<std::string>& comments = {}) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const std::string& c : comments) out << "# " << c << "\n";
  out << "N=" << data.ground_size() << "\n";
  for (const IndexSet& y : data.subsets()) {
    bool first = true;
    for (int item : y) {
      if (!first) out << ' ';
      out << item;
      first = false;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

namespace detail {

inline bool is_comment_or_space(const std::string& line, bool* blank) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                             line[i] == '\r')) {
    ++i;
  }
  *blank = (i == line.size());
  return *blank || line[i] == '#';
}

}  // namespace detail

/// When `subset_lines` is non-null it receives the 1-based file line of each
/// retained subset, for error reports that point back into the file.
inline ObservationData read_subsets_file(const std::string& path,
                                         bool drop_empty = false,
                                         std::vector<int>* subset_lines =
                                             nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  int line_no = 0;
  long ground = -1;
  std::vector<IndexSet> subsets;
  if (subset_lines) subset_lines->clear();
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = false;
    const bool skip = detail::is_comment_or_space(line, &blank);
    if (ground < 0) {
      // Everything before the N= line must be comments.
      if (skip && !blank) continue;
      if (std::sscanf(line.c_str(), "N=%ld", &ground) != 1 || ground < 1) {
        throw ParseError("expected 'N=<int>' before the first subset",
                         line_no);
      }
      continue;
    }
    if (skip && !blank) continue;  // comment inside the data block
    std::istringstream tokens(line);
    std::vector<int> items;
    int item = 0;
    while (tokens >> item) {
      if (item < 1 || item > ground) {
        throw ParseError("index " + std::to_string(item) +
                             " outside 1.." + std::to_string(ground),
                         line_no);
      }
      items.push_back(item);
    }
    if (!tokens.eof()) {
      throw ParseError("malformed subset line", line_no);
    }
    try {
      IndexSet y(std::move(items));
      if (drop_empty && y.empty()) continue;
      subsets.push_back(std::move(y));
      if (subset_lines) subset_lines->push_back(line_no);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (ground < 1) throw ParseError("missing 'N=<int>' header", line_no);
  if (subsets.empty()) {
    throw ParseError("file contains no observed subsets", line_no);
  }
  return ObservationData(ground, std::move(subsets));
}

// ---------------------------------------------------------------------------
// Trace CSV. The header is part of the format contract.

inline constexpr const char* kTraceCsvHeader =
    "iter,time_s,loglik,normalized_loglik,step_a,safeguard_halvings";

inline void write_trace_csv(const std::string& path,
                            const IterationTrace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kTraceCsvHeader << "\n";
  for (const TraceRow& row : trace.rows) {
    out << row.iter << ',' << format_seconds(row.time_s) << ','
        << format_double(row.loglik) << ','
        << format_double(row.normalized_loglik) << ','
        << format_double(row.step_a) << ',' << row.safeguard_halvings << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

/// Reads a trace CSV back, verifying the header and iteration ordering.
inline IterationTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty trace file", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceCsvHeader) {
    throw ParseError("unexpected trace header", 1);
  }
  IterationTrace trace;
  while (std::getline(in, line)) {
    ++line_no;
    TraceRow row{};
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%d", &row.iter,
                    &row.time_s, &row.loglik, &row.normalized_loglik,
                    &row.step_a, &row.safeguard_halvings) != 6) {
      throw ParseError("malformed trace row", line_no);
    }
    if (!trace.rows.empty()) {
      const TraceRow& prev = trace.rows.back();
      if (row.iter <= prev.iter) {
        throw ParseError("trace rows out of iteration order", line_no);
      }
      if (row.time_s < prev.time_s) {
        throw ParseError("wall-clock column decreases", line_no);
      }
      // Monotone ascent holds whenever the effective step is <= 1.
      if (row.step_a <= 1.0 &&
          row.loglik < prev.loglik - 1e-9 * std::abs(prev.loglik)) {
        throw ParseError("log-likelihood decreases at step <= 1", line_no);
      }
    }
    trace.rows.push_back(row);
  }
  return trace;
}

}  // namespace dppfit
