#pragma once

#include "sdsolve/sdpa_io.hpp"
#include "sdsolve/solver.hpp"

#include <string>
#include <vector>

namespace sdsolve::bench {

struct BenchOptions {
  double shift = 10.0;       // seconds added before taking logs
  double fail_time = 3600.0; // time charged to an unsolved instance
  bool negate_objective = false;
  solver::Params params;
};

struct BenchSummary {
  int solved_count = 0;
  double sgm = 0.0;
  std::vector<sdpa::ReportRow> rows;
};

// exp(mean(log(t + shift))) - shift; 0 for an empty list.
double shifted_geometric_mean(const std::vector<double>& times, double shift);

// Failed when any DIMACS error exceeds 1e-2 or is NaN; otherwise the solver status.
sdpa::ReportRow make_report_row(const std::string& instance, const solver::SolveResult& r);

// A row counts as solved when its status is Optimal; other rows are charged fail_time.
BenchSummary summarize(std::vector<sdpa::ReportRow> rows, const BenchOptions& opts);

// Solves every *.dat-s file under dir (sorted by name).
BenchSummary run_bench(const std::string& dir, const BenchOptions& opts);

}  // namespace sdsolve::bench
