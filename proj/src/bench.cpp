#include "sdsolve/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace sdsolve::bench {

double shifted_geometric_mean(const std::vector<double>& times, double shift) {
  if (times.empty()) return 0.0;
  double acc = 0.0;
  for (double t : times) acc += std::log(t + shift);
  return std::exp(acc / static_cast<double>(times.size())) - shift;
}

sdpa::ReportRow make_report_row(const std::string& instance, const solver::SolveResult& r) {
  sdpa::ReportRow row;
  row.instance = instance;
  row.errors = r.errors;
  row.time_seconds = r.timings.total;
  row.status = solver::to_string(r.status);
  if (r.status == solver::Status::Optimal) {
    for (double e : r.errors)
      if (!(std::abs(e) <= 1e-2)) row.status = "Failed";
  }
  return row;
}

BenchSummary summarize(std::vector<sdpa::ReportRow> rows, const BenchOptions& opts) {
  BenchSummary s;
  std::vector<double> times;
  for (const auto& row : rows) {
    const bool solved = row.status == "Optimal";
    if (solved) ++s.solved_count;
    times.push_back(solved ? row.time_seconds : opts.fail_time);
  }
  s.sgm = shifted_geometric_mean(times, opts.shift);
  s.rows = std::move(rows);
  return s;
}

BenchSummary run_bench(const std::string& dir, const BenchOptions& opts) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > 6 && name.ends_with(".dat-s")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<sdpa::ReportRow> rows;
  sdpa::ParseOptions popts;
  popts.negate_objective = opts.negate_objective;
  for (const auto& f : files) {
    const std::string name = f.stem().string();
    try {
      const SdpProblem p = sdpa::read_sdpa_file(f.string(), popts);
      rows.push_back(make_report_row(name, solver::solve(p, opts.params)));
    } catch (const sdpa::ParseError& e) {
      sdpa::ReportRow row;
      row.instance = name;
      row.errors.fill(1.0);
      row.status = "ParseError";
      rows.push_back(row);
    }
  }
  return summarize(std::move(rows), opts);
}

}  // namespace sdsolve::bench
