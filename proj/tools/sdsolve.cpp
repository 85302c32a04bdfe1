#include "sdsolve/bench.hpp"
#include "sdsolve/generators.hpp"
#include "sdsolve/sdpa_io.hpp"
#include "sdsolve/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace sdsolve;

constexpr int kExitOptimal = 0;
constexpr int kExitFailed = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitParse = 64;

struct Common {
  std::vector<std::string> params;
  double time_limit = -1.0;
  int threads = 0;
  bool negate = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--param", c.params, "Override a solver parameter, KEY=VALUE (repeatable)");
  app->add_option("--time-limit", c.time_limit, "Wall-clock limit per solve in seconds");
  app->add_option("--threads", c.threads, "OpenMP threads (default: SDSOLVE_THREADS or all cores)");
  app->add_flag("--negate-objective", c.negate, "Read F0 as -C (SDPLIB max-form files)");
}

solver::Params build_params(const Common& c) {
  solver::Params p;
  for (const auto& kv : c.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected KEY=VALUE, got '" + kv + "'");
    solver::set_param(p, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.time_limit > 0.0) p.time_limit_seconds = c.time_limit;
  p.validate();
  return p;
}

void apply_threads(const Common& c) {
  int t = c.threads;
  if (t <= 0) {
    if (const char* env = std::getenv("SDSOLVE_THREADS")) t = std::atoi(env);
  }
  if (t > 0) omp_set_num_threads(t);
}

nlohmann::json result_json(const std::string& instance, const solver::SolveResult& r) {
  nlohmann::json j;
  j["instance"] = instance;
  j["status"] = solver::to_string(r.status);
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  j["primal_objective"] = num(r.primal_objective);
  j["dual_objective"] = num(r.dual_objective);
  nlohmann::json errs = nlohmann::json::array();
  for (double e : r.errors) errs.push_back(num(e));
  j["dimacs_errors"] = errs;
  j["psd_certified"] = r.psd_certified;
  j["iterations"] = {{"phase_a", r.phase_a_iterations}, {"phase_b", r.phase_b_iterations}};
  j["seconds"] = {{"presolve", r.timings.presolve},
                  {"phase_a", r.timings.phase_a},
                  {"phase_b", r.timings.phase_b},
                  {"total", r.timings.total}};
  j["structures"] = r.structures;
  j["y"] = std::vector<double>(r.y.data(), r.y.data() + r.y.size());
  return j;
}

int exit_code(const solver::SolveResult& r) {
  if (r.status == solver::Status::Optimal) return kExitOptimal;
  if (solver::is_infeasibility(r.status)) return kExitInfeasible;
  return kExitFailed;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int cmd_solve(const std::string& path, const Common& c, const std::string& json_path, const std::string& csv_path) {
  apply_threads(c);
  const solver::Params params = build_params(c);
  SdpProblem p;
  try {
    sdpa::ParseOptions po;
    po.negate_objective = c.negate;
    p = sdpa::read_sdpa_file(path, po);
  } catch (const sdpa::ParseError& e) {
    std::fprintf(stderr, "%s: %s\n", path.c_str(), e.what());
    return kExitParse;
  }
  const solver::SolveResult r = solver::solve(p, params);
  std::printf("status      %s\n", solver::to_string(r.status));
  std::printf("b'y         %.10e\n", r.dual_objective);
  std::printf("<C,X>       %.10e\n", r.primal_objective);
  std::printf("errors      ");
  for (double e : r.errors) std::printf(" %.2e", e);
  std::printf("\niterations  %d + %d\n", r.phase_a_iterations, r.phase_b_iterations);
  std::printf("seconds     %.3f\n", r.timings.total);

  const std::string name = std::filesystem::path(path).stem().string();
  if (!json_path.empty()) write_text(json_path, result_json(name, r).dump(2) + "\n");
  if (!csv_path.empty()) write_text(csv_path, sdpa::write_report({bench::make_report_row(name, r)}));
  return exit_code(r);
}

struct GenArgs {
  std::string family;
  int n = 20;
  double prob = 0.5;
  std::uint64_t seed = 1;
  int k = 2;
  std::optional<double> beta;
  bool diagonal = false;
  std::string output;
};

int cmd_gen(const GenArgs& g) {
  SdpProblem p;
  try {
    if (g.family == "maxcut") {
      p = gen::maxcut(g.n, g.prob, g.seed);
    } else if (g.family == "gpp") {
      p = gen::gpp(g.n, g.k, g.prob, g.seed, g.beta);
    } else {
      p = gen::diagprecond(gen::random_spd_matrix(g.n, g.prob, g.seed, g.diagonal));
    }
  } catch (const gen::InvalidSize& e) {
    std::fprintf(stderr, "invalid size: %s\n", e.what());
    return kExitFailed;
  }
  const std::string text = sdpa::write_sdpa(p);
  if (g.output.empty() || g.output == "-")
    std::cout << text;
  else
    write_text(g.output, text);
  return 0;
}

int cmd_bench(const std::string& dir, const Common& c, double shift, double fail_time, const std::string& csv_path,
              const std::string& json_path) {
  apply_threads(c);
  bench::BenchOptions o;
  o.params = build_params(c);
  o.shift = shift;
  o.fail_time = fail_time;
  o.negate_objective = c.negate;
  const bench::BenchSummary s = bench::run_bench(dir, o);
  const std::string csv = sdpa::write_report(s.rows);
  std::cout << csv;
  std::printf("solved %d/%zu  sgm %.4f s\n", s.solved_count, s.rows.size(), s.sgm);
  if (!csv_path.empty()) write_text(csv_path, csv);
  if (!json_path.empty()) {
    nlohmann::json j;
    j["solved_count"] = s.solved_count;
    j["instances"] = s.rows.size();
    j["sgm"] = s.sgm;
    j["shift"] = shift;
    j["fail_time"] = fail_time;
    write_text(json_path, j.dump(2) + "\n");
  }
  return s.solved_count == static_cast<int>(s.rows.size()) ? kExitOptimal : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-scaling SDP solver"};
  app.require_subcommand(1);

  Common solve_common, bench_common;
  std::string solve_path, solve_json, solve_csv;
  auto* solve = app.add_subcommand("solve", "Solve an SDPA sparse file");
  solve->add_option("file", solve_path, "Input .dat-s file")->required();
  solve->add_option("--json", solve_json, "Write the result as JSON");
  solve->add_option("--csv", solve_csv, "Write a one-row report CSV");
  add_common(solve, solve_common);

  GenArgs g;
  auto* genc = app.add_subcommand("gen", "Generate a test instance in SDPA format");
  genc->add_option("family", g.family, "maxcut | gpp | diagprecond")
      ->required()
      ->check(CLI::IsMember({"maxcut", "gpp", "diagprecond"}));
  genc->add_option("-n,--n", g.n, "Graph or matrix order");
  genc->add_option("--prob", g.prob, "Edge probability or density of B");
  genc->add_option("--seed", g.seed, "Random seed");
  genc->add_option("-k,--k", g.k, "gpp: number of parts");
  genc->add_option("--beta", g.beta, "gpp: right-hand side of <11^T, X> = beta");
  genc->add_flag("--diagonal", g.diagonal, "diagprecond: diagonal B");
  genc->add_option("-o,--output", g.output, "Output path (default stdout)");

  std::string bench_dir, bench_csv, bench_json;
  double shift = 10.0, fail_time = 3600.0;
  auto* benchc = app.add_subcommand("bench", "Solve every .dat-s file in a directory");
  benchc->add_option("dir", bench_dir, "Directory of .dat-s files")->required()->check(CLI::ExistingDirectory);
  benchc->add_option("--shift", shift, "Shift of the geometric mean in seconds");
  benchc->add_option("--fail-time", fail_time, "Seconds charged to unsolved instances");
  benchc->add_option("--csv", bench_csv, "Write the report CSV");
  benchc->add_option("--json", bench_json, "Write the summary as JSON");
  add_common(benchc, bench_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*solve) return cmd_solve(solve_path, solve_common, solve_json, solve_csv);
    if (*genc) return cmd_gen(g);
    return cmd_bench(bench_dir, bench_common, shift, fail_time, bench_csv, bench_json);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailed;
  }
}
