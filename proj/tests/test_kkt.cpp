#include <doctest.h>

#include "sdsolve/kkt.hpp"
#include "sdsolve/presolve.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <set>

using namespace sdsolve;
using namespace sdsolve::kkt;

namespace {

// M_ij = tr(S^-1 A_i S^-1 A_j) from dense matrices only.
Matrix dense_oracle(const SdpProblem& p, const BlockMatrix& S) {
  Matrix M = Matrix::Zero(p.m, p.m);
  for (int k = 0; k < p.num_blocks(); ++k) {
    Matrix Sd = S[k].diagonal ? Matrix(S[k].diag.asDiagonal()) : S[k].dense;
    const Matrix Sinv = Sd.inverse();
    for (int i = 0; i < p.m; ++i) {
      const Matrix Ai = materialize(p.A[i][k]);
      const Matrix Bi = Sinv * Ai * Sinv;
      for (int j = 0; j < p.m; ++j) M(i, j) += (Bi * materialize(p.A[j][k])).trace();
    }
  }
  return M;
}

double rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace

TEST_CASE("plan_rows follows the flop table") {
  RowStats r1{1.0, 1, true, false};
  // n=100, f=1, r=1, kappa=5: M2 or M5, never M3
  std::vector<RowStats> maxcut(100, r1);
  PlanOptions opts;
  opts.kappa_mem = 5.0;
  const RowPlan plan = plan_rows(maxcut, 100, opts);
  for (Technique t : plan.technique) {
    CHECK(t != Technique::M3);
    CHECK((t == Technique::M2 || t == Technique::M5));
  }
  for (int s = 0; s < 100; ++s) {
    const double sum_f = 100 - s;
    CHECK(technique_flops(Technique::M3, r1, 100, sum_f, 5.0) > technique_flops(Technique::M2, r1, 100, sum_f, 5.0));
  }

  // full-rank dense rows: M3 beats M2 once the suffix sum is large; such rows
  // carry no eigen factor, so the plan picks M3/M4
  const int n = 30, m = 400;
  RowStats dense{static_cast<double>(n) * n, n, false, false};
  const double big_f = 100.0 * n * n;
  CHECK(technique_flops(Technique::M3, dense, n, big_f, 3.0) < technique_flops(Technique::M2, dense, n, big_f, 3.0));
  const RowPlan dplan = plan_rows(std::vector<RowStats>(m, dense), n);
  for (Technique t : dplan.technique) CHECK((t == Technique::M3 || t == Technique::M4));

  const RowPlan single = plan_rows({dense}, n);
  REQUIRE(single.sigma.size() == 1);
  CHECK(single.sigma[0] == 0);
}

TEST_CASE("plan sigma is a bijection sorted by cost") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> f(1, 400), r(1, 20);
  std::vector<RowStats> stats;
  for (int i = 0; i < 50; ++i) stats.push_back({static_cast<double>(f(rng)), r(rng), i % 2 == 0, false});
  const RowPlan plan = plan_rows(stats, 20);
  std::set<int> seen(plan.sigma.begin(), plan.sigma.end());
  CHECK(seen.size() == stats.size());
  for (std::size_t s = 1; s < plan.sigma.size(); ++s)
    CHECK(plan.predicted_flops[plan.sigma[s - 1]] >= plan.predicted_flops[plan.sigma[s]]);
  for (int i = 0; i < 50; ++i)
    if (!stats[i].has_factor) CHECK((plan.technique[i] != Technique::M1 && plan.technique[i] != Technique::M2));
}

TEST_CASE("rank-one rows with at most two nonzeros use M2") {
  RowStats s{1.0, 1, true, true};
  PlanOptions opts;
  opts.kappa_mem = 1e-3;  // would otherwise favor M5
  const RowPlan plan = plan_rows(std::vector<RowStats>(10, s), 50, opts);
  for (Technique t : plan.technique) CHECK(t == Technique::M2);
}

TEST_CASE("LP block Schur entries") {
  SdpProblem p(2, {-1});
  p.A[0][0] = CoeffMatrix::sparse(1, {{0, 0, 1.0}});
  p.A[1][0] = CoeffMatrix::sparse(1, {{0, 0, 1.0}});
  BlockMatrix S = BlockMatrix::zeros(p.blocks);
  S[0].diag(0) = 2.0;
  auto slack = factor_slack(S);
  REQUIRE(slack);
  KktData data(p);
  const SchurSystem sys = assemble_schur(data, *slack, nullptr);
  CHECK(sys.M(0, 0) == doctest::Approx(0.25));
  CHECK(sys.M(0, 1) == doctest::Approx(0.25));
}

TEST_CASE("S = I gives the Gram matrix and solve_normal recovers x") {
  std::mt19937_64 rng(8);
  const SdpProblem p = testutil::random_problem(6, {5}, rng);
  KktData data(p);
  auto slack = factor_slack(BlockMatrix::identity(p.blocks));
  const SchurSystem sys = assemble_schur(data, *slack, nullptr);
  Matrix G(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) G(i, j) = (materialize(p.A[i][0]) * materialize(p.A[j][0])).trace();
  CHECK(rel(sys.M, G) <= 1e-12);

  const Vector x = Vector::Ones(6);
  const Vector got = solve_normal(sys, sys.M * x, SolveMode::Direct);
  CHECK((got - x).norm() <= 1e-8);
  const Vector viapcg = solve_normal(sys, sys.M * x, SolveMode::PCG);
  CHECK((viapcg - x).norm() <= 1e-8);

  SchurSystem ident;
  ident.M = Matrix::Identity(3, 3);
  const Vector r = testutil::random_vector(3, rng);
  CHECK((solve_normal(ident, r) - r).norm() <= 1e-15);
}

TEST_CASE("ill-conditioned and indefinite M use the LDL path") {
  std::mt19937_64 rng(10);
  const int n = 12;
  const Matrix Q = testutil::random_orthonormal(n, n, rng);
  Vector spectrum(n);
  for (int i = 0; i < n; ++i) spectrum(i) = std::pow(10.0, -12.0 * i / (n - 1));
  spectrum(n - 1) = -1e-12;
  SchurSystem sys;
  sys.M = Q * spectrum.asDiagonal() * Q.transpose();
  const Vector b = sys.M * testutil::random_vector(n, rng);
  NormalSolver solver;
  solver.factorize(sys.M);
  CHECK(solver.used_ldl());
  const Vector x = solver.solve(b);
  CHECK((sys.M * x - b).norm() <= 1e-6 * b.norm());
}

TEST_CASE("every technique reproduces the dense oracle") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> mm(1, 25), nn(2, 14);
    const int m = mm(rng), n = nn(rng);
    SdpProblem raw = testutil::random_problem(m, {n, -3, std::max(2, n / 2)}, rng);
    const SdpProblem p = presolve::run(raw).problem;
    const BlockMatrix S = testutil::random_pd_block_matrix(p.blocks, rng);
    auto slack = factor_slack(S);
    REQUIRE(slack);
    const Matrix oracle = dense_oracle(p, S);
    KktData data(p);
    for (Technique t : {Technique::M1, Technique::M2, Technique::M3, Technique::M4, Technique::M5}) {
      AssembleOptions opts;
      opts.plan.forced = t;
      const SchurSystem sys = assemble_schur(data, *slack, nullptr, opts);
      CHECK_MESSAGE(rel(sys.M, oracle) <= 1e-10, to_string(t));
      const Matrix asym = sys.M - sys.M.transpose();
      CHECK(asym.cwiseAbs().maxCoeff() <= 1e-12 * sys.M.cwiseAbs().maxCoeff());
    }
    // default plan, serial vs parallel bitwise equal
    AssembleOptions serial;
    serial.policy = ExecPolicy::Serial;
    const SchurSystem a = assemble_schur(data, *slack, nullptr, serial);
    const SchurSystem b = assemble_schur(data, *slack, nullptr);
    CHECK((a.M - b.M).cwiseAbs().maxCoeff() == 0.0);
    CHECK(rel(a.M, oracle) <= 1e-10);
  }
}

TEST_CASE("ordering does not change M") {
  std::mt19937_64 rng(5);
  const SdpProblem p = testutil::random_problem(8, {6}, rng);
  auto slack = factor_slack(testutil::random_pd_block_matrix(p.blocks, rng));
  KktData data(p);
  auto plans = plan_all(data);
  const SchurSystem a = assemble_schur(data, *slack, nullptr, plans);
  std::reverse(plans[0].sigma.begin(), plans[0].sigma.end());
  const SchurSystem b = assemble_schur(data, *slack, nullptr, plans);
  CHECK(rel(a.M, b.M) <= 1e-13);
}

TEST_CASE("aux vectors match direct dense computation") {
  std::mt19937_64 rng(6);
  const SdpProblem p = presolve::run(testutil::random_problem(5, {4, -2}, rng)).problem;
  const BlockMatrix S = testutil::random_pd_block_matrix(p.blocks, rng);
  const BlockMatrix R = testutil::random_block_matrix(p.blocks, rng);
  auto slack = factor_slack(S);
  KktData data(p);
  const SchurSystem sys = assemble_schur(data, *slack, &R);

  Vector asinv = Vector::Zero(5), acs = Vector::Zero(5), ars = Vector::Zero(5);
  double csinv = 0, cc = 0, crs = 0, rs = 0, rr = 0;
  for (int k = 0; k < p.num_blocks(); ++k) {
    const Matrix Sd = S[k].diagonal ? Matrix(S[k].diag.asDiagonal()) : S[k].dense;
    const Matrix Rd = R[k].diagonal ? Matrix(R[k].diag.asDiagonal()) : R[k].dense;
    const Matrix Si = Sd.inverse();
    const Matrix C = materialize(p.C[k]);
    for (int i = 0; i < 5; ++i) {
      const Matrix A = materialize(p.A[i][k]);
      asinv(i) += (Si * A).trace();
      acs(i) += (A * Si * C * Si).trace();
      ars(i) += (A * Si * Rd * Si).trace();
    }
    csinv += (C * Si).trace();
    cc += (C * Si * C * Si).trace();
    crs += (C * Si * Rd * Si).trace();
    rs += (Rd * Si).trace();
    rr += (Rd * Si * Rd * Si).trace();
  }
  CHECK((sys.aux.asinv - asinv).norm() <= 1e-12 * (1 + asinv.norm()));
  CHECK((sys.aux.asinv_csinv - acs).norm() <= 1e-12 * (1 + acs.norm()));
  CHECK((sys.aux.asinv_rsinv - ars).norm() <= 1e-12 * (1 + ars.norm()));
  CHECK(sys.aux.csinv == doctest::Approx(csinv));
  CHECK(sys.aux.csinvcsinv == doctest::Approx(cc));
  CHECK(sys.aux.csinv_rsinv == doctest::Approx(crs));
  CHECK(sys.aux.rsinv == doctest::Approx(rs));
  CHECK(sys.aux.rsinv_rsinv == doctest::Approx(rr));
}

TEST_CASE("factor_slack rejects indefinite blocks") {
  BlockMatrix S = BlockMatrix::identity({2, -2});
  CHECK(factor_slack(S));
  S[1].diag(1) = -1.0;
  CHECK_FALSE(factor_slack(S));
  S = BlockMatrix::identity({2});
  S[0].dense(0, 1) = S[0].dense(1, 0) = 2.0;
  CHECK_FALSE(factor_slack(S));
}

TEST_CASE("form_m = false keeps the aux vectors and skips M") {
  std::mt19937_64 rng(17);
  const SdpProblem p = presolve::run(testutil::random_problem(6, {5, -3}, rng)).problem;
  const BlockMatrix S = testutil::random_pd_block_matrix(p.blocks, rng);
  const BlockMatrix R = testutil::random_block_matrix(p.blocks, rng);
  auto slack = factor_slack(S);
  KktData data(p);
  const SchurSystem full = assemble_schur(data, *slack, &R);
  AssembleOptions o;
  o.form_m = false;
  const SchurSystem aux_only = assemble_schur(data, *slack, &R, o);
  CHECK(aux_only.M.size() == 0);
  CHECK((aux_only.aux.asinv - full.aux.asinv).norm() <= 1e-13 * (1 + full.aux.asinv.norm()));
  CHECK((aux_only.aux.asinv_rsinv - full.aux.asinv_rsinv).norm() <= 1e-13 * (1 + full.aux.asinv_rsinv.norm()));
  CHECK((aux_only.aux.asinv_csinv - full.aux.asinv_csinv).norm() <= 1e-13 * (1 + full.aux.asinv_csinv.norm()));
  CHECK(aux_only.aux.rsinv_rsinv == doctest::Approx(full.aux.rsinv_rsinv));
  CHECK(aux_only.aux.csinv_rsinv == doctest::Approx(full.aux.csinv_rsinv));
}
