#include <doctest.h>

#include "newton_oracle.hpp"
#include "sdsolve/generators.hpp"
#include "sdsolve/linalg.hpp"
#include "sdsolve/recovery.hpp"

#include <cmath>

using namespace sdsolve;
using namespace sdsolve::recovery;

namespace {

struct Certified {
  oracle::State st;
  kkt::SchurSystem sys;
  solver::NewtonDirections d;
  PrimalCandidate X;
};

// Random iterates whose backward Newton matrix is positive definite.
std::vector<Certified> certified_states(int count) {
  std::vector<Certified> out;
  for (std::uint64_t seed = 0; static_cast<int>(out.size()) < count && seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    Certified c;
    c.st = oracle::random_state(2 + static_cast<int>(seed % 8), {4, -3}, rng);
    c.sys = oracle::schur_at(c.st);
    c.d = solver::newton_embedding(c.st.p, c.st.it, c.sys, 1.0);
    c.X = recover_backward(c.st.p, c.st.it.slack, c.st.it.R, c.d.dy, c.d.dtau, c.st.it.mu);
    if (c.X.psd_certified) out.push_back(std::move(c));
  }
  return out;
}

SdpProblem lp1() {
  SdpProblem p(1, {-1});
  p.A[0][0] = CoeffMatrix::sparse(1, {{0, 0, 1.0}});
  p.C[0] = CoeffMatrix::sparse(1, {{0, 0, 1.0}});
  p.b = Vector::Ones(1);
  return p;
}

double rel(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

}  // namespace

TEST_CASE("backward candidate satisfies A X = b (tau + dtau)") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto st = oracle::random_state(2 + static_cast<int>(seed % 6), {5, -2}, rng);
    const auto sys = oracle::schur_at(st);
    const auto d = solver::newton_embedding(st.p, st.it, sys, 1.0);
    const auto c = recover_backward(st.p, st.it.slack, st.it.R, d.dy, d.dtau, st.it.mu);
    CHECK(c.source == Source::BackwardNewton);
    const Vector target = st.p.b * (st.it.tau + d.dtau);
    CHECK((primal_map(st.p, c.X) - target).norm() <= 1e-8 * (1.0 + target.norm()));
  }
}

TEST_CASE("certified candidates are positive semidefinite") {
  for (const auto& c : certified_states(10)) {
    const double n = c.st.p.total_order();
    CHECK(linalg::min_eigenvalue(c.X.X) >= -1e-9 * trace(c.X.X) / n);
  }
}

TEST_CASE("centered 1x1 LP: X = mu / s and A X = b tau") {
  const SdpProblem p = lp1();
  solver::DualIterate it;
  it.y = Vector::Constant(1, 0.25);
  it.tau = 1.0;
  const double s = 0.75;
  it.mu = s;  // centered: mu S^-1 = 1 = b tau
  it.slack = *kkt::factor_slack(s * BlockMatrix::identity({-1}));
  it.R = dual_slack(p, it.y, it.tau) - it.slack.S;
  const Vector zero = Vector::Zero(1);
  const auto c = recover_backward(p, it.slack, it.R, zero, 0.0, it.mu);
  CHECK(c.X[0].diag(0) == doctest::Approx(1.0));
  CHECK(primal_map(p, c.X)(0) == doctest::Approx(it.tau));
}

TEST_CASE("zbar collapses to b^T y + n mu") {
  std::mt19937_64 rng(3);
  const SdpProblem p = gen::trace_toy(4);
  kkt::Aux aux;
  aux.asinv = testutil::random_vector(1, rng);
  aux.asinv_rsinv = Vector::Zero(1);
  aux.asinv_csinv = Vector::Zero(1);
  const Vector y = Vector::Constant(1, 0.3);
  const double z = primal_bound_zbar(p, aux, y, 1.0, Vector::Zero(1), 0.0, 0.2, true);
  CHECK(z == doctest::Approx(0.3 + 4 * 0.2));
  CHECK_THROWS_AS(primal_bound_zbar(p, aux, y, 1.0, Vector::Zero(1), 0.0, 0.2, false), NotCertified);
}

TEST_CASE("zbar equals <C tau, X(mu)> / tau on certified iterates") {
  for (const auto& c : certified_states(10)) {
    const auto& it = c.st.it;
    const double z = primal_bound_zbar(c.st.p, c.sys.aux, it.y, it.tau, c.d.dy, c.d.dtau, it.mu, true);
    const double ref = objective_dot(c.st.p, it.tau * c.X.X) / it.tau;
    CHECK(rel(z, ref) <= 1e-9);
  }
}

TEST_CASE("1x1 LP: zbar matches the explicit X(mu)") {
  const SdpProblem p = lp1();
  solver::DualIterate it;
  it.y = Vector::Constant(1, 0.25);
  it.tau = 1.0;
  it.mu = 0.5;
  it.slack = *kkt::factor_slack(0.75 * BlockMatrix::identity({-1}));
  it.R = dual_slack(p, it.y, it.tau) - it.slack.S;
  kkt::KktData data(p);
  const auto sys = kkt::assemble_schur(data, it.slack, &it.R);
  const auto d = solver::newton_embedding(p, it, sys, 1.0);
  const auto c = recover_backward(p, it.slack, it.R, d.dy, d.dtau, it.mu);
  REQUIRE(c.psd_certified);
  // scalar: X = mu (s - R + dy - dtau) / s^2
  const double x = it.mu * (0.75 - it.R[0].diag(0) + d.dy(0) - d.dtau) / (0.75 * 0.75);
  CHECK(c.X[0].diag(0) == doctest::Approx(x));
  CHECK(primal_bound_zbar(p, sys.aux, it.y, it.tau, d.dy, d.dtau, it.mu, true) == doctest::Approx(x));
}

TEST_CASE("zprime collapses to mu n + tau b^T y") {
  const SdpProblem p = gen::trace_toy(3);
  kkt::Aux aux;
  aux.asinv = Vector::Ones(1);
  aux.asinv_rsinv = Vector::Zero(1);
  const Vector y = Vector::Constant(1, -0.5);
  const double z = primal_bound_zprime(p, aux, y, 2.0, Vector::Zero(1), Vector::Zero(1), 0.1);
  CHECK(z == doctest::Approx(0.1 * 3 + 2.0 * -0.5));
}

TEST_CASE("zprime equals <C tau, X'(mu)> and A X' = b tau") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    auto st = oracle::random_state(2 + static_cast<int>(seed % 7), {4, -3}, rng);
    const auto sys = oracle::schur_at(st);
    const auto d = solver::newton_embedding(st.p, st.it, sys, 1.0);
    const auto c = recover_projection(st.p, st.it.slack, d.dy1, d.dy2, st.it.tau, st.it.mu);
    CHECK(c.source == Source::Projection);
    const double z = primal_bound_zprime(st.p, sys.aux, st.it.y, st.it.tau, d.dy1, d.dy2, st.it.mu);
    CHECK(rel(z, st.it.tau * objective_dot(st.p, c.X)) <= 1e-9);
    const Vector target = st.p.b * st.it.tau;
    CHECK((primal_map(st.p, c.X) - target).norm() <= 1e-8 * (1.0 + target.norm()));
  }
}

TEST_CASE("1x1 LP: projection solution by hand") {
  const SdpProblem p = lp1();
  const double s = 0.5, mu = 0.2, tau = 1.5;
  const auto slack = *kkt::factor_slack(s * BlockMatrix::identity({-1}));
  // M = 1/s^2, dy1 = s^2, dy2 = s, dy' = tau s^2 / mu - s, X' = mu (s + dy') / s^2 = tau
  const auto c = recover_projection(p, slack, Vector::Constant(1, s * s), Vector::Constant(1, s), tau, mu);
  CHECK(c.X[0].diag(0) == doctest::Approx(tau));
  CHECK(c.psd_certified);
}

TEST_CASE("DIMACS errors of the exact trace-toy pair vanish") {
  const SdpProblem p = gen::trace_toy(3);
  BlockMatrix X = BlockMatrix::identity({3});
  X *= 1.0 / 3.0;
  const Vector y = Vector::Ones(1);
  const BlockMatrix S = BlockMatrix::zeros({3});
  for (double e : dimacs_errors(p, &X, y, S)) CHECK(std::abs(e) <= 1e-12);
}

TEST_CASE("DIMACS errors at y = 0, S = C") {
  // min <I, X> s.t. tr X = 1; C = I is feasible with y = 0
  const SdpProblem p = gen::trace_toy(2);
  BlockMatrix X = BlockMatrix::identity({2});
  X *= 0.5;
  const Vector y = Vector::Zero(1);
  const BlockMatrix S = objective_matrix(p);
  const auto e = dimacs_errors(p, &X, y, S);
  CHECK(e[2] == 0.0);
  CHECK(e[3] == 0.0);
  CHECK(e[4] == doctest::Approx((1.0 - 0.0) / (1.0 + 1.0 + 0.0)));
  CHECK(e[5] == doctest::Approx(1.0 / 2.0));
}

TEST_CASE("DIMACS errors without X mark the primal entries NaN") {
  const SdpProblem p = gen::trace_toy(2);
  const auto e = dimacs_errors(p, nullptr, Vector::Zero(1), objective_matrix(p));
  CHECK(std::isnan(e[0]));
  CHECK(std::isnan(e[1]));
  CHECK(std::isnan(e[4]));
  CHECK(std::isnan(e[5]));
  CHECK(e[2] == 0.0);
}

TEST_CASE("DIMACS errors measure negative eigenvalues and residuals") {
  const SdpProblem p = gen::trace_toy(2);
  BlockMatrix X = BlockMatrix::identity({2});
  X[0].dense(1, 1) = -0.5;  // tr X = 0.5, lambda_min = -0.5
  BlockMatrix S = BlockMatrix::identity({2});
  S[0].dense(0, 0) = -1.0;
  const auto e = dimacs_errors(p, &X, Vector::Zero(1), S);
  CHECK(e[0] == doctest::Approx(0.5 / 2.0));
  CHECK(e[1] == doctest::Approx(0.5 / 2.0));
  CHECK(e[3] == doctest::Approx(1.0 / 2.0));
  CHECK(e[2] == doctest::Approx(2.0 / 2.0));  // ||S - C||_F = 2
}

TEST_CASE("dual ray verification") {
  CHECK_FALSE(verify_dual_ray(lp1(), Vector::Zero(1)));

  // max y s.t. y + s = -1 on an LP block: dy = 1 gives A^T dy = 1, not <= 0
  SdpProblem lp = lp1();
  lp.C[0] = CoeffMatrix::sparse(1, {{0, 0, -1.0}});
  CHECK_FALSE(verify_dual_ray(lp, Vector::Ones(1)));

  // Farkas: tr X = -1 has no X >= 0; dy = -1 has b^T dy = 1 and -A^T dy = I >= 0
  SdpProblem farkas = gen::trace_toy(2);
  farkas.b = -Vector::Ones(1);
  CHECK(verify_dual_ray(farkas, -Vector::Ones(1)));
  CHECK(verify_dual_ray(farkas, -3.0 * Vector::Ones(1)));
  CHECK_FALSE(verify_dual_ray(farkas, Vector::Ones(1)));
}

TEST_CASE("solver iterates on a Farkas instance yield a certified ray") {
  SdpProblem farkas = gen::trace_toy(3);
  farkas.b = -Vector::Ones(1);
  const auto r = solver::solve(farkas);
  CHECK(r.status == solver::Status::PrimalInfeasibleDualUnbounded);
  CHECK(verify_dual_ray(farkas, r.y));
}

TEST_CASE("primal ray verification") {
  // min -X_22 s.t. X_11 = 1: e2 e2^T is an improving ray
  SdpProblem p(1, {2});
  p.A[0][0] = CoeffMatrix::sparse(2, {{0, 0, 1.0}});
  p.C[0] = CoeffMatrix::sparse(2, {{1, 1, -1.0}});
  p.b = Vector::Ones(1);
  BlockMatrix X = BlockMatrix::zeros({2});
  X[0].dense(1, 1) = 5.0;
  CHECK(verify_primal_ray(p, X));
  X[0].dense(0, 0) = 1.0;  // A X != 0
  CHECK_FALSE(verify_primal_ray(p, X));
  X = BlockMatrix::zeros({2});
  X[0].dense(1, 1) = -1.0;  // not PSD and not improving
  CHECK_FALSE(verify_primal_ray(p, X));
  CHECK_FALSE(verify_primal_ray(p, BlockMatrix::zeros({2})));
}
