#include <doctest.h>

#include "sdsolve/model.hpp"
#include "test_util.hpp"

using namespace sdsolve;

TEST_CASE("classify_coefficient picks the cheapest representation") {
  CHECK(classify_coefficient(Matrix::Zero(3, 3)).kind() == CoeffKind::Zero);

  Matrix e1 = Matrix::Zero(3, 3);
  e1(0, 0) = 1.0;
  const CoeffMatrix c = classify_coefficient(e1);
  REQUIRE(c.kind() == CoeffKind::SparseSym);
  REQUIRE(c.entries().size() == 1);
  CHECK(c.entries()[0].row == 0);
  CHECK(c.entries()[0].col == 0);
  CHECK(c.entries()[0].value == 1.0);

  std::mt19937_64 rng(3);
  Matrix d = testutil::random_symmetric(5, rng);
  d = d.unaryExpr([](double v) { return v == 0.0 ? 0.5 : v; });
  CHECK(classify_coefficient(d, 0.4).kind() == CoeffKind::DenseSym);

  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 1) = 1.0;
  CHECK_THROWS_AS(classify_coefficient(bad), NonSymmetric);
}

TEST_CASE("classification round trip is idempotent") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 7;
    Matrix M = testutil::random_sparse_symmetric(n, 0.3, rng);
    const CoeffMatrix c = classify_coefficient(M);
    const Matrix once = materialize(c);
    CHECK((once - M).cwiseAbs().maxCoeff() == 0.0);
    const Matrix twice = materialize(classify_coefficient(once));
    CHECK((twice - once).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("low-rank materialization reproduces the matrix") {
  std::mt19937_64 rng(5);
  const int n = 6;
  Matrix Q = testutil::random_orthonormal(n, 3, rng);
  Vector lam(3);
  lam << 2.0, -1.0, 0.5;
  const CoeffMatrix c = CoeffMatrix::low_rank(n, lam, Q);
  const Matrix oracle = Q * lam.asDiagonal() * Q.transpose();
  CHECK((materialize(c) - oracle).norm() <= 1e-12 * oracle.norm());
  CHECK(c.rank() == 3);
  CHECK(c.kind() == CoeffKind::LowRank);
}

TEST_CASE("sparse constructor mirrors lower entries and sums duplicates") {
  const CoeffMatrix c = CoeffMatrix::sparse(3, {{2, 0, 1.0}, {0, 2, 2.0}, {1, 1, 0.0}});
  REQUIRE(c.entries().size() == 1);
  CHECK(c.entries()[0].row == 0);
  CHECK(c.entries()[0].col == 2);
  CHECK(c.entries()[0].value == 3.0);
  CHECK(c.nnz() == 2);
}

TEST_CASE("primal_map small cases") {
  SdpProblem p(1, {2});
  p.A[0][0] = CoeffMatrix::dense(Matrix::Identity(2, 2));
  BlockMatrix X = BlockMatrix::identity(p.blocks);
  CHECK(primal_map(p, X)(0) == doctest::Approx(2.0));

  SdpProblem q(1, {3});
  q.A[0][0] = CoeffMatrix::sparse(3, {{0, 0, 1.0}});
  BlockMatrix Y = BlockMatrix::zeros(q.blocks);
  Y[0].dense(0, 0) = 5.0;
  CHECK(primal_map(q, Y)(0) == doctest::Approx(5.0));
}

TEST_CASE("primal_map matches a brute-force double loop") {
  std::mt19937_64 rng(17);
  const SdpProblem p = testutil::random_problem(3, {4}, rng);
  const BlockMatrix X = testutil::random_block_matrix(p.blocks, rng);
  const Vector got = primal_map(p, X);
  for (int i = 0; i < p.m; ++i) {
    const Matrix A = materialize(p.A[i][0]);
    double s = 0.0;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) s += A(r, c) * X[0].dense(r, c);
    CHECK(got(i) == doctest::Approx(s).epsilon(1e-13));
  }
}

TEST_CASE("adjoint_map") {
  SdpProblem p(1, {2});
  p.A[0][0] = CoeffMatrix::dense(Matrix::Identity(2, 2));
  CHECK(frobenius_norm(adjoint_map(p, Vector::Zero(1))) == 0.0);
  const BlockMatrix Y = adjoint_map(p, Vector::Constant(1, 2.0));
  CHECK((Y[0].dense - 2.0 * Matrix::Identity(2, 2)).norm() == 0.0);

  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const SdpProblem q = testutil::random_problem(4, {3, -2}, rng);
    const BlockMatrix X = testutil::random_block_matrix(q.blocks, rng);
    const Vector y = testutil::random_vector(4, rng);
    const double lhs = inner(adjoint_map(q, y), X);
    const double rhs = y.dot(primal_map(q, X));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST_CASE("validate rejects shape errors") {
  SdpProblem p(2, {2});
  p.b = Vector::Zero(3);
  CHECK_THROWS_AS(p.validate(), DimensionMismatch);
  SdpProblem q(1, {-2});
  q.A[0][0] = CoeffMatrix::sparse(2, {{0, 1, 1.0}});
  CHECK_THROWS_AS(q.validate(), DimensionMismatch);
  SdpProblem r(1, {2});
  CHECK_THROWS_AS(primal_map(r, BlockMatrix::zeros({3})), DimensionMismatch);
}
