#include "sdsolve/generators.hpp"

#include <random>
#include <string>
#include <vector>

namespace sdsolve::gen {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidSize(what);
}

std::vector<SparseEntry> upper_entries(const Matrix& M, double scale) {
  std::vector<SparseEntry> out;
  for (int j = 0; j < M.cols(); ++j)
    for (int i = 0; i <= j; ++i)
      if (M(i, j) != 0.0) out.push_back({i, j, scale * M(i, j)});
  return out;
}

}  // namespace

Matrix random_laplacian(int n, double prob, std::uint64_t seed) {
  require(n >= 2, "graph needs at least 2 nodes");
  require(prob > 0.0 && prob <= 1.0, "edge probability must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix L = Matrix::Zero(n, n);
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i)
      if (u(rng) < prob) {
        L(i, j) = L(j, i) = -1.0;
        L(i, i) += 1.0;
        L(j, j) += 1.0;
      }
  return L;
}

SdpProblem maxcut(const Matrix& L) {
  const int n = static_cast<int>(L.rows());
  require(n >= 1 && L.cols() == n, "Laplacian must be square");
  SdpProblem p(n, {n});
  for (int i = 0; i < n; ++i) p.A[i][0] = CoeffMatrix::sparse(n, {{i, i, 1.0}});
  p.C[0] = CoeffMatrix::sparse(n, upper_entries(L, -0.25));
  p.b = Vector::Ones(n);
  return p;
}

SdpProblem maxcut(int n, double prob, std::uint64_t seed) { return maxcut(random_laplacian(n, prob, seed)); }

double gpp_default_beta(int n, int k) {
  require(n >= 2 && k >= 2 && k <= n, "gpp needs 2 <= k <= n");
  const double lo = (static_cast<double>(n) / k - 1.0) / (n - 1.0);
  const double s = 0.5 * (lo + 1.0);
  return n + (static_cast<double>(n) * n - n) * s;
}

SdpProblem gpp(const Matrix& L, int k, double beta) {
  const int n = static_cast<int>(L.rows());
  require(n >= 2 && L.cols() == n, "Laplacian must be square with n >= 2");
  require(k >= 1, "k must be positive");
  const int pairs = n * (n - 1) / 2;
  const int m = n + 1 + n + 1 + pairs;
  const int z = n;  // index of the lifting row/column
  SdpProblem p(m, {n + 1, -pairs});

  int row = 0;
  for (int i = 0; i < n; ++i, ++row) p.A[row][0] = CoeffMatrix::sparse(n + 1, {{i, i, 1.0}});
  {
    std::vector<SparseEntry> ones;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i) ones.push_back({i, j, 1.0});
    p.A[row][0] = CoeffMatrix::sparse(n + 1, ones);
    p.b(row++) = beta;
  }
  for (int i = 0; i < n; ++i, ++row) {
    p.A[row][0] = CoeffMatrix::sparse(n + 1, {{i, z, 0.5}});
    p.b(row) = 1.0;
  }
  p.A[row][0] = CoeffMatrix::sparse(n + 1, {{z, z, 1.0}});
  p.b(row++) = k;
  int w = 0;
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i, ++w, ++row) {
      p.A[row][0] = CoeffMatrix::sparse(n + 1, {{i, j, 0.5}});
      p.A[row][1] = CoeffMatrix::sparse(pairs, {{w, w, -1.0}});
      p.b(row) = 0.0;
    }
  for (int i = 0; i < n; ++i) p.b(i) = 1.0;

  Matrix Lz = Matrix::Zero(n + 1, n + 1);
  Lz.topLeftCorner(n, n) = L;
  p.C[0] = CoeffMatrix::sparse(n + 1, upper_entries(Lz, 0.5));
  return p;
}

SdpProblem gpp(int n, int k, double prob, std::uint64_t seed, std::optional<double> beta) {
  return gpp(random_laplacian(n, prob, seed), k, beta ? *beta : gpp_default_beta(n, k));
}

SdpProblem diagprecond(const Matrix& B) {
  const int n = static_cast<int>(B.rows());
  require(n >= 1 && B.cols() == n, "B must be square");
  SdpProblem p(n + 1, {n, n});
  for (int i = 0; i < n; ++i) {
    p.A[i][0] = CoeffMatrix::sparse(n, {{i, i, 1.0}});
    p.A[i][1] = CoeffMatrix::sparse(n, {{i, i, -1.0}});
  }
  p.A[n][1] = CoeffMatrix::sparse(n, upper_entries(B, 1.0));
  p.C[0] = CoeffMatrix::sparse(n, upper_entries(B, 1.0));
  p.b = Vector::Zero(n + 1);
  p.b(n) = 1.0;
  return p;
}

Matrix random_spd_matrix(int n, double prob, std::uint64_t seed, bool diagonal) {
  require(n >= 1, "B needs n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix B = Matrix::Zero(n, n);
  if (diagonal) {
    for (int i = 0; i < n; ++i) B(i, i) = 0.5 + 9.5 * u(rng);
    return B;
  }
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i)
      if (u(rng) < prob) B(i, j) = B(j, i) = 2.0 * u(rng) - 1.0;
  // diagonal dominance makes B positive definite
  for (int i = 0; i < n; ++i) B(i, i) = B.row(i).cwiseAbs().sum() + 0.1 + u(rng);
  return B;
}

SdpProblem trace_toy(int n) {
  require(n >= 1, "order must be positive");
  SdpProblem p(1, {n});
  std::vector<SparseEntry> id;
  for (int i = 0; i < n; ++i) id.push_back({i, i, 1.0});
  p.A[0][0] = CoeffMatrix::sparse(n, id);
  p.C[0] = CoeffMatrix::sparse(n, id);
  p.b = Vector::Ones(1);
  return p;
}

}  // namespace sdsolve::gen
