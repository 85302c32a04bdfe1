#pragma once

#include "sdsolve/model.hpp"

#include <random>
#include <vector>

namespace testutil {

using sdsolve::BlockMatrix;
using sdsolve::CoeffMatrix;
using sdsolve::Matrix;
using sdsolve::SdpProblem;
using sdsolve::Vector;

inline Vector random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

inline Matrix random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix M(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) M(i, j) = g(rng);
  return M;
}

inline Matrix random_symmetric(int n, std::mt19937_64& rng) {
  Matrix G = random_matrix(n, n, rng);
  return 0.5 * (G + G.transpose());
}

inline Matrix random_spd(int n, std::mt19937_64& rng, double shift = 0.5) {
  Matrix G = random_matrix(n, n, rng);
  return G * G.transpose() / n + shift * Matrix::Identity(n, n);
}

inline Matrix random_orthonormal(int n, int k, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(n, k, rng));
  return qr.householderQ() * Matrix::Identity(n, k);
}

inline Matrix random_sparse_symmetric(int n, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  Matrix M = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i)
      if (u(rng) < density) M(i, j) = M(j, i) = g(rng);
  return M;
}

// Mixed coefficient kinds per (row, block); diagonal blocks get random diagonals.
inline CoeffMatrix random_coefficient(int n, bool diagonal, std::mt19937_64& rng, int kind_hint = -1) {
  std::uniform_int_distribution<int> pick(0, 4);
  const int kind = kind_hint >= 0 ? kind_hint : pick(rng);
  if (diagonal) {
    std::normal_distribution<double> g;
    std::vector<sdsolve::SparseEntry> e;
    for (int i = 0; i < n; ++i)
      if (kind != 0 || i == 0) e.push_back({i, i, g(rng)});
    return CoeffMatrix::sparse(n, e);
  }
  switch (kind) {
    case 0: {
      std::uniform_int_distribution<int> idx(0, n - 1);
      const int i = idx(rng), j = idx(rng);
      std::normal_distribution<double> g;
      return CoeffMatrix::sparse(n, {{i, j, g(rng)}, {i, i, 1.0}});
    }
    case 1: return sdsolve::classify_coefficient(random_sparse_symmetric(n, 0.2, rng));
    case 2: return CoeffMatrix::dense(random_symmetric(n, rng));
    case 3: {
      Vector a = random_vector(n, rng);
      a.normalize();
      return CoeffMatrix::rank_one(n, 1.0 + std::abs(random_vector(1, rng)(0)), a);
    }
    default: {
      const int r = std::max(1, n / 3);
      return CoeffMatrix::low_rank(n, random_vector(r, rng), random_orthonormal(n, r, rng));
    }
  }
}

inline SdpProblem random_problem(int m, const std::vector<int>& blocks, std::mt19937_64& rng) {
  SdpProblem p(m, blocks);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < p.num_blocks(); ++k)
      p.A[i][k] = random_coefficient(p.block_order(k), p.is_diagonal(k), rng);
  for (int k = 0; k < p.num_blocks(); ++k)
    p.C[k] = random_coefficient(p.block_order(k), p.is_diagonal(k), rng, 2);
  p.b = random_vector(m, rng);
  return p;
}

inline BlockMatrix random_block_matrix(const std::vector<int>& blocks, std::mt19937_64& rng) {
  BlockMatrix X = BlockMatrix::zeros(blocks);
  for (auto& b : X.blocks()) {
    if (b.diagonal)
      b.diag = random_vector(b.order(), rng);
    else
      b.dense = random_symmetric(b.order(), rng);
  }
  return X;
}

inline BlockMatrix random_pd_block_matrix(const std::vector<int>& blocks, std::mt19937_64& rng) {
  BlockMatrix X = BlockMatrix::zeros(blocks);
  for (auto& b : X.blocks()) {
    if (b.diagonal)
      b.diag = random_vector(b.order(), rng).cwiseAbs().array() + 0.5;
    else
      b.dense = random_spd(b.order(), rng);
  }
  return X;
}

inline BlockMatrix dense_blocks(const SdpProblem& p, const std::vector<CoeffMatrix>& row) {
  BlockMatrix out = BlockMatrix::zeros(p.blocks);
  for (int k = 0; k < p.num_blocks(); ++k) {
    if (out[k].diagonal)
      out[k].diag = sdsolve::materialize(row[k]).diagonal();
    else
      out[k].dense = sdsolve::materialize(row[k]);
  }
  return out;
}

}  // namespace testutil
