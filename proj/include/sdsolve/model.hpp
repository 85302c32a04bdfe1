#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sdsolve {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonSymmetric : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// 0-based, row <= col
struct SparseEntry {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

enum class CoeffKind { Zero, SparseSym, DenseSym, RankOne, LowRank };

const char* to_string(CoeffKind kind);

class CoeffMatrix {
 public:
  CoeffMatrix() = default;

  static CoeffMatrix zero(int dim);
  // Lower-triangle input is mirrored, duplicates are summed, exact zeros dropped.
  static CoeffMatrix sparse(int dim, std::vector<SparseEntry> entries);
  // Packed upper triangle, column by column: (0,0) (0,1) (1,1) (0,2) ...
  static CoeffMatrix dense(int dim, std::vector<double> packed_upper);
  static CoeffMatrix dense(const Matrix& m);
  static CoeffMatrix rank_one(int dim, double lambda, const Vector& a);
  static CoeffMatrix low_rank(int dim, const Vector& lambdas, const Matrix& vectors);

  CoeffKind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool is_zero() const { return kind_ == CoeffKind::Zero; }

  const std::vector<SparseEntry>& entries() const { return entries_; }
  const std::vector<double>& packed() const { return packed_; }
  const Vector& eigenvalues() const { return lambdas_; }
  const Matrix& eigenvectors() const { return vectors_; }

  // r_i; full order when no factorization is known
  int rank() const;
  // f_i: structural nonzeros of the full symmetric matrix
  std::size_t nnz() const;

  Matrix to_dense() const;
  // upper-triangle nonzeros of the represented matrix
  std::vector<SparseEntry> to_entries() const;

  double dot(const Matrix& X) const;
  double dot_diag(const Vector& x) const;
  void add_to(Matrix& X, double alpha) const;
  void add_to_diag(Vector& x, double alpha) const;

  double frobenius_norm() const;
  double max_abs() const;
  CoeffMatrix scaled(double alpha) const;

 private:
  CoeffKind kind_ = CoeffKind::Zero;
  int dim_ = 0;
  std::vector<SparseEntry> entries_;
  std::vector<double> packed_;
  Vector lambdas_;
  Matrix vectors_;
  std::size_t nnz_ = 0;
};

inline std::size_t packed_index(int i, int j) {
  if (i > j) std::swap(i, j);
  return static_cast<std::size_t>(j) * (j + 1) / 2 + i;
}

CoeffMatrix classify_coefficient(const Matrix& M, double sparsity_threshold = 0.25);
Matrix materialize(const CoeffMatrix& c);

// Dense storage for SDP blocks, vector storage for diagonal blocks.
struct Block {
  bool diagonal = false;
  Matrix dense;
  Vector diag;

  int order() const { return diagonal ? static_cast<int>(diag.size()) : static_cast<int>(dense.rows()); }
};

class BlockMatrix {
 public:
  BlockMatrix() = default;
  explicit BlockMatrix(std::vector<Block> blocks) : blocks_(std::move(blocks)) {}

  static BlockMatrix zeros(const std::vector<int>& block_sizes);
  static BlockMatrix identity(const std::vector<int>& block_sizes);

  std::size_t size() const { return blocks_.size(); }
  Block& operator[](std::size_t k) { return blocks_[k]; }
  const Block& operator[](std::size_t k) const { return blocks_[k]; }
  std::vector<Block>& blocks() { return blocks_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  BlockMatrix& operator+=(const BlockMatrix& o);
  BlockMatrix& operator-=(const BlockMatrix& o);
  BlockMatrix& operator*=(double a);
  // this += a * x
  void axpy(double a, const BlockMatrix& x);
  void add_identity(double a);

 private:
  std::vector<Block> blocks_;
};

BlockMatrix operator+(BlockMatrix a, const BlockMatrix& b);
BlockMatrix operator-(BlockMatrix a, const BlockMatrix& b);
BlockMatrix operator*(double s, BlockMatrix a);

double inner(const BlockMatrix& a, const BlockMatrix& b);
double frobenius_norm(const BlockMatrix& a);
double max_abs(const BlockMatrix& a);
double trace(const BlockMatrix& a);
int total_order(const BlockMatrix& a);

struct SdpProblem {
  int m = 0;
  std::vector<int> blocks;
  std::vector<std::vector<CoeffMatrix>> A;  // A[i][k]
  std::vector<CoeffMatrix> C;
  Vector b;
  std::optional<std::pair<Vector, Vector>> dual_bounds;

  SdpProblem() = default;
  // Zero-filled problem of the given shape.
  SdpProblem(int m, std::vector<int> block_sizes);

  int num_blocks() const { return static_cast<int>(blocks.size()); }
  int block_order(int k) const { return blocks[k] < 0 ? -blocks[k] : blocks[k]; }
  bool is_diagonal(int k) const { return blocks[k] < 0; }
  int total_order() const;

  void validate() const;
};

Vector primal_map(const SdpProblem& p, const BlockMatrix& X);
BlockMatrix adjoint_map(const SdpProblem& p, const Vector& y);
BlockMatrix objective_matrix(const SdpProblem& p);
// C*tau - A^T y
BlockMatrix dual_slack(const SdpProblem& p, const Vector& y, double tau = 1.0);
double objective_dot(const SdpProblem& p, const BlockMatrix& X);
double objective_norm(const SdpProblem& p);
double objective_max_abs(const SdpProblem& p);

}  // namespace sdsolve
