#include "sdsolve/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace sdsolve {

const char* to_string(CoeffKind kind) {
  switch (kind) {
    case CoeffKind::Zero: return "Zero";
    case CoeffKind::SparseSym: return "SparseSym";
    case CoeffKind::DenseSym: return "DenseSym";
    case CoeffKind::RankOne: return "RankOne";
    case CoeffKind::LowRank: return "LowRank";
  }
  return "?";
}

namespace {

std::size_t full_count(const std::vector<SparseEntry>& e) {
  std::size_t n = 0;
  for (const auto& x : e) n += (x.row == x.col) ? 1 : 2;
  return n;
}

}  // namespace

CoeffMatrix CoeffMatrix::zero(int dim) {
  CoeffMatrix c;
  c.dim_ = dim;
  return c;
}

CoeffMatrix CoeffMatrix::sparse(int dim, std::vector<SparseEntry> entries) {
  std::map<std::pair<int, int>, double> acc;
  for (auto e : entries) {
    if (e.row > e.col) std::swap(e.row, e.col);
    if (e.row < 0 || e.col >= dim) throw DimensionMismatch("sparse entry outside block");
    acc[{e.col, e.row}] += e.value;  // column-major order
  }
  CoeffMatrix c;
  c.dim_ = dim;
  for (const auto& [key, v] : acc) {
    if (v != 0.0) c.entries_.push_back({key.second, key.first, v});
  }
  if (c.entries_.empty()) return zero(dim);
  c.kind_ = CoeffKind::SparseSym;
  c.nnz_ = full_count(c.entries_);
  return c;
}

CoeffMatrix CoeffMatrix::dense(int dim, std::vector<double> packed_upper) {
  if (packed_upper.size() != static_cast<std::size_t>(dim) * (dim + 1) / 2)
    throw DimensionMismatch("packed dense coefficient has wrong length");
  CoeffMatrix c;
  c.dim_ = dim;
  c.kind_ = CoeffKind::DenseSym;
  c.packed_ = std::move(packed_upper);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i <= j; ++i)
      if (c.packed_[packed_index(i, j)] != 0.0) c.nnz_ += (i == j) ? 1 : 2;
  return c;
}

CoeffMatrix CoeffMatrix::dense(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  std::vector<double> packed(static_cast<std::size_t>(n) * (n + 1) / 2);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) packed[packed_index(i, j)] = m(i, j);
  return dense(n, std::move(packed));
}

CoeffMatrix CoeffMatrix::rank_one(int dim, double lambda, const Vector& a) {
  return low_rank(dim, Vector::Constant(1, lambda), a);
}

CoeffMatrix CoeffMatrix::low_rank(int dim, const Vector& lambdas, const Matrix& vectors) {
  if (vectors.rows() != dim || vectors.cols() != lambdas.size())
    throw DimensionMismatch("low-rank factor shape");
  if (lambdas.size() > dim) throw DimensionMismatch("rank exceeds order");
  CoeffMatrix c;
  c.dim_ = dim;
  c.kind_ = lambdas.size() == 1 ? CoeffKind::RankOne : CoeffKind::LowRank;
  c.lambdas_ = lambdas;
  c.vectors_ = vectors;
  if (lambdas.size() == 0) return zero(dim);
  c.nnz_ = full_count(c.to_entries());
  return c;
}

int CoeffMatrix::rank() const {
  switch (kind_) {
    case CoeffKind::Zero: return 0;
    case CoeffKind::RankOne:
    case CoeffKind::LowRank: return static_cast<int>(lambdas_.size());
    default: return dim_;
  }
}

std::size_t CoeffMatrix::nnz() const { return nnz_; }

Matrix CoeffMatrix::to_dense() const {
  Matrix M = Matrix::Zero(dim_, dim_);
  add_to(M, 1.0);
  return M;
}

std::vector<SparseEntry> CoeffMatrix::to_entries() const {
  switch (kind_) {
    case CoeffKind::Zero: return {};
    case CoeffKind::SparseSym: return entries_;
    case CoeffKind::DenseSym: {
      std::vector<SparseEntry> out;
      for (int j = 0; j < dim_; ++j)
        for (int i = 0; i <= j; ++i)
          if (double v = packed_[packed_index(i, j)]; v != 0.0) out.push_back({i, j, v});
      return out;
    }
    default: {
      // only the support of the factor vectors can be nonzero
      std::vector<int> support;
      for (int p = 0; p < dim_; ++p)
        if (vectors_.row(p).cwiseAbs().maxCoeff() != 0.0) support.push_back(p);
      std::vector<SparseEntry> out;
      for (std::size_t jj = 0; jj < support.size(); ++jj)
        for (std::size_t ii = 0; ii <= jj; ++ii) {
          const int i = support[ii], j = support[jj];
          double v = 0.0;
          for (Eigen::Index r = 0; r < lambdas_.size(); ++r) v += lambdas_(r) * vectors_(i, r) * vectors_(j, r);
          if (v != 0.0) out.push_back({i, j, v});
        }
      return out;
    }
  }
}

double CoeffMatrix::dot(const Matrix& X) const {
  switch (kind_) {
    case CoeffKind::Zero: return 0.0;
    case CoeffKind::SparseSym: {
      double s = 0.0;
      for (const auto& e : entries_) s += (e.row == e.col ? 1.0 : 2.0) * e.value * X(e.row, e.col);
      return s;
    }
    case CoeffKind::DenseSym: {
      double s = 0.0;
      for (int j = 0; j < dim_; ++j) {
        const double* col = X.col(j).data();
        const double* pk = packed_.data() + packed_index(0, j);
        for (int i = 0; i < j; ++i) s += 2.0 * pk[i] * col[i];
        s += pk[j] * col[j];
      }
      return s;
    }
    default: {
      double s = 0.0;
      for (Eigen::Index r = 0; r < lambdas_.size(); ++r)
        s += lambdas_(r) * vectors_.col(r).dot(X.selfadjointView<Eigen::Upper>() * vectors_.col(r));
      return s;
    }
  }
}

double CoeffMatrix::dot_diag(const Vector& x) const {
  double s = 0.0;
  switch (kind_) {
    case CoeffKind::Zero: return 0.0;
    case CoeffKind::SparseSym:
      for (const auto& e : entries_)
        if (e.row == e.col) s += e.value * x(e.row);
      return s;
    case CoeffKind::DenseSym:
      for (int j = 0; j < dim_; ++j) s += packed_[packed_index(j, j)] * x(j);
      return s;
    default:
      for (Eigen::Index r = 0; r < lambdas_.size(); ++r)
        s += lambdas_(r) * vectors_.col(r).cwiseAbs2().dot(x);
      return s;
  }
}

void CoeffMatrix::add_to(Matrix& X, double alpha) const {
  switch (kind_) {
    case CoeffKind::Zero: return;
    case CoeffKind::SparseSym:
      for (const auto& e : entries_) {
        X(e.row, e.col) += alpha * e.value;
        if (e.row != e.col) X(e.col, e.row) += alpha * e.value;
      }
      return;
    case CoeffKind::DenseSym:
      for (int j = 0; j < dim_; ++j)
        for (int i = 0; i <= j; ++i) {
          const double v = alpha * packed_[packed_index(i, j)];
          X(i, j) += v;
          if (i != j) X(j, i) += v;
        }
      return;
    default:
      for (Eigen::Index r = 0; r < lambdas_.size(); ++r)
        X.noalias() += (alpha * lambdas_(r)) * vectors_.col(r) * vectors_.col(r).transpose();
      return;
  }
}

void CoeffMatrix::add_to_diag(Vector& x, double alpha) const {
  switch (kind_) {
    case CoeffKind::Zero: return;
    case CoeffKind::SparseSym:
      for (const auto& e : entries_)
        if (e.row == e.col) x(e.row) += alpha * e.value;
      return;
    case CoeffKind::DenseSym:
      for (int j = 0; j < dim_; ++j) x(j) += alpha * packed_[packed_index(j, j)];
      return;
    default:
      for (Eigen::Index r = 0; r < lambdas_.size(); ++r)
        x += (alpha * lambdas_(r)) * vectors_.col(r).cwiseAbs2();
      return;
  }
}

double CoeffMatrix::frobenius_norm() const {
  double s = 0.0;
  for (const auto& e : to_entries()) s += (e.row == e.col ? 1.0 : 2.0) * e.value * e.value;
  return std::sqrt(s);
}

double CoeffMatrix::max_abs() const {
  double s = 0.0;
  for (const auto& e : to_entries()) s = std::max(s, std::abs(e.value));
  return s;
}

CoeffMatrix CoeffMatrix::scaled(double alpha) const {
  CoeffMatrix c = *this;
  if (alpha == 0.0) return zero(dim_);
  for (auto& e : c.entries_) e.value *= alpha;
  for (auto& v : c.packed_) v *= alpha;
  c.lambdas_ *= alpha;
  return c;
}

CoeffMatrix classify_coefficient(const Matrix& M, double sparsity_threshold) {
  const int n = static_cast<int>(M.rows());
  if (M.cols() != n) throw DimensionMismatch("coefficient is not square");
  const double scale = n > 0 ? M.cwiseAbs().maxCoeff() : 0.0;
  if (n > 0 && (M - M.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale)
    throw NonSymmetric("coefficient matrix is not symmetric");
  if (scale == 0.0) return CoeffMatrix::zero(n);

  std::vector<SparseEntry> entries;
  std::size_t nnz = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i)
      if (M(i, j) != 0.0) {
        entries.push_back({i, j, M(i, j)});
        nnz += (i == j) ? 1 : 2;
      }
  const double fraction = static_cast<double>(nnz) / (static_cast<double>(n) * n);
  if (fraction < sparsity_threshold) return CoeffMatrix::sparse(n, std::move(entries));
  return CoeffMatrix::dense(M);
}

Matrix materialize(const CoeffMatrix& c) { return c.to_dense(); }

BlockMatrix BlockMatrix::zeros(const std::vector<int>& block_sizes) {
  std::vector<Block> blocks;
  blocks.reserve(block_sizes.size());
  for (int s : block_sizes) {
    Block b;
    b.diagonal = s < 0;
    if (b.diagonal)
      b.diag = Vector::Zero(-s);
    else
      b.dense = Matrix::Zero(s, s);
    blocks.push_back(std::move(b));
  }
  return BlockMatrix(std::move(blocks));
}

BlockMatrix BlockMatrix::identity(const std::vector<int>& block_sizes) {
  BlockMatrix I = zeros(block_sizes);
  I.add_identity(1.0);
  return I;
}

BlockMatrix& BlockMatrix::operator+=(const BlockMatrix& o) {
  axpy(1.0, o);
  return *this;
}

BlockMatrix& BlockMatrix::operator-=(const BlockMatrix& o) {
  axpy(-1.0, o);
  return *this;
}

BlockMatrix& BlockMatrix::operator*=(double a) {
  for (auto& b : blocks_) {
    if (b.diagonal)
      b.diag *= a;
    else
      b.dense *= a;
  }
  return *this;
}

void BlockMatrix::axpy(double a, const BlockMatrix& x) {
  if (x.size() != size()) throw DimensionMismatch("block count");
  for (std::size_t k = 0; k < size(); ++k) {
    if (blocks_[k].diagonal)
      blocks_[k].diag += a * x[k].diag;
    else
      blocks_[k].dense += a * x[k].dense;
  }
}

void BlockMatrix::add_identity(double a) {
  for (auto& b : blocks_) {
    if (b.diagonal)
      b.diag.array() += a;
    else
      b.dense.diagonal().array() += a;
  }
}

BlockMatrix operator+(BlockMatrix a, const BlockMatrix& b) { return a += b; }
BlockMatrix operator-(BlockMatrix a, const BlockMatrix& b) { return a -= b; }
BlockMatrix operator*(double s, BlockMatrix a) { return a *= s; }

double inner(const BlockMatrix& a, const BlockMatrix& b) {
  if (a.size() != b.size()) throw DimensionMismatch("block count");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].diagonal)
      s += a[k].diag.dot(b[k].diag);
    else
      s += a[k].dense.cwiseProduct(b[k].dense).sum();
  }
  return s;
}

double frobenius_norm(const BlockMatrix& a) { return std::sqrt(inner(a, a)); }

double max_abs(const BlockMatrix& a) {
  double s = 0.0;
  for (const auto& b : a.blocks()) {
    if (b.order() == 0) continue;
    s = std::max(s, b.diagonal ? b.diag.cwiseAbs().maxCoeff() : b.dense.cwiseAbs().maxCoeff());
  }
  return s;
}

double trace(const BlockMatrix& a) {
  double s = 0.0;
  for (const auto& b : a.blocks()) s += b.diagonal ? b.diag.sum() : b.dense.trace();
  return s;
}

int total_order(const BlockMatrix& a) {
  int n = 0;
  for (const auto& b : a.blocks()) n += b.order();
  return n;
}

SdpProblem::SdpProblem(int m_, std::vector<int> block_sizes) : m(m_), blocks(std::move(block_sizes)) {
  A.assign(m, {});
  for (auto& row : A)
    for (int k = 0; k < num_blocks(); ++k) row.push_back(CoeffMatrix::zero(block_order(k)));
  for (int k = 0; k < num_blocks(); ++k) C.push_back(CoeffMatrix::zero(block_order(k)));
  b = Vector::Zero(m);
}

int SdpProblem::total_order() const {
  int n = 0;
  for (int k = 0; k < num_blocks(); ++k) n += block_order(k);
  return n;
}

namespace {

void check_coeff(const SdpProblem& p, const CoeffMatrix& c, int k, const char* what) {
  if (c.dim() != p.block_order(k))
    throw DimensionMismatch(std::string(what) + " dimension does not match block " + std::to_string(k + 1));
  if (p.is_diagonal(k)) {
    for (const auto& e : c.to_entries())
      if (e.row != e.col)
        throw DimensionMismatch(std::string(what) + " has off-diagonal entries in diagonal block " +
                                std::to_string(k + 1));
  }
}

}  // namespace

void SdpProblem::validate() const {
  if (m < 0) throw DimensionMismatch("negative constraint count");
  if (b.size() != m) throw DimensionMismatch("b length differs from m");
  if (static_cast<int>(A.size()) != m) throw DimensionMismatch("A row count differs from m");
  if (static_cast<int>(C.size()) != num_blocks()) throw DimensionMismatch("C block count");
  for (int k = 0; k < num_blocks(); ++k) {
    if (blocks[k] == 0) throw DimensionMismatch("zero block order");
    check_coeff(*this, C[k], k, "C");
  }
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(A[i].size()) != num_blocks()) throw DimensionMismatch("A block count");
    for (int k = 0; k < num_blocks(); ++k) check_coeff(*this, A[i][k], k, "A");
  }
  if (dual_bounds) {
    if (dual_bounds->first.size() != m || dual_bounds->second.size() != m)
      throw DimensionMismatch("dual bound length differs from m");
  }
}

namespace {

void check_shape(const SdpProblem& p, const BlockMatrix& X) {
  if (static_cast<int>(X.size()) != p.num_blocks()) throw DimensionMismatch("block count");
  for (int k = 0; k < p.num_blocks(); ++k)
    if (X[k].diagonal != p.is_diagonal(k) || X[k].order() != p.block_order(k))
      throw DimensionMismatch("block " + std::to_string(k + 1) + " shape");
}

}  // namespace

Vector primal_map(const SdpProblem& p, const BlockMatrix& X) {
  check_shape(p, X);
  Vector out(p.m);
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < p.m; ++i) {
    double s = 0.0;
    for (int k = 0; k < p.num_blocks(); ++k) {
      const auto& a = p.A[i][k];
      if (a.is_zero()) continue;
      s += X[k].diagonal ? a.dot_diag(X[k].diag) : a.dot(X[k].dense);
    }
    out(i) = s;
  }
  return out;
}

BlockMatrix adjoint_map(const SdpProblem& p, const Vector& y) {
  if (y.size() != p.m) throw DimensionMismatch("y length differs from m");
  BlockMatrix out = BlockMatrix::zeros(p.blocks);
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < p.num_blocks(); ++k) {
    for (int i = 0; i < p.m; ++i) {
      const auto& a = p.A[i][k];
      if (a.is_zero() || y(i) == 0.0) continue;
      if (out[k].diagonal)
        a.add_to_diag(out[k].diag, y(i));
      else
        a.add_to(out[k].dense, y(i));
    }
  }
  return out;
}

BlockMatrix objective_matrix(const SdpProblem& p) {
  BlockMatrix out = BlockMatrix::zeros(p.blocks);
  for (int k = 0; k < p.num_blocks(); ++k) {
    if (out[k].diagonal)
      p.C[k].add_to_diag(out[k].diag, 1.0);
    else
      p.C[k].add_to(out[k].dense, 1.0);
  }
  return out;
}

BlockMatrix dual_slack(const SdpProblem& p, const Vector& y, double tau) {
  BlockMatrix S = objective_matrix(p);
  S *= tau;
  S -= adjoint_map(p, y);
  return S;
}

double objective_dot(const SdpProblem& p, const BlockMatrix& X) {
  check_shape(p, X);
  double s = 0.0;
  for (int k = 0; k < p.num_blocks(); ++k)
    s += X[k].diagonal ? p.C[k].dot_diag(X[k].diag) : p.C[k].dot(X[k].dense);
  return s;
}

double objective_norm(const SdpProblem& p) {
  double s = 0.0;
  for (const auto& c : p.C) {
    const double f = c.frobenius_norm();
    s += f * f;
  }
  return std::sqrt(s);
}

double objective_max_abs(const SdpProblem& p) {
  double s = 0.0;
  for (const auto& c : p.C) s = std::max(s, c.max_abs());
  return s;
}

}  // namespace sdsolve
