#pragma once

#include "sdsolve/model.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace sdsolve::linalg {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct NotPositiveDefinite {
  int pivot = 0;  // 1-based
};

class SingularMatrix : public std::runtime_error {
 public:
  explicit SingularMatrix(int index);
  int index() const { return index_; }

 private:
  int index_;
};

class PcgBreakdown : public std::runtime_error {
 public:
  PcgBreakdown() : std::runtime_error("conjugate gradient breakdown: operator is not positive definite") {}
};

enum class FactorKind { Cholesky, LDL };

class FactorHandle {
 public:
  FactorKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(L_.rows()); }

  // Cholesky: S = L L^T.  LDL: P S P^T = L D L^T, D block diagonal with 1x1/2x2 blocks.
  const Matrix& lower() const { return L_; }
  const Matrix& source() const { return source_; }

  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;
  Matrix inverse() const;
  // Cholesky only: L^{-1} v and L^{-T} v
  Vector lower_solve(const Vector& v) const;
  Vector upper_solve(const Vector& v) const;

 private:
  friend std::optional<FactorHandle> try_cholesky(const Matrix&, double, NotPositiveDefinite*);
  friend FactorHandle ldl_factor(const Matrix&);

  FactorKind kind_ = FactorKind::Cholesky;
  Matrix L_;
  Matrix source_;
  // LDL payload
  std::vector<int> perm_;
  Vector d_diag_;
  Vector d_sub_;  // d_sub_(k) != 0 marks a 2x2 pivot at (k, k+1)
};

struct CholeskyResult {
  std::optional<FactorHandle> factor;
  NotPositiveDefinite failure;

  explicit operator bool() const { return factor.has_value(); }
  const FactorHandle& operator*() const { return *factor; }
  const FactorHandle* operator->() const { return &*factor; }
};

// pivot_tol is relative to the largest diagonal entry of S.
CholeskyResult cholesky(const Matrix& S, double pivot_tol = 1e-13);
std::optional<FactorHandle> try_cholesky(const Matrix& S, double pivot_tol, NotPositiveDefinite* failure);
bool is_positive_definite(const Matrix& S, double pivot_tol = 1e-13);

// Bunch-Kaufman symmetric indefinite factorization; throws SingularMatrix.
FactorHandle ldl_factor(const Matrix& M);
Vector ldl_solve(const Matrix& M, const Vector& rhs);

double logdet(const FactorHandle& factor);

struct LanczosOptions {
  int max_iters = 64;
  double tol = 1e-10;
  int max_restarts = 8;
  int max_bisections = 40;
  double certify_fraction = 0.95;
};

// Smallest eigenvalue of L^{-1} dS L^{-T}.
double lanczos_min_eigenvalue(const FactorHandle& S_factor, const Matrix& dS, const LanczosOptions& opts = {});
// sup{alpha >= 0 : S + alpha dS >= 0}, kInfinity when dS does not leave the cone.
double max_step_lanczos(const FactorHandle& S_factor, const Matrix& dS, double tol = 1e-10);
double max_step_lanczos(const FactorHandle& S_factor, const Matrix& dS, const LanczosOptions& opts);
// Exact ratio test for a diagonal block.
double max_step_diagonal(const Vector& s, const Vector& ds);

enum class Preconditioner { Diagonal, CholeskyReuse };

struct PcgState {
  Preconditioner kind = Preconditioner::CholeskyReuse;
  std::optional<FactorHandle> factor;
  Vector diagonal;
  int max_iters = 50;
  bool restart = true;
  int restart_every = 50;
};

struct PcgResult {
  Vector x;
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
};

using Operator = std::function<void(const Vector& in, Vector& out)>;

// Throws PcgBreakdown when p^T M p <= 0.
PcgResult pcg_solve(const Operator& apply_M, const Vector& rhs, const PcgState& state,
                    const Vector* x0 = nullptr);

Vector sym_eigenvalues(const Matrix& S);
// Dense eigensolve up to dense_limit, Lanczos beyond.
double min_eigenvalue(const Matrix& S, int dense_limit = 400);
double min_eigenvalue(const BlockMatrix& S, int dense_limit = 400);

}  // namespace sdsolve::linalg
