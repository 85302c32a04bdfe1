#include "sdsolve/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace sdsolve::linalg {

SingularMatrix::SingularMatrix(int index)
    : std::runtime_error("matrix is singular at pivot " + std::to_string(index)), index_(index) {}

namespace {

constexpr int kBlock = 64;

// Unblocked left-looking factorization of A(k:k+b, k:k+b); returns failing global index or -1.
int factor_diagonal_block(Matrix& A, int k, int b, double tol) {
  for (int j = k; j < k + b; ++j) {
    const int left = j - k;
    double d = A(j, j);
    if (left > 0) d -= A.row(j).segment(k, left).squaredNorm();
    if (!(d > tol)) return j;
    const double ljj = std::sqrt(d);
    A(j, j) = ljj;
    const int below = k + b - j - 1;
    if (below > 0) {
      if (left > 0)
        A.col(j).segment(j + 1, below).noalias() -=
            A.block(j + 1, k, below, left) * A.row(j).segment(k, left).transpose();
      A.col(j).segment(j + 1, below) /= ljj;
    }
  }
  return -1;
}

}  // namespace

std::optional<FactorHandle> try_cholesky(const Matrix& S, double pivot_tol, NotPositiveDefinite* failure) {
  const int n = static_cast<int>(S.rows());
  FactorHandle h;
  h.kind_ = FactorKind::Cholesky;
  if (n == 0) {
    h.L_ = Matrix(0, 0);
    h.source_ = S;
    return h;
  }
  const double dmax = S.diagonal().maxCoeff();
  const double tol = pivot_tol * std::max(dmax, 0.0);
  Matrix A = S;
  for (int k = 0; k < n; k += kBlock) {
    const int b = std::min(kBlock, n - k);
    const int bad = factor_diagonal_block(A, k, b, tol);
    if (bad >= 0) {
      if (failure) failure->pivot = bad + 1;
      return std::nullopt;
    }
    const int rest = n - k - b;
    if (rest > 0) {
      auto L11 = A.block(k, k, b, b);
      auto A21 = A.block(k + b, k, rest, b);
      L11.transpose().triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(A21);
      A.block(k + b, k + b, rest, rest).selfadjointView<Eigen::Lower>().rankUpdate(A21, -1.0);
    }
  }
  h.L_ = A.triangularView<Eigen::Lower>();
  h.source_ = S;
  return h;
}

CholeskyResult cholesky(const Matrix& S, double pivot_tol) {
  CholeskyResult r;
  r.factor = try_cholesky(S, pivot_tol, &r.failure);
  return r;
}

bool is_positive_definite(const Matrix& S, double pivot_tol) {
  return try_cholesky(S, pivot_tol, nullptr).has_value();
}

Vector FactorHandle::lower_solve(const Vector& v) const { return L_.triangularView<Eigen::Lower>().solve(v); }

Vector FactorHandle::upper_solve(const Vector& v) const {
  return L_.transpose().triangularView<Eigen::Upper>().solve(v);
}

Matrix FactorHandle::solve(const Matrix& rhs) const {
  if (kind_ == FactorKind::Cholesky) {
    Matrix z = L_.triangularView<Eigen::Lower>().solve(rhs);
    L_.transpose().triangularView<Eigen::Upper>().solveInPlace(z);
    return z;
  }
  const int n = dim();
  Matrix out(rhs.rows(), rhs.cols());
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
    Vector z(n);
    for (int i = 0; i < n; ++i) z(i) = rhs(perm_[i], c);
    L_.triangularView<Eigen::UnitLower>().solveInPlace(z);
    for (int k = 0; k < n;) {
      if (k + 1 < n && d_sub_(k) != 0.0) {
        const double a = d_diag_(k), b = d_sub_(k), d = d_diag_(k + 1);
        const double det = a * d - b * b;
        const double z0 = z(k), z1 = z(k + 1);
        z(k) = (d * z0 - b * z1) / det;
        z(k + 1) = (a * z1 - b * z0) / det;
        k += 2;
      } else {
        z(k) /= d_diag_(k);
        k += 1;
      }
    }
    L_.transpose().triangularView<Eigen::UnitUpper>().solveInPlace(z);
    for (int i = 0; i < n; ++i) out(perm_[i], c) = z(i);
  }
  return out;
}

Vector FactorHandle::solve(const Vector& rhs) const {
  Matrix r = rhs;
  return solve(r).col(0);
}

Matrix FactorHandle::inverse() const {
  const int n = dim();
  if (kind_ == FactorKind::Cholesky) {
    Matrix Linv = L_.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
    Matrix inv = Matrix::Zero(n, n);
    inv.selfadjointView<Eigen::Lower>().rankUpdate(Linv.transpose());
    inv.triangularView<Eigen::StrictlyUpper>() = inv.transpose();
    return inv;
  }
  return solve(Matrix(Matrix::Identity(n, n)));
}

FactorHandle ldl_factor(const Matrix& M) {
  const int n = static_cast<int>(M.rows());
  const double alpha = (1.0 + std::sqrt(17.0)) / 8.0;
  Matrix A = M;
  Matrix L = Matrix::Identity(n, n);
  Vector D = Vector::Zero(n), sub = Vector::Zero(n);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  const double tol = n > 0 ? 1e-14 * M.cwiseAbs().maxCoeff() : 0.0;

  auto swap_sym = [&](int i, int j, int k) {
    if (i == j) return;
    A.row(i).swap(A.row(j));
    A.col(i).swap(A.col(j));
    if (k > 0) L.row(i).head(k).swap(L.row(j).head(k));
    std::swap(perm[i], perm[j]);
  };

  int k = 0;
  while (k < n) {
    const double absakk = std::abs(A(k, k));
    int imax = k;
    double colmax = 0.0;
    if (k + 1 < n) {
      Eigen::Index idx;
      colmax = A.col(k).tail(n - k - 1).cwiseAbs().maxCoeff(&idx);
      imax = k + 1 + static_cast<int>(idx);
    }
    if (std::max(absakk, colmax) <= tol) throw SingularMatrix(k + 1);

    int kp = k, step = 1;
    if (absakk < alpha * colmax) {
      double rowmax = 0.0;
      for (int j = k; j < n; ++j)
        if (j != imax) rowmax = std::max(rowmax, std::abs(A(imax, j)));
      if (absakk >= alpha * colmax * (colmax / rowmax)) {
        kp = k;
      } else if (std::abs(A(imax, imax)) >= alpha * rowmax) {
        kp = imax;
      } else {
        kp = imax;
        step = 2;
      }
    }
    const int kk = k + step - 1;
    swap_sym(kk, kp, k);

    const int rest = n - k - step;
    if (step == 1) {
      const double d = A(k, k);
      D(k) = d;
      if (rest > 0) {
        Vector l = A.col(k).tail(rest) / d;
        A.bottomRightCorner(rest, rest).noalias() -= d * l * l.transpose();
        L.col(k).tail(rest) = l;
      }
    } else {
      const double a = A(k, k), b = A(k + 1, k), c = A(k + 1, k + 1);
      const double det = a * c - b * b;
      if (std::abs(det) <= tol * tol) throw SingularMatrix(k + 1);
      D(k) = a;
      D(k + 1) = c;
      sub(k) = b;
      if (rest > 0) {
        Matrix W = A.block(k + 2, k, rest, 2);
        Eigen::Matrix2d Dinv;
        Dinv << c / det, -b / det, -b / det, a / det;
        Matrix Lk = W * Dinv;
        A.bottomRightCorner(rest, rest).noalias() -= Lk * W.transpose();
        L.block(k + 2, k, rest, 2) = Lk;
      }
    }
    k += step;
  }

  FactorHandle h;
  h.kind_ = FactorKind::LDL;
  h.L_ = std::move(L);
  h.source_ = M;
  h.perm_ = std::move(perm);
  h.d_diag_ = D;
  h.d_sub_ = sub;
  return h;
}

Vector ldl_solve(const Matrix& M, const Vector& rhs) {
  const FactorHandle h = ldl_factor(M);
  Vector x = h.solve(rhs);
  // one step of refinement
  const Vector r = rhs - M * x;
  x += h.solve(r);
  return x;
}

double logdet(const FactorHandle& factor) {
  if (factor.kind() != FactorKind::Cholesky) throw std::invalid_argument("logdet requires a Cholesky factor");
  return 2.0 * factor.lower().diagonal().array().log().sum();
}

namespace {

// Smallest Ritz value of op by restarted Lanczos with full reorthogonalization.
double lanczos_smallest(const Operator& op, int n, const LanczosOptions& opts) {
  if (n == 0) return kInfinity;
  std::mt19937_64 rng(20240917ULL + static_cast<unsigned long long>(n));
  std::normal_distribution<double> normal;
  Vector start(n);
  for (int i = 0; i < n; ++i) start(i) = normal(rng);
  start.normalize();

  const int kmax = std::min(opts.max_iters, n);
  double theta = kInfinity;
  Matrix Q(n, kmax + 1);
  Vector w(n);
  for (int restart = 0; restart <= opts.max_restarts; ++restart) {
    Vector alpha(kmax), beta(kmax);
    Q.col(0) = start;
    int steps = 0;
    bool done = false;
    Vector ritz_vec;
    for (int j = 0; j < kmax; ++j) {
      op(Q.col(j), w);
      alpha(j) = Q.col(j).dot(w);
      w -= alpha(j) * Q.col(j);
      if (j > 0) w -= beta(j - 1) * Q.col(j - 1);
      for (int pass = 0; pass < 2; ++pass) {
        const Vector h = Q.leftCols(j + 1).transpose() * w;
        w.noalias() -= Q.leftCols(j + 1) * h;
      }
      beta(j) = w.norm();
      steps = j + 1;

      Eigen::SelfAdjointEigenSolver<Matrix> tri;
      if (steps == 1) {
        theta = alpha(0);
        ritz_vec = Vector::Ones(1);
      } else {
        Vector diag = alpha.head(steps);
        Vector off = beta.head(steps - 1);
        tri.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
        theta = tri.eigenvalues()(0);
        ritz_vec = tri.eigenvectors().col(0);
      }
      const double scale = std::max(std::abs(alpha.head(steps).maxCoeff()), std::abs(alpha.head(steps).minCoeff()));
      const double resid = std::abs(beta(j) * ritz_vec(steps - 1));
      const double invariant = 1e-14 * std::max(scale, std::abs(theta));
      if (steps == n || beta(j) <= invariant ||
          resid <= opts.tol * std::max(std::abs(theta), 1e-8 * scale)) {
        done = true;
        break;
      }
      Q.col(j + 1) = w / beta(j);
    }
    if (done) return theta;
    start = Q.leftCols(steps) * ritz_vec;
    start.normalize();
  }
  return theta;
}

bool certify(const FactorHandle& S_factor, const Matrix& dS, double a) {
  if (!std::isfinite(a)) return false;
  return is_positive_definite(S_factor.source() + a * dS, 0.0);
}

}  // namespace

double lanczos_min_eigenvalue(const FactorHandle& S_factor, const Matrix& dS, const LanczosOptions& opts) {
  const int n = S_factor.dim();
  const Matrix& L = S_factor.lower();
  Operator op = [&](const Vector& in, Vector& out) {
    Vector t = L.transpose().triangularView<Eigen::Upper>().solve(in);
    t = dS * t;
    out = L.triangularView<Eigen::Lower>().solve(t);
  };
  return lanczos_smallest(op, n, opts);
}

double max_step_lanczos(const FactorHandle& S_factor, const Matrix& dS, double tol) {
  LanczosOptions opts;
  opts.tol = tol;
  return max_step_lanczos(S_factor, dS, opts);
}

double max_step_lanczos(const FactorHandle& S_factor, const Matrix& dS, const LanczosOptions& opts) {
  if (S_factor.dim() == 0) return kInfinity;
  const double lambda = lanczos_min_eigenvalue(S_factor, dS, opts);
  if (!(lambda < 0.0)) return kInfinity;
  const double alpha = -1.0 / lambda;
  if (certify(S_factor, dS, opts.certify_fraction * alpha)) return alpha;

  // Lanczos overestimated the step: bisect on trial factorizations.
  double lo = 0.0, hi = opts.certify_fraction * alpha;
  for (int it = 0; it < opts.max_bisections; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (certify(S_factor, dS, mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

double max_step_diagonal(const Vector& s, const Vector& ds) {
  double a = kInfinity;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (ds(i) < 0.0) a = std::min(a, -s(i) / ds(i));
  return a;
}

PcgResult pcg_solve(const Operator& apply_M, const Vector& rhs, const PcgState& state, const Vector* x0) {
  const Eigen::Index n = rhs.size();
  auto precondition = [&](const Vector& r) -> Vector {
    if (state.kind == Preconditioner::CholeskyReuse && state.factor) return state.factor->solve(r);
    if (state.diagonal.size() == n) return r.cwiseQuotient(state.diagonal);
    return r;
  };

  PcgResult res;
  res.x = x0 ? *x0 : Vector::Zero(n);
  Vector Mx(n), Mp(n);
  Vector r = rhs;
  if (x0) {
    apply_M(res.x, Mx);
    r -= Mx;
  }
  const double tol = std::max(1e-10, 1e-8 * rhs.norm());
  Vector z = precondition(r);
  Vector p = z;
  double rz = r.dot(z);
  const int max_iters = std::max(1, state.max_iters);
  int it = 0;
  while (r.norm() > tol && it < max_iters) {
    apply_M(p, Mp);
    const double pMp = p.dot(Mp);
    if (!(pMp > 0.0)) throw PcgBreakdown();
    const double a = rz / pMp;
    res.x += a * p;
    r -= a * Mp;
    ++it;
    z = precondition(r);
    if (state.restart && state.restart_every > 0 && it % state.restart_every == 0) {
      apply_M(res.x, Mx);
      r = rhs - Mx;
      z = precondition(r);
      p = z;
      rz = r.dot(z);
      continue;
    }
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  res.iterations = it;
  res.residual_norm = r.norm();
  res.converged = res.residual_norm <= tol;
  return res;
}

Vector sym_eigenvalues(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double min_eigenvalue(const Matrix& S, int dense_limit) {
  const int n = static_cast<int>(S.rows());
  if (n == 0) return kInfinity;
  if (n <= dense_limit) return sym_eigenvalues(S)(0);
  Operator op = [&](const Vector& in, Vector& out) { out = S * in; };
  LanczosOptions opts;
  opts.max_iters = std::min(n, 200);
  return lanczos_smallest(op, n, opts);
}

double min_eigenvalue(const BlockMatrix& S, int dense_limit) {
  double lo = kInfinity;
  for (const auto& b : S.blocks()) {
    if (b.order() == 0) continue;
    lo = std::min(lo, b.diagonal ? b.diag.minCoeff() : min_eigenvalue(b.dense, dense_limit));
  }
  return lo;
}

}  // namespace sdsolve::linalg
