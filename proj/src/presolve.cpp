#include "sdsolve/presolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace sdsolve::presolve {

namespace {

std::vector<int> support_rows(const std::vector<SparseEntry>& entries) {
  std::vector<int> rows;
  for (const auto& e : entries) {
    rows.push_back(e.row);
    rows.push_back(e.col);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

Matrix gather_core(const std::vector<SparseEntry>& entries, const std::vector<int>& rows) {
  const int k = static_cast<int>(rows.size());
  Matrix G = Matrix::Zero(k, k);
  auto local = [&](int r) { return static_cast<int>(std::lower_bound(rows.begin(), rows.end(), r) - rows.begin()); };
  for (const auto& e : entries) {
    const int a = local(e.row), b = local(e.col);
    G(a, b) = e.value;
    G(b, a) = e.value;
  }
  return G;
}

Matrix scatter_columns(const Matrix& core_vectors, const std::vector<int>& rows, int dim) {
  Matrix V = Matrix::Zero(dim, core_vectors.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) V.row(rows[r]) = core_vectors.row(static_cast<Eigen::Index>(r));
  return V;
}

}  // namespace

std::optional<RankOne> detect_rank_one(const CoeffMatrix& M, double tol) {
  if (M.is_zero()) return std::nullopt;
  if (M.kind() == CoeffKind::RankOne) return RankOne{M.eigenvalues()(0), M.eigenvectors().col(0)};
  if (M.kind() == CoeffKind::LowRank) return std::nullopt;

  const auto entries = M.to_entries();
  const auto rows = support_rows(entries);
  const Matrix G = gather_core(entries, rows);

  Eigen::Index p;
  const double dmax = G.diagonal().cwiseAbs().maxCoeff(&p);
  if (dmax == 0.0) return std::nullopt;
  const double d = G(p, p);
  const Vector u = G.col(p);
  const double residual = (G - u * u.transpose() / d).norm();
  if (residual > tol * G.norm()) return std::nullopt;

  // scale so the first nonzero is 1, then normalize
  Eigen::Index first = 0;
  while (u(first) == 0.0) ++first;
  Vector a_core = u / u(first);
  const double lambda = a_core.squaredNorm() * u(first) * u(first) / d;
  a_core.normalize();

  RankOne out;
  out.lambda = lambda;
  out.a = scatter_columns(a_core, rows, M.dim()).col(0);
  return out;
}

EigenPairs gather_permute_eig(const CoeffMatrix& M) {
  EigenPairs out;
  const auto entries = M.to_entries();
  if (entries.empty()) {
    out.values.resize(0);
    out.vectors.resize(M.dim(), 0);
    return out;
  }
  const auto rows = support_rows(entries);
  const Matrix G = gather_core(entries, rows);
  Eigen::SelfAdjointEigenSolver<Matrix> es(G);
  out.values = es.eigenvalues();
  out.vectors = scatter_columns(es.eigenvectors(), rows, M.dim());
  return out;
}

std::optional<CoeffMatrix> detect_low_rank(const CoeffMatrix& M, double tol, int dense_skip_order,
                                           int few_entry_threshold) {
  if (M.is_zero() || M.kind() == CoeffKind::RankOne) return std::nullopt;
  if (M.kind() == CoeffKind::LowRank) return M;
  const int n = M.dim();
  const auto rows = support_rows(M.to_entries());
  if (static_cast<int>(rows.size()) > few_entry_threshold && n > dense_skip_order) return std::nullopt;

  const EigenPairs eig = gather_permute_eig(M);
  const double top = eig.values.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < eig.values.size(); ++r)
    if (std::abs(eig.values(r)) > tol * top) keep.push_back(r);
  const int r = static_cast<int>(keep.size());
  if (r == 0 || 2 * r > n) return std::nullopt;

  Vector lambdas(r);
  Matrix vectors(n, r);
  for (int c = 0; c < r; ++c) {
    lambdas(c) = eig.values(keep[c]);
    vectors.col(c) = eig.vectors.col(keep[c]);
  }
  return CoeffMatrix::low_rank(n, lambdas, vectors);
}

std::pair<SdpProblem, double> scale_objective(const SdpProblem& problem, double scale_trigger) {
  const double norm = objective_norm(problem);
  if (!(norm > scale_trigger)) return {problem, 1.0};
  SdpProblem scaled = problem;
  for (auto& c : scaled.C) c = c.scaled(1.0 / norm);
  return {std::move(scaled), norm};
}

namespace {

// value v if c is v * I on its block, else 0
double identity_multiple(const CoeffMatrix& c) {
  const auto entries = c.to_entries();
  if (static_cast<int>(entries.size()) != c.dim()) return 0.0;
  const double v = entries.front().value;
  for (const auto& e : entries)
    if (e.row != e.col || e.value != v) return 0.0;
  return v;
}

std::optional<double> implied_trace(const SdpProblem& p) {
  for (int i = 0; i < p.m; ++i) {
    double v = 0.0;
    bool ok = true;
    for (int k = 0; k < p.num_blocks() && ok; ++k) {
      const double w = identity_multiple(p.A[i][k]);
      if (w == 0.0 || (v != 0.0 && w != v)) ok = false;
      v = w;
    }
    if (ok && v != 0.0) return p.b(i) / v;
  }

  // single diagonal entries covering every diagonal position exactly once
  std::map<std::pair<int, int>, int> hits;
  double theta = 0.0;
  for (int i = 0; i < p.m; ++i) {
    int block = -1;
    SparseEntry only{};
    bool single = true;
    for (int k = 0; k < p.num_blocks() && single; ++k) {
      if (p.A[i][k].is_zero()) continue;
      const auto e = p.A[i][k].to_entries();
      if (block >= 0 || e.size() != 1 || e[0].row != e[0].col) {
        single = false;
        break;
      }
      block = k;
      only = e[0];
    }
    if (!single || block < 0) continue;
    if (++hits[{block, only.row}] > 1) return std::nullopt;
    theta += p.b(i) / only.value;
  }
  if (static_cast<int>(hits.size()) != p.total_order()) return std::nullopt;
  return theta;
}

std::optional<std::pair<Vector, Vector>> implied_bounds(const SdpProblem& p) {
  const double inf = std::numeric_limits<double>::infinity();
  Vector lo = Vector::Constant(p.m, -inf), hi = Vector::Constant(p.m, inf);
  bool any = false;
  for (int k = 0; k < p.num_blocks(); ++k) {
    if (!p.is_diagonal(k)) continue;
    const int n = p.block_order(k);
    std::vector<int> owner(n, -1), count(n, 0);
    std::vector<double> coef(n, 0.0);
    for (int i = 0; i < p.m; ++i)
      for (const auto& e : p.A[i][k].to_entries()) {
        ++count[e.row];
        owner[e.row] = i;
        coef[e.row] = e.value;
      }
    Vector c = Vector::Zero(n);
    p.C[k].add_to_diag(c, 1.0);
    for (int q = 0; q < n; ++q) {
      if (count[q] != 1) continue;
      const int i = owner[q];
      const double bound = c(q) / coef[q];
      if (coef[q] > 0.0)
        hi(i) = std::min(hi(i), bound);
      else
        lo(i) = std::max(lo(i), bound);
      any = true;
    }
  }
  if (!any) return std::nullopt;
  for (int i = 0; i < p.m; ++i)
    if (!std::isfinite(lo(i)) || !std::isfinite(hi(i))) return std::nullopt;
  return std::make_pair(lo, hi);
}

bool rank_one_constraint(const SdpProblem& p, int i, double tol) {
  int nonzero = 0;
  const CoeffMatrix* only = nullptr;
  for (int k = 0; k < p.num_blocks(); ++k)
    if (!p.A[i][k].is_zero()) {
      ++nonzero;
      only = &p.A[i][k];
    }
  return nonzero == 1 && detect_rank_one(*only, tol).has_value();
}

bool objective_in_range(const SdpProblem& p) {
  const double cnorm = objective_norm(p);
  if (cnorm == 0.0 || p.m > 2000 || p.total_order() > 4000) return false;
  const int m = p.m;
  Matrix G = Matrix::Zero(m, m);
  Vector rhs = Vector::Zero(m);
  for (int k = 0; k < p.num_blocks(); ++k) {
    const int n = p.block_order(k);
    const bool diag = p.is_diagonal(k);
    Matrix dense;
    Vector dvec;
    for (int i = 0; i < m; ++i) {
      if (p.A[i][k].is_zero()) continue;
      if (diag) {
        dvec = Vector::Zero(n);
        p.A[i][k].add_to_diag(dvec, 1.0);
        rhs(i) += p.C[k].dot_diag(dvec);
      } else {
        dense = Matrix::Zero(n, n);
        p.A[i][k].add_to(dense, 1.0);
        rhs(i) += p.C[k].dot(dense);
      }
      for (int j = i; j < m; ++j) {
        if (p.A[j][k].is_zero()) continue;
        const double v = diag ? p.A[j][k].dot_diag(dvec) : p.A[j][k].dot(dense);
        G(i, j) += v;
        if (j != i) G(j, i) += v;
      }
    }
  }
  const Vector y = G.completeOrthogonalDecomposition().solve(rhs);
  BlockMatrix R = objective_matrix(p);
  R -= adjoint_map(p, y);
  return frobenius_norm(R) <= 1e-10 * cnorm;
}

}  // namespace

StructureFlags detect_structures(const SdpProblem& p, const PresolveConfig& cfg) {
  StructureFlags f;
  f.feasibility_problem = std::all_of(p.C.begin(), p.C.end(), [](const CoeffMatrix& c) { return c.is_zero(); });
  f.multi_block = p.num_blocks() > cfg.multi_block_threshold;

  bool dense = p.m > 0;
  for (int i = 0; i < p.m && dense; ++i) {
    bool any = false;
    for (const auto& c : p.A[i]) {
      if (c.is_zero()) continue;
      any = true;
      if (c.kind() != CoeffKind::DenseSym) dense = false;
    }
    if (!any) dense = false;
  }
  f.dense_problem = dense;

  f.implied_trace = implied_trace(p);
  f.implied_dual_bounds = implied_bounds(p);
  for (int i = 0; i < p.m; ++i)
    if (std::abs(p.b(i)) <= 1e-12 && rank_one_constraint(p, i, cfg.rank_tol)) {
      f.empty_primal_interior = true;
      break;
    }
  f.empty_dual_interior = objective_in_range(p);
  return f;
}

PresolveResult run(const SdpProblem& problem, const PresolveConfig& cfg) {
  PresolveResult out;
  auto [scaled, scale] = scale_objective(problem, cfg.scale_trigger);
  out.problem = std::move(scaled);
  out.objective_scale = scale;
  out.flags = detect_structures(out.problem, cfg);

  const bool try_low_rank = cfg.detect_low_rank && !out.flags.dense_problem;
  for (int i = 0; i < out.problem.m; ++i)
    for (int k = 0; k < out.problem.num_blocks(); ++k) {
      CoeffMatrix& c = out.problem.A[i][k];
      if (out.problem.is_diagonal(k) || c.is_zero()) continue;
      if (c.kind() == CoeffKind::RankOne || c.kind() == CoeffKind::LowRank) continue;
      if (auto r1 = detect_rank_one(c, cfg.rank_tol)) {
        c = CoeffMatrix::rank_one(c.dim(), r1->lambda, r1->a);
        ++out.rank_one_count;
      } else if (try_low_rank) {
        if (auto lr = detect_low_rank(c, cfg.rank_tol, cfg.dense_skip_order, cfg.few_entry_threshold)) {
          c = *lr;
          ++out.low_rank_count;
        }
      }
    }
  return out;
}

std::string describe(const StructureFlags& f) {
  std::ostringstream os;
  if (f.implied_trace) os << "implied_trace=" << *f.implied_trace << ' ';
  if (f.implied_dual_bounds) os << "implied_dual_bounds ";
  if (f.empty_primal_interior) os << "empty_primal_interior ";
  if (f.empty_dual_interior) os << "empty_dual_interior ";
  if (f.feasibility_problem) os << "feasibility_problem ";
  if (f.dense_problem) os << "dense_problem ";
  if (f.multi_block) os << "multi_block ";
  std::string s = os.str();
  if (!s.empty()) s.pop_back();
  return s.empty() ? "none" : s;
}

}  // namespace sdsolve::presolve
