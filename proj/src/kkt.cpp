#include "sdsolve/kkt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sdsolve::kkt {

const char* to_string(Technique t) {
  switch (t) {
    case Technique::M1: return "M1";
    case Technique::M2: return "M2";
    case Technique::M3: return "M3";
    case Technique::M4: return "M4";
    case Technique::M5: return "M5";
  }
  return "?";
}

double technique_flops(Technique t, const RowStats& s, int n, double sum_f, double kappa) {
  const double nn = n, f = s.nnz, r = s.rank;
  switch (t) {
    case Technique::M1: return r * (nn * nn + 2.0 * nn * nn) + kappa * sum_f;
    case Technique::M2: return r * (nn * nn + kappa * sum_f);
    case Technique::M3: return nn * kappa * f + nn * nn * nn + kappa * sum_f;
    case Technique::M4: return nn * kappa * f + kappa * (nn + 1.0) * sum_f;
    case Technique::M5: return kappa * (2.0 * kappa * f + 1.0) * sum_f;
  }
  return 0.0;
}

namespace {

bool uses_inverse(Technique t) { return t == Technique::M3 || t == Technique::M4 || t == Technique::M5; }

struct Choice {
  Technique t;
  double cost;
};

Choice best_of(const std::vector<Technique>& pool, const RowStats& s, int n, double sum_f, double kappa) {
  Choice best{pool.front(), technique_flops(pool.front(), s, n, sum_f, kappa)};
  for (Technique t : pool) {
    const double c = technique_flops(t, s, n, sum_f, kappa);
    if (c < best.cost) best = {t, c};
  }
  return best;
}

}  // namespace

RowPlan plan_rows(const std::vector<RowStats>& stats, int n, const PlanOptions& opts) {
  const int m = static_cast<int>(stats.size());
  RowPlan plan;
  plan.technique.assign(m, Technique::M5);
  plan.predicted_flops.assign(m, 0.0);
  if (m == 0) return plan;

  std::vector<int> by_nnz(m);
  std::iota(by_nnz.begin(), by_nnz.end(), 0);
  std::stable_sort(by_nnz.begin(), by_nnz.end(), [&](int a, int b) { return stats[a].nnz > stats[b].nnz; });
  std::vector<double> suffix(m);
  double acc = 0.0;
  for (int pos = m - 1; pos >= 0; --pos) {
    acc += stats[by_nnz[pos]].nnz;
    suffix[by_nnz[pos]] = acc;
  }

  const std::vector<Technique> all{Technique::M1, Technique::M2, Technique::M3, Technique::M4, Technique::M5};
  const std::vector<Technique> low_rank{Technique::M1, Technique::M2};
  const std::vector<Technique> inverse{Technique::M3, Technique::M4, Technique::M5};
  const double extra = static_cast<double>(n) * n * n;

  auto build = [&](bool restrict_low_rank, std::vector<Technique>& tech, std::vector<double>& cost) {
    double total = 0.0;
    bool any_inverse = false;
    for (int i = 0; i < m; ++i) {
      const RowStats& s = stats[i];
      Choice c{};
      if (opts.forced) {
        if (!uses_inverse(*opts.forced) && !s.has_factor)
          c = best_of(inverse, s, n, suffix[i], opts.kappa_mem);
        else
          c = {*opts.forced, technique_flops(*opts.forced, s, n, suffix[i], opts.kappa_mem)};
      } else if (s.has_factor && s.rank_one_few) {
        c = {Technique::M2, technique_flops(Technique::M2, s, n, suffix[i], opts.kappa_mem)};
      } else if (!s.has_factor) {
        c = best_of(inverse, s, n, suffix[i], opts.kappa_mem);
      } else {
        c = best_of(restrict_low_rank ? low_rank : all, s, n, suffix[i], opts.kappa_mem);
      }
      tech[i] = c.t;
      cost[i] = c.cost;
      total += c.cost;
      any_inverse = any_inverse || uses_inverse(c.t);
    }
    return total + (any_inverse ? extra : 0.0);
  };

  std::vector<Technique> t1(m), t2(m);
  std::vector<double> c1(m), c2(m);
  const double free_total = build(false, t1, c1);
  const double restricted_total = opts.forced ? free_total + 1.0 : build(true, t2, c2);
  if (restricted_total < free_total) {
    plan.technique = std::move(t2);
    plan.predicted_flops = std::move(c2);
  } else {
    plan.technique = std::move(t1);
    plan.predicted_flops = std::move(c1);
  }
  plan.extra_cost = std::any_of(plan.technique.begin(), plan.technique.end(), uses_inverse) ? extra : 0.0;

  plan.sigma.resize(m);
  std::iota(plan.sigma.begin(), plan.sigma.end(), 0);
  std::stable_sort(plan.sigma.begin(), plan.sigma.end(),
                   [&](int a, int b) { return plan.predicted_flops[a] > plan.predicted_flops[b]; });
  return plan;
}

std::optional<Slack> factor_slack(BlockMatrix S) {
  Slack out;
  out.inverse = BlockMatrix::zeros([&] {
    std::vector<int> sizes;
    for (const auto& b : S.blocks()) sizes.push_back(b.diagonal ? -b.order() : b.order());
    return sizes;
  }());
  out.factor.resize(S.size());
  for (std::size_t k = 0; k < S.size(); ++k) {
    const Block& b = S[k];
    if (b.diagonal) {
      if (b.order() > 0 && !(b.diag.minCoeff() > 0.0)) return std::nullopt;
      out.inverse[k].diag = b.diag.cwiseInverse();
      out.logdet += b.diag.array().log().sum();
      continue;
    }
    auto f = linalg::try_cholesky(b.dense, 1e-14, nullptr);
    if (!f) return std::nullopt;
    out.logdet += linalg::logdet(*f);
    out.inverse[k].dense = f->inverse();
    out.factor[k] = std::move(f);
  }
  out.S = std::move(S);
  return out;
}

KktData::KktData(const SdpProblem& problem) : problem_(&problem), rows_(problem.num_blocks()) {
  for (int k = 0; k < problem.num_blocks(); ++k) {
    for (int i = 0; i < problem.m; ++i) {
      const CoeffMatrix& c = problem.A[i][k];
      if (c.is_zero()) continue;
      Coeff pc;
      pc.row = i;
      pc.coeff = &c;
      pc.upper = c.to_entries();
      pc.stats.nnz = static_cast<double>(c.nnz());
      pc.stats.rank = c.rank();
      if (!problem.is_diagonal(k)) {
        pc.dense_storage = c.kind() == CoeffKind::DenseSym;
        if (pc.dense_storage) pc.dense = c.to_dense();
        if (c.kind() == CoeffKind::RankOne || c.kind() == CoeffKind::LowRank) {
          pc.has_factor = true;
          pc.lambdas = c.eigenvalues();
          pc.vectors = c.eigenvectors();
          for (Eigen::Index r = 0; r < pc.vectors.cols(); ++r) {
            std::vector<int> sup;
            for (Eigen::Index p = 0; p < pc.vectors.rows(); ++p)
              if (pc.vectors(p, r) != 0.0) sup.push_back(static_cast<int>(p));
            pc.support.push_back(std::move(sup));
          }
          pc.stats.has_factor = true;
          pc.stats.rank_one_few = c.kind() == CoeffKind::RankOne && c.nnz() <= 2;
        }
      }
      rows_[k].push_back(std::move(pc));
    }
  }
}

std::vector<RowPlan> plan_all(const KktData& data, const PlanOptions& opts) {
  const SdpProblem& p = data.problem();
  std::vector<RowPlan> plans(p.num_blocks());
  for (int k = 0; k < p.num_blocks(); ++k) {
    if (p.is_diagonal(k)) continue;
    std::vector<RowStats> stats;
    for (const auto& c : data.block_rows(k)) stats.push_back(c.stats);
    plans[k] = plan_rows(stats, p.block_order(k), opts);
  }
  return plans;
}

namespace {

using Coeff = KktData::Coeff;

inline double entry_weight(const SparseEntry& e) { return e.row == e.col ? 1.0 : 2.0; }

double dot(const Coeff& c, const Matrix& B) {
  if (c.dense_storage) return c.dense.cwiseProduct(B).sum();
  double s = 0.0;
  for (const auto& e : c.upper) s += entry_weight(e) * e.value * B(e.row, e.col);
  return s;
}

double quad(const Coeff& c, const Vector& v) {
  if (c.has_factor) {
    std::size_t work = 0;
    for (const auto& sup : c.support) work += sup.size();
    if (work < c.upper.size()) {
      double s = 0.0;
      for (std::size_t r = 0; r < c.support.size(); ++r) {
        double t = 0.0;
        for (int p : c.support[r]) t += c.vectors(p, static_cast<Eigen::Index>(r)) * v(p);
        s += c.lambdas(static_cast<Eigen::Index>(r)) * t * t;
      }
      return s;
    }
  }
  if (c.dense_storage) return v.dot(c.dense * v);
  double s = 0.0;
  for (const auto& e : c.upper) s += entry_weight(e) * e.value * v(e.row) * v(e.col);
  return s;
}

Vector sinv_times(const Matrix& Sinv, const Coeff& c, std::size_t r) {
  Vector v = Vector::Zero(Sinv.rows());
  for (int p : c.support[r]) v += c.vectors(p, static_cast<Eigen::Index>(r)) * Sinv.col(p);
  return v;
}

// S^{-1} A
Matrix sinv_a(const Matrix& Sinv, const Coeff& c) {
  if (c.dense_storage) return Sinv * c.dense;
  const Eigen::Index n = Sinv.rows();
  Matrix K = Matrix::Zero(n, n);
  for (const auto& e : c.upper) {
    K.col(e.col) += e.value * Sinv.col(e.row);
    if (e.row != e.col) K.col(e.row) += e.value * Sinv.col(e.col);
  }
  return K;
}

// Row `pos` of sigma against every later position; writes M(i, j) and M(j, i).
void assemble_row(const std::vector<Coeff>& rows, const RowPlan& plan, int pos, const Matrix& Sinv, Matrix& M) {
  const Coeff& ci = rows[plan.sigma[pos]];
  const int npos = static_cast<int>(plan.sigma.size());
  auto store = [&](int jpos, double v) {
    const int a = ci.row, b = rows[plan.sigma[jpos]].row;
    M(a, b) = v;
    M(b, a) = v;
  };

  switch (plan.technique[plan.sigma[pos]]) {
    case Technique::M1: {
      Matrix B = Matrix::Zero(Sinv.rows(), Sinv.cols());
      for (std::size_t r = 0; r < ci.support.size(); ++r) {
        const Vector v = sinv_times(Sinv, ci, r);
        B.selfadjointView<Eigen::Lower>().rankUpdate(v, ci.lambdas(static_cast<Eigen::Index>(r)));
      }
      B.triangularView<Eigen::StrictlyUpper>() = B.transpose();
      for (int j = pos; j < npos; ++j) store(j, dot(rows[plan.sigma[j]], B));
      break;
    }
    case Technique::M2: {
      std::vector<Vector> vs;
      for (std::size_t r = 0; r < ci.support.size(); ++r) vs.push_back(sinv_times(Sinv, ci, r));
      for (int j = pos; j < npos; ++j) {
        const Coeff& cj = rows[plan.sigma[j]];
        double s = 0.0;
        for (std::size_t r = 0; r < vs.size(); ++r) s += ci.lambdas(static_cast<Eigen::Index>(r)) * quad(cj, vs[r]);
        store(j, s);
      }
      break;
    }
    case Technique::M3: {
      const Matrix K = sinv_a(Sinv, ci);
      const Matrix B = K * Sinv;
      for (int j = pos; j < npos; ++j) store(j, dot(rows[plan.sigma[j]], B));
      break;
    }
    case Technique::M4: {
      const Matrix Kt = sinv_a(Sinv, ci).transpose();
      for (int j = pos; j < npos; ++j) {
        const Coeff& cj = rows[plan.sigma[j]];
        double s = 0.0;
        for (const auto& e : cj.upper) s += entry_weight(e) * e.value * Kt.col(e.row).dot(Sinv.col(e.col));
        store(j, s);
      }
      break;
    }
    case Technique::M5: {
      for (int j = pos; j < npos; ++j) {
        const Coeff& cj = rows[plan.sigma[j]];
        double s = 0.0;
        for (const auto& e : ci.upper) {
          const double we = entry_weight(e) * e.value * 0.5;
          for (const auto& g : cj.upper) {
            const double t = Sinv(e.row, g.row) * Sinv(e.col, g.col) + Sinv(e.row, g.col) * Sinv(e.col, g.row);
            s += we * entry_weight(g) * g.value * t;
          }
        }
        store(j, s);
      }
      break;
    }
  }
}

}  // namespace

SchurSystem assemble_schur(const KktData& data, const Slack& slack, const BlockMatrix* R,
                           const std::vector<RowPlan>& plans, const AssembleOptions& opts) {
  const SdpProblem& p = data.problem();
  const int m = p.m;
  SchurSystem sys;
  sys.plans = plans;
  sys.M = opts.form_m ? Matrix::Zero(m, m) : Matrix();
  Aux& aux = sys.aux;
  aux.asinv = Vector::Zero(m);
  aux.asinv_csinv = Vector::Zero(m);
  aux.asinv_rsinv = Vector::Zero(m);
  const bool parallel = opts.policy == ExecPolicy::Parallel;

  for (int k = 0; k < p.num_blocks(); ++k) {
    const auto& rows = data.block_rows(k);
    const int nrows = static_cast<int>(rows.size());
    const bool with_r = R != nullptr;

    if (p.is_diagonal(k)) {
      const Vector& sinv = slack.inverse[k].diag;
      const Vector w = sinv.cwiseAbs2();
      const int n = p.block_order(k);
      std::vector<std::vector<std::pair<int, double>>> by_pos(n);
      for (const auto& c : rows)
        for (const auto& e : c.upper) by_pos[e.row].push_back({c.row, e.value});
      for (int q = 0; q < n && opts.form_m; ++q)
        for (const auto& [i, ai] : by_pos[q])
          for (const auto& [j, aj] : by_pos[q]) sys.M(i, j) += ai * aj * w(q);

      Vector c = Vector::Zero(n);
      p.C[k].add_to_diag(c, 1.0);
      const Vector scs = c.cwiseProduct(w);
      Vector rsr = Vector::Zero(n);
      if (with_r) rsr = (*R)[k].diag.cwiseProduct(w);
      for (const auto& row : rows)
        for (const auto& e : row.upper) {
          aux.asinv(row.row) += e.value * sinv(e.row);
          if (opts.objective_terms) aux.asinv_csinv(row.row) += e.value * scs(e.row);
          if (with_r) aux.asinv_rsinv(row.row) += e.value * rsr(e.row);
        }
      if (opts.objective_terms) {
        aux.csinv += c.dot(sinv);
        aux.csinvcsinv += c.dot(scs);
      }
      if (with_r) {
        aux.csinv_rsinv += c.dot(rsr);
        aux.rsinv += (*R)[k].diag.dot(sinv);
        aux.rsinv_rsinv += (*R)[k].diag.dot(rsr);
      }
      continue;
    }

    const Matrix& Sinv = slack.inverse[k].dense;
    Matrix SCS, SRS;
    if (opts.objective_terms && !p.C[k].is_zero()) {
      const Matrix C = p.C[k].to_dense();
      SCS = Sinv * C * Sinv;
      aux.csinv += C.cwiseProduct(Sinv).sum();
      aux.csinvcsinv += C.cwiseProduct(SCS).sum();
    }
    if (with_r) {
      const Matrix& Rk = (*R)[k].dense;
      SRS = Sinv * Rk * Sinv;
      if (!p.C[k].is_zero()) aux.csinv_rsinv += p.C[k].dot(SRS);
      aux.rsinv += Rk.cwiseProduct(Sinv).sum();
      aux.rsinv_rsinv += Rk.cwiseProduct(SRS).sum();
    }

    Matrix Mk = opts.form_m ? Matrix::Zero(m, m) : Matrix();
    const RowPlan& plan = plans[k];
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
    for (int pos = 0; pos < nrows; ++pos) {
      if (opts.form_m) assemble_row(rows, plan, pos, Sinv, Mk);
      const Coeff& c = rows[plan.sigma[pos]];
      aux.asinv(c.row) += dot(c, Sinv);
      if (SCS.size()) aux.asinv_csinv(c.row) += dot(c, SCS);
      if (SRS.size()) aux.asinv_rsinv(c.row) += dot(c, SRS);
    }
    if (opts.form_m) sys.M += Mk;
  }
  return sys;
}

SchurSystem assemble_schur(const KktData& data, const Slack& slack, const BlockMatrix* R,
                           const AssembleOptions& opts) {
  return assemble_schur(data, slack, R, plan_all(data, opts.plan), opts);
}

void NormalSolver::rebuild() {
  ++rebuilds_;
  stale_ = false;
  over_budget_ = 0;
  auto chol = linalg::try_cholesky(M_, 1e-15, nullptr);
  if (chol) {
    factor_ = std::move(chol);
    return;
  }
  try {
    factor_ = linalg::ldl_factor(M_);
    return;
  } catch (const linalg::SingularMatrix&) {
  }
  // numerically singular M near degenerate optima: factor a shifted copy, refine against M
  const double dmax = std::max(M_.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  for (double delta = 1e-14 * dmax; delta <= 1e-6 * dmax; delta *= 100.0) {
    Matrix shifted = M_;
    shifted.diagonal().array() += delta;
    if (auto c = linalg::try_cholesky(shifted, 1e-15, nullptr)) {
      factor_ = std::move(c);
      return;
    }
  }
  throw linalg::SingularMatrix(static_cast<int>(M_.rows()));
}

void NormalSolver::factorize(const Matrix& M) {
  M_ = M;
  if (mode_ == SolveMode::Direct || !factor_ || used_ldl()) {
    rebuild();
    if (budget_ == 0) budget_ = std::clamp(static_cast<int>(std::ceil(50.0 / std::max<Eigen::Index>(1, M.rows()))), 1, 200);
    return;
  }
  stale_ = true;
}

Vector NormalSolver::solve(const Vector& rhs) {
  if (!factor_) throw std::logic_error("NormalSolver::solve before factorize");
  if (mode_ == SolveMode::Direct || used_ldl()) {
    Vector x = factor_->solve(rhs);
    x += factor_->solve(Vector(rhs - M_ * x));
    return x;
  }
  linalg::PcgState state;
  state.kind = linalg::Preconditioner::CholeskyReuse;
  state.factor = factor_;
  state.max_iters = budget_;
  linalg::Operator op = [&](const Vector& in, Vector& out) { out.noalias() = M_ * in; };
  try {
    auto res = linalg::pcg_solve(op, rhs, state);
    pcg_iterations_ += res.iterations;
    if (res.converged) {
      over_budget_ = 0;
      return res.x;
    }
    budget_ = std::min(200, 2 * budget_);
    if (++over_budget_ >= 2) rebuild();
    state.factor = factor_;
    state.max_iters = budget_;
    res = linalg::pcg_solve(op, rhs, state, &res.x);
    pcg_iterations_ += res.iterations;
    if (res.converged) return res.x;
  } catch (const linalg::PcgBreakdown&) {
  }
  // the stale preconditioner could not finish the job
  rebuild();
  Vector x = factor_->solve(rhs);
  x += factor_->solve(Vector(rhs - M_ * x));
  return x;
}

Vector solve_normal(const SchurSystem& system, const Vector& rhs, SolveMode mode) {
  NormalSolver solver(mode);
  solver.factorize(system.M);
  return solver.solve(rhs);
}

}  // namespace sdsolve::kkt
