#pragma once

#include "sdsolve/linalg.hpp"
#include "sdsolve/model.hpp"

#include <optional>
#include <vector>

namespace sdsolve::kkt {

enum class Technique { M1, M2, M3, M4, M5 };
const char* to_string(Technique t);

struct RowStats {
  double nnz = 0.0;         // f_i
  int rank = 0;             // r_i
  bool has_factor = false;  // eigen factor available, M1/M2 applicable
  bool rank_one_few = false;
};

struct RowPlan {
  std::vector<int> sigma;  // positions -> local row index, most expensive first
  std::vector<Technique> technique;
  std::vector<double> predicted_flops;
  double extra_cost = 0.0;  // n^3 charged when any row uses M3-M5
};

struct PlanOptions {
  double kappa_mem = 3.0;
  std::optional<Technique> forced;  // applied wherever applicable
};

RowPlan plan_rows(const std::vector<RowStats>& stats, int n, const PlanOptions& opts = {});
// The five flop formulas for row stats at suffix sum sum_f.
double technique_flops(Technique t, const RowStats& s, int n, double sum_f, double kappa_mem);

// Positive definite slack with per-block factors and explicit inverses.
struct Slack {
  BlockMatrix S;
  BlockMatrix inverse;
  std::vector<std::optional<linalg::FactorHandle>> factor;
  double logdet = 0.0;
};

// nullopt unless every block is positive definite.
std::optional<Slack> factor_slack(BlockMatrix S);

struct Aux {
  Vector asinv;
  Vector asinv_csinv;
  Vector asinv_rsinv;
  double csinv = 0.0;
  double csinvcsinv = 0.0;
  double csinv_rsinv = 0.0;
  double rsinv = 0.0;
  double rsinv_rsinv = 0.0;
};

struct SchurSystem {
  Matrix M;
  Aux aux;
  std::vector<RowPlan> plans;  // one per block, empty for diagonal blocks
};

// Per-problem precomputation: entry lists, factor supports and row statistics.
class KktData {
 public:
  explicit KktData(const SdpProblem& problem);

  struct Coeff {
    int row = 0;
    const CoeffMatrix* coeff = nullptr;
    std::vector<SparseEntry> upper;
    bool dense_storage = false;
    Matrix dense;  // materialized when dense_storage
    bool has_factor = false;
    Vector lambdas;
    Matrix vectors;
    std::vector<std::vector<int>> support;  // nonzero rows per factor vector
    RowStats stats;
  };

  const SdpProblem& problem() const { return *problem_; }
  const std::vector<Coeff>& block_rows(int k) const { return rows_[k]; }

 private:
  const SdpProblem* problem_;
  std::vector<std::vector<Coeff>> rows_;
};

enum class ExecPolicy { Serial, Parallel };

struct AssembleOptions {
  ExecPolicy policy = ExecPolicy::Parallel;
  bool objective_terms = true;  // asinv_csinv, csinv, csinvcsinv
  bool form_m = true;           // false: aux vectors only, M left empty
  PlanOptions plan;
};

std::vector<RowPlan> plan_all(const KktData& data, const PlanOptions& opts = {});

// R may be null (treated as zero).
SchurSystem assemble_schur(const KktData& data, const Slack& slack, const BlockMatrix* R,
                           const std::vector<RowPlan>& plans, const AssembleOptions& opts = {});
SchurSystem assemble_schur(const KktData& data, const Slack& slack, const BlockMatrix* R,
                           const AssembleOptions& opts = {});

enum class SolveMode { Direct, PCG };

// Factor-once, solve-many wrapper around M with Cholesky, LDL fallback and optional PCG.
class NormalSolver {
 public:
  explicit NormalSolver(SolveMode mode = SolveMode::Direct) : mode_(mode) {}

  // Throws linalg::SingularMatrix when both factorizations fail.
  void factorize(const Matrix& M);
  Vector solve(const Vector& rhs);

  bool used_ldl() const { return factor_ && factor_->kind() == linalg::FactorKind::LDL; }
  int pcg_iterations() const { return pcg_iterations_; }
  int rebuilds() const { return rebuilds_; }

 private:
  void rebuild();

  SolveMode mode_;
  Matrix M_;
  std::optional<linalg::FactorHandle> factor_;
  bool stale_ = false;
  int budget_ = 0;
  int over_budget_ = 0;
  int pcg_iterations_ = 0;
  int rebuilds_ = 0;
};

Vector solve_normal(const SchurSystem& system, const Vector& rhs, SolveMode mode = SolveMode::Direct);

}  // namespace sdsolve::kkt
