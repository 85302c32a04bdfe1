#pragma once

#include "sdsolve/model.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sdsolve::presolve {

struct PresolveConfig {
  double rank_tol = 1e-10;
  int dense_skip_order = 2048;
  int few_entry_threshold = 20;
  double scale_trigger = 1e8;
  int multi_block_threshold = 100;
  bool detect_low_rank = true;
};

struct StructureFlags {
  std::optional<double> implied_trace;
  std::optional<std::pair<Vector, Vector>> implied_dual_bounds;
  bool empty_primal_interior = false;
  bool empty_dual_interior = false;
  bool feasibility_problem = false;
  bool dense_problem = false;
  bool multi_block = false;
};

struct RankOne {
  double lambda = 0.0;
  Vector a;  // unit norm, first nonzero positive
};

struct EigenPairs {
  Vector values;
  Matrix vectors;  // full-order columns
};

std::optional<RankOne> detect_rank_one(const CoeffMatrix& M, double tol = 1e-10);
std::optional<CoeffMatrix> detect_low_rank(const CoeffMatrix& M, double tol = 1e-10,
                                           int dense_skip_order = 2048, int few_entry_threshold = 20);
EigenPairs gather_permute_eig(const CoeffMatrix& M);

std::pair<SdpProblem, double> scale_objective(const SdpProblem& problem, double scale_trigger = 1e8);
StructureFlags detect_structures(const SdpProblem& problem, const PresolveConfig& cfg = {});

struct PresolveResult {
  SdpProblem problem;  // constraint coefficients promoted to RankOne/LowRank where found
  double objective_scale = 1.0;
  StructureFlags flags;
  int rank_one_count = 0;
  int low_rank_count = 0;
};

PresolveResult run(const SdpProblem& problem, const PresolveConfig& cfg = {});

std::string describe(const StructureFlags& flags);

}  // namespace sdsolve::presolve
