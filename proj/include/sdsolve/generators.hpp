#pragma once

#include "sdsolve/model.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>

namespace sdsolve::gen {

class InvalidSize : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Laplacian of a G(n, prob) random graph with unit weights.
Matrix random_laplacian(int n, double prob, std::uint64_t seed);

// min <C, X> s.t. diag(X) = 1, X >= 0 with C = -L/4.
SdpProblem maxcut(const Matrix& laplacian);
SdpProblem maxcut(int n, double prob, std::uint64_t seed);

// Strictly feasible default for <11^T, X> = beta: midpoint between n^2/k and n^2.
double gpp_default_beta(int n, int k);

// min <L/2, X> s.t. diag(X) = 1, <11^T, X> = beta, kX - 11^T >= 0, X >= 0 (entrywise).
// kX - 11^T >= 0 is lifted to [[X, 1], [1^T, k]] >= 0; X_ij >= 0 (i < j) to X_ij - w_ij = 0 with
// w in a diagonal block.
SdpProblem gpp(const Matrix& laplacian, int k, double beta);
SdpProblem gpp(int n, int k, double prob, std::uint64_t seed, std::optional<double> beta = std::nullopt);

// max tau s.t. D <= B, tau B - D <= 0, written in dual form with y = (d_1..d_n, tau).
SdpProblem diagprecond(const Matrix& B);
// Sparse random SPD B (density prob) or, with diagonal = true, a random positive diagonal.
Matrix random_spd_matrix(int n, double prob, std::uint64_t seed, bool diagonal = false);

// min <I, X> s.t. tr(X) = 1 on one n x n block.
SdpProblem trace_toy(int n);

}  // namespace sdsolve::gen
