#pragma once

#include "sdsolve/kkt.hpp"
#include "sdsolve/model.hpp"

#include <array>
#include <stdexcept>

namespace sdsolve::recovery {

enum class Source { BackwardNewton, Projection };

struct PrimalCandidate {
  BlockMatrix X;
  Source source = Source::Projection;
  bool psd_certified = false;
};

class NotCertified : public std::runtime_error {
 public:
  NotCertified() : std::runtime_error("backward Newton step is not positive definite") {}
};

// S - R + A^T dy - C dtau
BlockMatrix backward_matrix(const SdpProblem& p, const BlockMatrix& S, const BlockMatrix& R, const Vector& dy,
                            double dtau);

// mu S^-1 W S^-1 for a positive definite slack given by its inverse.
BlockMatrix scaled_congruence(const BlockMatrix& Sinv, const BlockMatrix& W, double mu);

// X(mu) from a gamma = 1 Newton direction; certified when the backward matrix is positive definite.
PrimalCandidate recover_backward(const SdpProblem& p, const kkt::Slack& slack, const BlockMatrix& R,
                                 const Vector& dy, double dtau, double mu);

// X'(mu) = mu S^-1 (S + A^T dy') S^-1 with dy' = (tau/mu) dy1 - dy2; satisfies A X' = tau b.
PrimalCandidate recover_projection(const SdpProblem& p, const kkt::Slack& slack, const Vector& dy1,
                                   const Vector& dy2, double tau, double mu);

// <C tau, X(mu)> / tau evaluated from the auxiliary inner products. Throws NotCertified.
double primal_bound_zbar(const SdpProblem& p, const kkt::Aux& aux, const Vector& y, double tau, const Vector& dy,
                         double dtau, double mu, bool certified);

// <C tau, X'(mu)>
double primal_bound_zprime(const SdpProblem& p, const kkt::Aux& aux, const Vector& y, double tau,
                           const Vector& dy1, const Vector& dy2, double mu);

// Positive definiteness of every block (Cholesky for dense blocks).
bool positive_definite(const BlockMatrix& X);

// Mittelmann's six errors. Errors 1, 2, 5, 6 are NaN when X is null.
std::array<double, 6> dimacs_errors(const SdpProblem& p, const BlockMatrix* X, const Vector& y,
                                    const BlockMatrix& S);

// b^T dy > 0 and -A^T dy >= -1e-10 I on every block, dy taken at unit norm.
bool verify_dual_ray(const SdpProblem& p, const Vector& dy);

// X at unit Frobenius norm: X >= -1e-10 I, ||A X|| <= 1e-8 and <C, X> < -1e-8.
bool verify_primal_ray(const SdpProblem& p, const BlockMatrix& X);

}  // namespace sdsolve::recovery
