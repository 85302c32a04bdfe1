#include "sdsolve/recovery.hpp"

#include "sdsolve/linalg.hpp"

#include <cmath>
#include <limits>

namespace sdsolve::recovery {

BlockMatrix backward_matrix(const SdpProblem& p, const BlockMatrix& S, const BlockMatrix& R, const Vector& dy,
                            double dtau) {
  BlockMatrix W = S;
  W -= R;
  W += adjoint_map(p, dy);
  if (dtau != 0.0) W.axpy(-dtau, objective_matrix(p));
  return W;
}

BlockMatrix scaled_congruence(const BlockMatrix& Sinv, const BlockMatrix& W, double mu) {
  BlockMatrix X = W;
  for (std::size_t k = 0; k < X.size(); ++k) {
    if (X[k].diagonal) {
      X[k].diag = mu * Sinv[k].diag.cwiseAbs2().cwiseProduct(W[k].diag);
    } else {
      const Matrix T = Sinv[k].dense * W[k].dense;
      X[k].dense.noalias() = mu * T * Sinv[k].dense;
      X[k].dense = 0.5 * (X[k].dense + X[k].dense.transpose()).eval();
    }
  }
  return X;
}

bool positive_definite(const BlockMatrix& X) {
  for (const auto& b : X.blocks()) {
    if (b.order() == 0) continue;
    if (b.diagonal) {
      if (!(b.diag.minCoeff() > 0.0)) return false;
    } else if (!linalg::is_positive_definite(b.dense, 1e-14)) {
      return false;
    }
  }
  return true;
}

PrimalCandidate recover_backward(const SdpProblem& p, const kkt::Slack& slack, const BlockMatrix& R,
                                 const Vector& dy, double dtau, double mu) {
  const BlockMatrix W = backward_matrix(p, slack.S, R, dy, dtau);
  PrimalCandidate out;
  out.source = Source::BackwardNewton;
  out.psd_certified = positive_definite(W);
  out.X = scaled_congruence(slack.inverse, W, mu);
  return out;
}

PrimalCandidate recover_projection(const SdpProblem& p, const kkt::Slack& slack, const Vector& dy1,
                                   const Vector& dy2, double tau, double mu) {
  const Vector dyp = (tau / mu) * dy1 - dy2;
  BlockMatrix W = slack.S;
  W += adjoint_map(p, dyp);
  PrimalCandidate out;
  out.source = Source::Projection;
  out.psd_certified = positive_definite(W);
  out.X = scaled_congruence(slack.inverse, W, mu);
  return out;
}

double primal_bound_zbar(const SdpProblem& p, const kkt::Aux& aux, const Vector& y, double tau, const Vector& dy,
                         double dtau, double mu, bool certified) {
  if (!certified) throw NotCertified();
  const double n = p.total_order();
  const double value = (tau + dtau) * p.b.dot(y) + n * mu + mu * (aux.asinv + aux.asinv_rsinv).dot(dy) -
                       mu * aux.rsinv_rsinv - mu * (aux.csinv + aux.csinv_rsinv) * dtau;
  return value / tau;
}

double primal_bound_zprime(const SdpProblem& p, const kkt::Aux& aux, const Vector& y, double tau,
                           const Vector& dy1, const Vector& dy2, double mu) {
  const double n = p.total_order();
  const Vector dyp = (tau / mu) * dy1 - dy2;
  return mu * (aux.rsinv + (aux.asinv_rsinv + aux.asinv).dot(dyp) + n) + tau * p.b.dot(y);
}

std::array<double, 6> dimacs_errors(const SdpProblem& p, const BlockMatrix* X, const Vector& y,
                                    const BlockMatrix& S) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::array<double, 6> e{nan, nan, 0.0, 0.0, nan, nan};
  const double bnorm = p.m > 0 ? p.b.cwiseAbs().maxCoeff() : 0.0;
  const double cmax = objective_max_abs(p);
  const double by = p.b.dot(y);

  BlockMatrix dres = adjoint_map(p, y);
  dres += S;
  dres -= objective_matrix(p);
  e[2] = frobenius_norm(dres) / (1.0 + cmax);
  e[3] = std::max(0.0, -linalg::min_eigenvalue(S)) / (1.0 + cmax);

  if (X) {
    const double cx = objective_dot(p, *X);
    const double denom = 1.0 + std::abs(cx) + std::abs(by);
    e[0] = (primal_map(p, *X) - p.b).norm() / (1.0 + bnorm);
    e[1] = std::max(0.0, -linalg::min_eigenvalue(*X)) / (1.0 + bnorm);
    e[4] = (cx - by) / denom;
    e[5] = inner(*X, S) / denom;
  }
  return e;
}

bool verify_dual_ray(const SdpProblem& p, const Vector& dy) {
  const double norm = dy.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) return false;
  const Vector d = dy / norm;
  if (!(p.b.dot(d) > 0.0)) return false;
  BlockMatrix neg = adjoint_map(p, d);
  neg *= -1.0;
  return linalg::min_eigenvalue(neg) >= -1e-10;
}

bool verify_primal_ray(const SdpProblem& p, const BlockMatrix& X) {
  const double norm = frobenius_norm(X);
  if (!(norm > 0.0) || !std::isfinite(norm)) return false;
  BlockMatrix d = X;
  d *= 1.0 / norm;
  if (!(objective_dot(p, d) < -1e-8)) return false;
  if (primal_map(p, d).norm() > 1e-8) return false;
  return linalg::min_eigenvalue(d) >= -1e-10;
}

}  // namespace sdsolve::recovery
