#include "sdsolve/solver.hpp"

#include "sdsolve/linalg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>

namespace sdsolve::solver {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct FieldRef {
  double* d = nullptr;
  int* i = nullptr;
  bool* b = nullptr;
};

std::map<std::string, FieldRef> fields(Params& p) {
  return {
      {"rho", {&p.rho}},
      {"theta", {&p.theta}},
      {"eps_opt", {&p.eps_opt}},
      {"eps_feas", {&p.eps_feas}},
      {"eps_inf", {&p.eps_inf}},
      {"step_fraction", {&p.step_fraction}},
      {"init_exponent", {nullptr, &p.init_exponent}},
      {"corrector_rounds", {nullptr, &p.corrector_rounds}},
      {"max_iters", {nullptr, &p.max_iters}},
      {"time_limit_seconds", {&p.time_limit_seconds}},
      {"kappa_mem", {&p.kappa_mem}},
      {"dual_bound", {&p.dual_bound}},
      {"use_pcg", {nullptr, nullptr, &p.use_pcg}},
      {"presolve", {nullptr, nullptr, &p.presolve}},
      {"mu_heuristics", {nullptr, nullptr, &p.mu_heuristics}},
      {"serial", {nullptr, nullptr, &p.serial}},
      {"verbose", {nullptr, &p.verbose}},
  };
}

// Factors of every dense block; diagonal blocks need none.
struct Factored {
  BlockMatrix S;
  std::vector<std::optional<linalg::FactorHandle>> factor;
  double logdet = 0.0;
};

std::optional<Factored> factor_blocks(BlockMatrix S) {
  Factored out;
  out.factor.resize(S.size());
  for (std::size_t k = 0; k < S.size(); ++k) {
    const Block& b = S[k];
    if (b.order() == 0) continue;
    if (b.diagonal) {
      if (!(b.diag.minCoeff() > 0.0)) return std::nullopt;
      out.logdet += b.diag.array().log().sum();
      continue;
    }
    auto f = linalg::try_cholesky(b.dense, 1e-14, nullptr);
    if (!f) return std::nullopt;
    out.logdet += linalg::logdet(*f);
    out.factor[k] = std::move(f);
  }
  out.S = std::move(S);
  return out;
}

double max_step_blocks(const BlockMatrix& S, const std::vector<std::optional<linalg::FactorHandle>>& factor,
                       const BlockMatrix& dS) {
  double a = kInf;
  for (std::size_t k = 0; k < S.size(); ++k) {
    if (S[k].order() == 0) continue;
    if (S[k].diagonal)
      a = std::min(a, linalg::max_step_diagonal(S[k].diag, dS[k].diag));
    else
      a = std::min(a, linalg::max_step_lanczos(*factor[k], dS[k].dense));
  }
  return a;
}

std::vector<int> block_sizes(const SdpProblem& p) { return p.blocks; }

BlockMatrix zero_like(const SdpProblem& p) { return BlockMatrix::zeros(block_sizes(p)); }

double lambda_max_objective(const SdpProblem& p) {
  double top = -kInf;
  for (int k = 0; k < p.num_blocks(); ++k) {
    const int n = p.block_order(k);
    if (p.is_diagonal(k)) {
      Vector c = Vector::Zero(n);
      p.C[k].add_to_diag(c, 1.0);
      top = std::max(top, c.maxCoeff());
    } else {
      top = std::max(top, linalg::sym_eigenvalues(p.C[k].to_dense()).maxCoeff());
    }
  }
  return top;
}

double ratio_scalar(double x, double dx) { return dx < 0.0 ? -x / dx : kInf; }

}  // namespace

void Params::validate() const {
  if (!(step_fraction > 0.0 && step_fraction < 1.0)) throw std::invalid_argument("step_fraction must lie in (0,1)");
  if (!(rho > 1.0)) throw std::invalid_argument("rho must exceed 1");
  if (!(eps_opt > 0.0 && eps_feas > 0.0 && eps_inf > 0.0)) throw std::invalid_argument("tolerances must be positive");
  if (!(theta >= 0.0)) throw std::invalid_argument("theta must be nonnegative");
  if (corrector_rounds < 0) throw std::invalid_argument("corrector_rounds must be nonnegative");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be positive");
}

void set_param(Params& params, const std::string& key, const std::string& value) {
  auto all = fields(params);
  auto it = all.find(key);
  if (it == all.end()) throw std::invalid_argument("unknown parameter '" + key + "'");
  std::size_t used = 0;
  try {
    if (it->second.d) {
      *it->second.d = std::stod(value, &used);
    } else if (it->second.i) {
      *it->second.i = std::stoi(value, &used);
    } else {
      if (value == "true" || value == "1") {
        *it->second.b = true;
      } else if (value == "false" || value == "0") {
        *it->second.b = false;
      } else {
        throw std::invalid_argument("");
      }
      used = value.size();
    }
  } catch (const std::logic_error&) {
    throw std::invalid_argument("bad value '" + value + "' for parameter '" + key + "'");
  }
  if (used != value.size()) throw std::invalid_argument("bad value '" + value + "' for parameter '" + key + "'");
}

std::vector<std::string> param_names() {
  Params p;
  std::vector<std::string> out;
  for (const auto& [k, v] : fields(p)) out.push_back(k);
  return out;
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Continue: return "Continue";
    case Status::SwitchPhaseB: return "SwitchPhaseB";
    case Status::Optimal: return "Optimal";
    case Status::PrimalUnboundedDualInfeasible: return "PrimalUnboundedDualInfeasible";
    case Status::PrimalInfeasibleDualUnbounded: return "PrimalInfeasibleDualUnbounded";
    case Status::Stalled: return "Stalled";
    case Status::IterLimit: return "IterLimit";
    case Status::TimeLimit: return "TimeLimit";
  }
  return "?";
}

bool is_infeasibility(Status s) {
  return s == Status::PrimalUnboundedDualInfeasible || s == Status::PrimalInfeasibleDualUnbounded;
}

double max_step(const kkt::Slack& slack, const BlockMatrix& dS) { return max_step_blocks(slack.S, slack.factor, dS); }

DualIterate initialize(const SdpProblem& p, const Params& params) {
  DualIterate it;
  it.y = Vector::Zero(p.m);
  it.tau = 1.0;
  it.kappa = 1.0;
  double cnorm = objective_norm(p);
  if (cnorm == 0.0) cnorm = 1.0;
  const double shift = std::pow(10.0, params.init_exponent) * cnorm;
  BlockMatrix S = objective_matrix(p);
  S.add_identity(shift);
  auto slack = kkt::factor_slack(S);
  if (!slack) throw linalg::SingularMatrix(0);
  it.slack = std::move(*slack);
  it.R = objective_matrix(p);
  it.R -= it.slack.S;
  const double n = p.total_order();
  it.mu0 = (n * std::pow(10.0, params.init_exponent) + params.theta * frobenius_norm(it.R)) / (params.rho * n);
  it.mu = it.mu0;
  return it;
}

void combine_directions(const SdpProblem& p, const DualIterate& it, const kkt::Aux& aux, NewtonDirections& d,
                        double gamma) {
  const double tau = it.tau, mu = it.mu;
  const Vector u = (tau / mu) * d.dy1 - d.dy2 + gamma * d.dy3;
  const Vector v = d.dy1 / mu + d.dy4;
  const Vector bh = p.b - mu * aux.asinv_csinv;
  const double rhs = -p.b.dot(it.y) + mu / tau + mu * aux.csinv - mu * gamma * aux.csinv_rsinv;
  const double den = bh.dot(v) + mu * (aux.csinvcsinv + 1.0 / (tau * tau));
  d.gamma = gamma;
  d.dtau = (rhs - bh.dot(u)) / den;
  d.dy = u + v * d.dtau;
  d.dkappa = mu / tau - mu * d.dtau / (tau * tau) - it.kappa;
  d.dS = it.R;
  d.dS *= gamma;
  d.dS -= adjoint_map(p, d.dy);
  if (d.dtau != 0.0) d.dS.axpy(d.dtau, objective_matrix(p));
}

NewtonDirections newton_embedding(const SdpProblem& p, const DualIterate& it, const kkt::Aux& aux,
                                  kkt::NormalSolver& normal, double gamma) {
  NewtonDirections d;
  d.dy1 = normal.solve(p.b);
  d.dy2 = normal.solve(aux.asinv);
  d.dy3 = normal.solve(aux.asinv_rsinv);
  d.dy4 = normal.solve(aux.asinv_csinv);
  combine_directions(p, it, aux, d, gamma);
  return d;
}

NewtonDirections newton_embedding(const SdpProblem& p, const DualIterate& it, const kkt::SchurSystem& schur,
                                  double gamma) {
  kkt::NormalSolver normal;
  normal.factorize(schur.M);
  return newton_embedding(p, it, schur.aux, normal, gamma);
}

void choose_step(const SdpProblem& p, const DualIterate& it, const kkt::Aux& aux, NewtonDirections& d) {
  const BlockMatrix& S = it.slack.S;

  // stage 1: centrality direction A^T dy2 with barrier non-increase
  const BlockMatrix Dc = adjoint_map(p, d.dy2);
  const double base = -it.slack.logdet - std::log(it.tau);
  double ac = std::min(1.0, 0.95 * max_step(it.slack, Dc));
  std::optional<Factored> P;
  for (int halving = 0; halving <= 20; ++halving, ac *= 0.5) {
    BlockMatrix trial = S;
    trial.axpy(ac, Dc);
    auto f = factor_blocks(std::move(trial));
    if (f && -f->logdet - std::log(it.tau) <= base) {
      P = std::move(f);
      break;
    }
  }
  if (!P) {
    ac = 0.0;
    P = factor_blocks(S);
  }

  // stage 2: largest gamma <= 1 keeping S + ac A^T dy2 + ac gamma (R - A^T dy3) >= 0
  double gamma = 1.0;
  if (ac > 0.0) {
    BlockMatrix Dr = it.R;
    Dr -= adjoint_map(p, d.dy3);
    Dr *= ac;
    gamma = std::min(1.0, max_step_blocks(P->S, P->factor, Dr));
  }

  // stage 3: ratio test on the full direction
  combine_directions(p, it, aux, d, gamma);
  double alpha = std::min(1.0, max_step(it.slack, d.dS));
  alpha = std::min(alpha, ratio_scalar(it.tau, d.dtau));
  d.alpha_c = ac;
  d.alpha = alpha;
  if (!(alpha >= 1e-10)) throw StepTooSmall();
}

void update_iterate(const SdpProblem& p, DualIterate& it, const NewtonDirections& d, const Params& params) {
  double s = params.step_fraction * d.alpha;
  for (int tries = 0; tries <= 10; ++tries, s *= 0.5) {
    const double tau = it.tau + s * d.dtau;
    double kappa = it.kappa + s * d.dkappa;
    if (!(tau > 0.0)) continue;
    // kappa is not in the ratio test; fall back to the central-path value
    if (!(kappa > 0.0)) kappa = it.mu / tau;
    BlockMatrix S = it.slack.S;
    if (s != 0.0) S.axpy(s, d.dS);
    auto slack = kkt::factor_slack(std::move(S));
    if (!slack) continue;
    it.y += s * d.dy;
    it.tau = tau;
    it.kappa = kappa;
    it.slack = std::move(*slack);
    it.R = dual_slack(p, it.y, it.tau);
    it.R -= it.slack.S;
    return;
  }
  throw StepTooSmall();
}

double update_mu(const SdpProblem& p, const DualIterate& it, const Params& params, double alpha, double gamma) {
  const double n = p.total_order();
  const double gap = std::isfinite(it.z) ? std::max(0.0, it.tau * it.z - p.b.dot(it.y)) : params.rho * n * it.mu;
  double mu = (gap + params.theta * frobenius_norm(it.R)) / (params.rho * n);
  if (params.mu_heuristics) {
    if (alpha >= 0.6 && gamma >= 0.9) mu /= params.rho;
    if (alpha < 0.1) mu = std::max(mu, it.mu);
  }
  return std::max(mu, 1e-18);
}

Status check_status(const SdpProblem& p, const DualIterate& it, const Params& params, const NewtonDirections* last) {
  const double rnorm = frobenius_norm(it.R);
  const double ef = params.eps_inf;
  if (rnorm > ef * it.tau && it.tau / it.kappa < ef && it.mu / it.mu0 <= ef * ef)
    return Status::PrimalUnboundedDualInfeasible;
  if (p.b.dot(it.y) / it.tau > 1.0 / ef) {
    if (recovery::verify_dual_ray(p, it.y) || (last && recovery::verify_dual_ray(p, last->dy)))
      return Status::PrimalInfeasibleDualUnbounded;
  }
  // the rescaled point (y / tau, C - A^T y / tau) is already dual feasible
  if (factor_blocks(dual_slack(p, it.y, it.tau))) return Status::SwitchPhaseB;
  return Status::Continue;
}

namespace {

// Accepts a PSD candidate whose A X is a positive multiple t b of b (up to a tight residual) and
// records X / t with its objective when it improves the best bound.
bool consider_candidate(const SdpProblem& p, BlockMatrix X, const Params& params, PrimalRecord& best, double& z) {
  const double bb = p.b.squaredNorm();
  if (!(bb > 0.0)) return false;
  const Vector ax = primal_map(p, X);
  const double t = ax.dot(p.b) / bb;
  if (!(t > 0.0) || !std::isfinite(t)) return false;
  const double bmax = p.b.cwiseAbs().maxCoeff();
  if ((ax / t - p.b).norm() > 0.1 * params.eps_feas * (1.0 + bmax)) return false;
  X *= 1.0 / t;
  const double obj = objective_dot(p, X);
  if (!std::isfinite(obj)) return false;
  if (obj < best.objective) {
    best.present = true;
    best.objective = obj;
    best.X = std::move(X);
  }
  z = std::min(z, obj);
  return true;
}

}  // namespace

Status phase_b_step(const SdpProblem& p, DualIterate& it, const Params& params, PhaseBWork& work,
                    PrimalRecord& best) {
  const double n = p.total_order();
  const double rho_pot = n + std::sqrt(n);
  const BlockMatrix& S = it.slack.S;

  kkt::AssembleOptions opts = work.assemble;
  opts.objective_terms = false;
  const kkt::SchurSystem sys = kkt::assemble_schur(*work.data, it.slack, nullptr, work.plans, opts);
  kkt::NormalSolver& normal = *work.normal;
  normal.factorize(sys.M);
  const Vector dy1 = normal.solve(p.b);
  const Vector dy2 = normal.solve(sys.aux.asinv);
  const double bty = p.b.dot(it.y);

  // primal bound from X(mu) = mu S^-1 (S + A^T(dy1/mu - dy2)) S^-1
  auto record = [&](double mu_try, const Factored& P) {
    consider_candidate(p, recovery::scaled_congruence(it.slack.inverse, P.S, mu_try), params, best, it.z);
  };
  {
    BlockMatrix W = S;
    W += adjoint_map(p, Vector(dy1 / it.mu - dy2));
    if (auto P = factor_blocks(std::move(W))) {
      record(it.mu, *P);
      // push 1/mu along A^T dy1 as far as positive definiteness allows
      const BlockMatrix D1 = adjoint_map(p, dy1);
      const double smax = max_step_blocks(P->S, P->factor, D1);
      const double t = std::isfinite(smax) ? 1.0 / it.mu + params.step_fraction * smax : 1e8 / it.mu;
      BlockMatrix W2 = P->S;
      W2.axpy(t - 1.0 / it.mu, D1);
      if (auto P2 = factor_blocks(std::move(W2))) record(1.0 / t, *P2);
    }
  }

  if (best.present) {
    // the stopping test uses the recorded X, never a bound without a witness
    const double gap = best.objective - bty;
    const bool relative = gap <= params.eps_opt * (1.0 + std::abs(best.objective) + std::abs(bty));
    const bool absolute = gap <= params.eps_opt * std::max(1.0, std::abs(bty));
    if (relative && absolute) return Status::Optimal;
  }
  if (std::isfinite(it.z)) {
    const double gap = it.z - bty;
    if (gap > 0.0) it.mu = std::max(gap / (params.rho * n), 1e-18);
  }

  if (bty > 1.0 / params.eps_inf && recovery::verify_dual_ray(p, it.y)) return Status::PrimalInfeasibleDualUnbounded;

  const double ztilde = std::isfinite(it.z) ? it.z : bty + params.rho * n * it.mu;
  auto potential = [&](double by, double logdet) {
    const double g = ztilde - by;
    return g > 0.0 ? rho_pot * std::log(g) - logdet : -kInf;
  };
  const double phi0 = potential(bty, it.slack.logdet);

  auto attempt = [&](double mu) -> bool {
    const Vector dy = dy1 / mu - dy2;
    BlockMatrix dS = adjoint_map(p, dy);
    dS *= -1.0;
    const double amax = max_step(it.slack, dS);
    double s = params.step_fraction * std::min(1.0, amax);
    if (!std::isfinite(amax)) s = 1.0;
    for (int k = 0; k < 12; ++k, s *= 0.5) {
      // S from its definition, so dual feasibility does not drift
      const Vector yn = it.y + s * dy;
      auto slack = kkt::factor_slack(dual_slack(p, yn, 1.0));
      if (!slack) continue;
      if (potential(p.b.dot(yn), slack->logdet) < phi0) {
        it.y = yn;
        it.slack = std::move(*slack);
        return true;
      }
    }
    return false;
  };
  if (attempt(it.mu)) return Status::Continue;
  // mu = gap / rho_pot makes the direction a descent direction for the potential
  const double mu_pot = (ztilde - bty) / rho_pot;
  if (mu_pot > 0.0 && attempt(mu_pot)) {
    it.mu = mu_pot;
    return Status::Continue;
  }
  return Status::Stalled;
}

SdpProblem with_dual_bounds(const SdpProblem& p, const Vector& lo, const Vector& hi) {
  SdpProblem q = p;
  const int m = p.m;
  q.blocks.push_back(-2 * m);
  for (int i = 0; i < m; ++i)
    q.A[i].push_back(CoeffMatrix::sparse(2 * m, {{i, i, 1.0}, {m + i, m + i, -1.0}}));
  std::vector<SparseEntry> c;
  for (int i = 0; i < m; ++i) {
    c.push_back({i, i, hi(i)});
    c.push_back({m + i, m + i, -lo(i)});
  }
  q.C.push_back(CoeffMatrix::sparse(2 * m, c));
  q.dual_bounds = std::make_pair(lo, hi);
  return q;
}

namespace {

// Projection candidate X'(mu) / tau at the current iterate, used when nothing was certified.
std::optional<recovery::PrimalCandidate> final_projection(const SdpProblem& q, const kkt::KktData& data,
                                                          const std::vector<kkt::RowPlan>& plans,
                                                          const DualIterate& it) {
  try {
    kkt::AssembleOptions opts;
    opts.objective_terms = false;
    const kkt::SchurSystem sys = kkt::assemble_schur(data, it.slack, nullptr, plans, opts);
    kkt::NormalSolver normal;
    normal.factorize(sys.M);
    auto c = recovery::recover_projection(q, it.slack, normal.solve(q.b), normal.solve(sys.aux.asinv), it.tau,
                                          it.mu);
    c.X *= 1.0 / it.tau;
    return c;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

BlockMatrix drop_last_block(const BlockMatrix& X) {
  std::vector<Block> blocks(X.blocks().begin(), X.blocks().end() - 1);
  return BlockMatrix(std::move(blocks));
}

}  // namespace

SolveResult solve(const SdpProblem& problem, const Params& params_in) {
  const auto t0 = Clock::now();
  SolveResult res;
  Params params = params_in;
  params.validate();
  problem.validate();

  presolve::PresolveResult pre;
  if (params.presolve) {
    pre = presolve::run(problem);
  } else {
    pre.problem = problem;
  }
  res.objective_scale = pre.objective_scale;
  res.structures = presolve::describe(pre.flags);
  if (pre.flags.empty_dual_interior) params.theta *= 10.0;

  const bool bounded = pre.flags.empty_primal_interior;
  SdpProblem q = bounded ? with_dual_bounds(pre.problem, Vector::Constant(problem.m, -params.dual_bound),
                                            Vector::Constant(problem.m, params.dual_bound))
                         : std::move(pre.problem);
  res.timings.presolve = seconds_since(t0);

  const kkt::KktData data(q);
  kkt::PlanOptions popts;
  popts.kappa_mem = params.kappa_mem;
  const std::vector<kkt::RowPlan> plans = kkt::plan_all(data, popts);
  kkt::AssembleOptions aopts;
  aopts.policy = params.serial ? kkt::ExecPolicy::Serial : kkt::ExecPolicy::Parallel;
  kkt::NormalSolver normal(params.use_pcg ? kkt::SolveMode::PCG : kkt::SolveMode::Direct);

  Status status = Status::Continue;
  PrimalRecord best;
  DualIterate it;
  const double n = q.total_order();
  auto out_of_time = [&] { return seconds_since(t0) > params.time_limit_seconds; };
  int iters = 0;

  try {
    it = initialize(q, params);
    if (pre.flags.implied_trace && *pre.flags.implied_trace > 0.0 && !bounded)
      it.z = *pre.flags.implied_trace * lambda_max_objective(q);

    // Phase A
    const auto ta = Clock::now();
    NewtonDirections last;
    bool have_last = false;
    // tau/kappa and residual part of the dual infeasibility rule, backed by a verified primal ray
    auto primal_ray_found = [&] {
      return it.tau / it.kappa < params.eps_inf && frobenius_norm(it.R) > params.eps_inf * it.tau &&
             best.present && recovery::verify_primal_ray(q, best.X);
    };
    while (true) {
      status = check_status(q, it, params, have_last ? &last : nullptr);
      if (status == Status::Continue && primal_ray_found()) status = Status::PrimalUnboundedDualInfeasible;
      if (status != Status::Continue) break;
      if (iters >= params.max_iters) {
        status = Status::IterLimit;
        break;
      }
      if (out_of_time()) {
        status = Status::TimeLimit;
        break;
      }
      ++iters;
      ++res.phase_a_iterations;
      kkt::SchurSystem sys = kkt::assemble_schur(data, it.slack, &it.R, plans, aopts);
      normal.factorize(sys.M);
      double alpha = 0.0, gamma = 0.0;
      bool stalled_on_ray = false;
      for (int round = 0; round <= params.corrector_rounds; ++round) {
        if (round > 0) {
          kkt::AssembleOptions o = aopts;
          o.form_m = false;
          sys.aux = kkt::assemble_schur(data, it.slack, &it.R, plans, o).aux;
        }
        NewtonDirections d = newton_embedding(q, it, sys.aux, normal, 1.0);
        if (round == 0) {
          // primal candidates X(mu) and X'(mu), verified explicitly
          const double tn = it.tau + d.dtau;
          BlockMatrix W = recovery::backward_matrix(q, it.slack.S, it.R, d.dy, d.dtau);
          if (tn > 0.0 && recovery::positive_definite(W))
            consider_candidate(q, recovery::scaled_congruence(it.slack.inverse, W, it.mu), params, best, it.z);
          W = it.slack.S;
          W += adjoint_map(q, Vector((it.tau / it.mu) * d.dy1 - d.dy2));
          if (recovery::positive_definite(W))
            consider_candidate(q, recovery::scaled_congruence(it.slack.inverse, W, it.mu), params, best, it.z);
        }
        try {
          choose_step(q, it, sys.aux, d);
          update_iterate(q, it, d, params);
        } catch (const StepTooSmall&) {
          if (round > 0) break;
          if (!primal_ray_found()) throw;
          stalled_on_ray = true;
          break;
        }
        alpha = d.alpha;
        gamma = d.gamma;
        last = std::move(d);
        have_last = true;
        if (factor_blocks(dual_slack(q, it.y, it.tau))) break;
      }
      if (stalled_on_ray) {
        status = Status::PrimalUnboundedDualInfeasible;
        break;
      }
      it.mu = update_mu(q, it, params, alpha, gamma);
      if (params.verbose > 0)
        std::fprintf(stderr, "A %3d  by/tau %+.6e  |R| %.2e  tau %.2e  kappa %.2e  mu %.2e  alpha %.2f  gamma %.2f\n",
                     iters, q.b.dot(it.y) / it.tau, frobenius_norm(it.R), it.tau, it.kappa, it.mu, alpha, gamma);
    }
    res.timings.phase_a = seconds_since(ta);

    if (status == Status::SwitchPhaseB) {
      const auto tb = Clock::now();
      const double tau = it.tau;
      it.y /= tau;
      auto slack = kkt::factor_slack(dual_slack(q, it.y, 1.0));
      if (!slack) throw linalg::SingularMatrix(0);
      it.slack = std::move(*slack);
      it.R = zero_like(q);
      it.mu = it.mu / (tau * tau);
      it.tau = 1.0;
      it.kappa = it.mu;
      if (std::isfinite(it.z)) it.mu = std::max(1e-18, (it.z - q.b.dot(it.y)) / (params.rho * n));

      PhaseBWork work{&data, plans, aopts, &normal};
      status = Status::Continue;
      while (status == Status::Continue) {
        if (iters >= params.max_iters) {
          status = Status::IterLimit;
          break;
        }
        if (out_of_time()) {
          status = Status::TimeLimit;
          break;
        }
        ++iters;
        ++res.phase_b_iterations;
        status = phase_b_step(q, it, params, work, best);
        if (params.verbose > 0)
          std::fprintf(stderr, "B %3d  by %+.10e  z %+.10e  mu %.2e\n", iters, q.b.dot(it.y), it.z, it.mu);
      }
      res.timings.phase_b = seconds_since(tb);
    }
  } catch (const std::exception& e) {
    if (params.verbose > 0) std::fprintf(stderr, "numerical failure: %s\n", e.what());
    status = Status::Stalled;
  }

  res.status = status;
  const double scale = pre.objective_scale;
  if (it.y.size() == problem.m) {
    res.y = scale * it.y / it.tau;
    BlockMatrix S = it.slack.S;
    S *= scale / it.tau;
    res.S = bounded ? drop_last_block(S) : S;
  }

  if (is_infeasibility(status)) {
    res.errors.fill(1.0);
    res.dual_objective = problem.b.dot(res.y);
  } else {
    if (best.present) {
      res.X = bounded ? drop_last_block(best.X) : best.X;
      res.psd_certified = true;
    } else if (it.slack.S.size() > 0) {
      if (auto c = final_projection(q, data, plans, it)) {
        res.X = bounded ? drop_last_block(c->X) : c->X;
        res.psd_certified = c->psd_certified;
      }
    }
    if (res.y.size() == problem.m) {
      const BlockMatrix* X = res.X.size() > 0 ? &res.X : nullptr;
      res.errors = recovery::dimacs_errors(problem, X, res.y, res.S);
      res.dual_objective = problem.b.dot(res.y);
      if (X) res.primal_objective = objective_dot(problem, *X);
    }
  }
  res.timings.total = seconds_since(t0);
  return res;
}

}  // namespace sdsolve::solver
