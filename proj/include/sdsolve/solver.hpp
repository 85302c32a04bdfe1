#pragma once

#include "sdsolve/kkt.hpp"
#include "sdsolve/model.hpp"
#include "sdsolve/presolve.hpp"
#include "sdsolve/recovery.hpp"

#include <array>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdsolve::solver {

struct Params {
  double rho = 4.0;
  double theta = 1e8;
  double eps_opt = 5e-6;
  double eps_feas = 5e-6;
  double eps_inf = 1e-8;
  double step_fraction = 0.95;
  int init_exponent = 3;
  int corrector_rounds = 4;
  int max_iters = 500;
  double time_limit_seconds = 3600.0;
  double kappa_mem = 3.0;
  double dual_bound = 1e7;  // |y_i| penalty box when the primal interior is empty
  bool use_pcg = false;
  bool presolve = true;
  bool mu_heuristics = true;
  bool serial = false;  // serial Schur assembly
  int verbose = 0;

  void validate() const;
};

// KEY=VALUE override by field name; throws std::invalid_argument.
void set_param(Params& params, const std::string& key, const std::string& value);
std::vector<std::string> param_names();

enum class Status {
  Continue,
  SwitchPhaseB,
  Optimal,
  PrimalUnboundedDualInfeasible,
  PrimalInfeasibleDualUnbounded,
  Stalled,
  IterLimit,
  TimeLimit
};
const char* to_string(Status s);
bool is_infeasibility(Status s);

class StepTooSmall : public std::runtime_error {
 public:
  StepTooSmall() : std::runtime_error("step length below 1e-10") {}
};

struct DualIterate {
  Vector y;
  double tau = 1.0;
  double kappa = 1.0;
  kkt::Slack slack;  // S with factors and inverse
  BlockMatrix R;     // C tau - A^T y - S
  double mu = 1.0;
  double mu0 = 1.0;
  double z = std::numeric_limits<double>::infinity();  // best primal bound, original units
};

struct NewtonDirections {
  Vector dy1, dy2, dy3, dy4;
  Vector dy;
  double dtau = 0.0;
  double dkappa = 0.0;
  BlockMatrix dS;
  double gamma = 0.0;
  double alpha_c = 0.0;
  double alpha = 0.0;
};

// Largest alpha with S + alpha dS >= 0 over all blocks (+inf when none binds).
double max_step(const kkt::Slack& slack, const BlockMatrix& dS);

DualIterate initialize(const SdpProblem& p, const Params& params);

// Solves for dy1..dy4 with the factored M, then assembles (dy, dtau, dS) at the given gamma.
NewtonDirections newton_embedding(const SdpProblem& p, const DualIterate& it, const kkt::Aux& aux,
                                  kkt::NormalSolver& normal, double gamma);
NewtonDirections newton_embedding(const SdpProblem& p, const DualIterate& it, const kkt::SchurSystem& schur,
                                  double gamma);
// Re-assembles dy, dtau, dkappa, dS for a new gamma from the stored dy1..dy4.
void combine_directions(const SdpProblem& p, const DualIterate& it, const kkt::Aux& aux, NewtonDirections& d,
                        double gamma);

// Three-stage step: centrality alpha_c, damping gamma, ratio test alpha (undamped).
// Throws StepTooSmall.
void choose_step(const SdpProblem& p, const DualIterate& it, const kkt::Aux& aux, NewtonDirections& d);

// y, tau, kappa advanced by step_fraction * alpha; S refactored, R recomputed. Throws StepTooSmall.
void update_iterate(const SdpProblem& p, DualIterate& it, const NewtonDirections& d, const Params& params);

double update_mu(const SdpProblem& p, const DualIterate& it, const Params& params, double alpha, double gamma);

Status check_status(const SdpProblem& p, const DualIterate& it, const Params& params,
                    const NewtonDirections* last = nullptr);

// Best certified primal point in original units.
struct PrimalRecord {
  bool present = false;
  BlockMatrix X;
  double objective = std::numeric_limits<double>::infinity();
};

struct PhaseBWork {
  const kkt::KktData* data = nullptr;
  std::vector<kkt::RowPlan> plans;
  kkt::AssembleOptions assemble;
  kkt::NormalSolver* normal = nullptr;
};

// One feasible dual-scaling step (tau = 1, R = 0). Returns Continue, Optimal, Stalled or
// PrimalInfeasibleDualUnbounded.
Status phase_b_step(const SdpProblem& p, DualIterate& it, const Params& params, PhaseBWork& work,
                    PrimalRecord& best);

struct Timings {
  double presolve = 0.0;
  double phase_a = 0.0;
  double phase_b = 0.0;
  double total = 0.0;
};

struct SolveResult {
  Status status = Status::Continue;
  double primal_objective = std::numeric_limits<double>::quiet_NaN();  // <C, X>
  double dual_objective = std::numeric_limits<double>::quiet_NaN();    // b^T y
  BlockMatrix X;
  Vector y;
  BlockMatrix S;
  bool psd_certified = false;
  std::array<double, 6> errors{};
  int phase_a_iterations = 0;
  int phase_b_iterations = 0;
  double objective_scale = 1.0;
  std::string structures;
  Timings timings;
};

// Never throws for numerical failures; they surface as Stalled.
SolveResult solve(const SdpProblem& problem, const Params& params = {});

// The internal problem after the dual penalty box is appended (extra diagonal block of order 2m).
SdpProblem with_dual_bounds(const SdpProblem& p, const Vector& lo, const Vector& hi);

}  // namespace sdsolve::solver
