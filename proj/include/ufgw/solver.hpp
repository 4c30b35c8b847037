#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "ufgw/cost.hpp"

namespace ufgw {

struct UfgwConfig {
  double alpha = 0.6;    // structural weight in [0, 1]
  double rho = 0.1;      // KL marginal-relaxation coefficient
  double epsilon = 0.05; // entropic smoothing coefficient
  double tau = 0.5;      // anchor threshold (off-diagonal prior cost)
  int sinkhorn_iters = 20;
  int bcd_iters = 10;
  double tol = 1e-9;     // inner tolerance on log-scaling change

  // Relaxation factor on the linearization point between outer iterations.
  // 1 is the plain fixed-point iteration, which can 2-cycle on the indefinite
  // quadratic; 0.5 damps it out.
  double bcd_damping = 0.5;

  // Node classification cutoffs (relative to mu_i).
  double anchor_mass_frac = 0.8;
  double anchor_diag_share = 0.5;
  double reject_mass_frac = 0.2;

  void validate() const;
};

struct TransportPlan {
  Eigen::MatrixXd pi;   // nonnegative coupling, pi = diag(u) K diag(v)
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  bool converged = false;
  double final_residual = 0.0;
  int iterations = 0;
};

enum class NodeClass { anchor, smoothed, rejected };

struct UfgwReport {
  double loss_linear = 0.0;     // <M, pi>
  double loss_quadratic = 0.0;  // exact relational term, O(n^3) evaluation
  double loss_kl = 0.0;         // rho * (KL(r|mu) + KL(c|nu))
  double loss_entropy = 0.0;    // entropic penalty sum(pi log pi - pi + 1)
  double loss_total = 0.0;
  double loss_quadratic_linearized = 0.0;  // <2 Cm pi Cg^T, pi> at the final plan
  double plan_entropy = 0.0;               // -sum pi log pi, diagnostic only
  Eigen::VectorXd row_mass;
  Eigen::VectorXd col_mass;
  std::vector<NodeClass> node_class;
  std::vector<double> loss_history;  // loss_total after each BCD outer iteration
  int bcd_iterations = 0;
};

// Prior cost matrix: zero diagonal, tau off-diagonal.
Eigen::MatrixXd anchor_matrix(Eigen::Index n, double tau);

// Cost matrix of the linear transport subproblem obtained by freezing the plan
// in the quadratic relational term:
//   G = (1-alpha) M + alpha * (2 (Cm.^2 r) 1^T + 2 1 (Cg.^2 c)^T - 4 Cm pi Cg^T)
// with r = pi 1, c = pi^T 1. The bracket is the exact gradient of the
// relational term at pi.
Eigen::MatrixXd linearized_gradient(const CostMatrix& cm, const CostMatrix& cg,
                                    const Eigen::MatrixXd& anchor,
                                    const Eigen::MatrixXd& pi, double alpha);

// Diagonal-scaling iterations for KL-relaxed entropic transport:
//   K = exp(-G/eps),  u <- (mu/(K v))^(rho/(rho+eps)),  v <- (nu/(K^T u))^...
// Runs in the log domain when eps < 0.1 or the kernel would underflow.
// Stops when max |log u - log u_prev| < tol or after `iters` updates.
TransportPlan unbalanced_sinkhorn(const Eigen::MatrixXd& g_cost, const Eigen::VectorXd& mu,
                                  const Eigen::VectorXd& nu, double rho, double epsilon,
                                  int iters, double tol);

struct UfgwLosses {
  double linear = 0.0;
  double quadratic = 0.0;
  double kl = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double quadratic_linearized = 0.0;
  double plan_entropy = 0.0;
};

// Evaluates every term of the objective at a fixed plan.
UfgwLosses ufgw_loss_breakdown(const CostMatrix& cm, const CostMatrix& cg,
                               const Eigen::MatrixXd& anchor, const Eigen::MatrixXd& pi,
                               const Eigen::VectorXd& mu, const Eigen::VectorXd& nu,
                               const UfgwConfig& cfg);

// Full solve: block coordinate descent with damped linearization points and
// unbalanced Sinkhorn inner solves, starting from the product coupling
// mu nu^T. Returns the best iterate by loss_total.
std::pair<TransportPlan, UfgwReport> solve_ufgw(const MeasureSpace& semantic,
                                                const MeasureSpace& graph,
                                                const UfgwConfig& cfg);

struct MassDiagnostics {
  Eigen::VectorXd cost_per_node;       // c_i, mass-weighted average row cost
  Eigen::VectorXd row_mass;            // r_i
  Eigen::VectorXd predicted_row_mass;  // mu_i exp(-c_i/rho), rescaled to sum(r)
};

// Per-node view of the mass equilibrium r_i ~ mu_i exp(-c_i/rho).
MassDiagnostics mass_equilibrium_diagnostics(const TransportPlan& plan,
                                             const Eigen::MatrixXd& g_cost,
                                             const Eigen::VectorXd& mu, double rho);

std::vector<NodeClass> classify_nodes(const Eigen::MatrixXd& pi, const Eigen::VectorXd& mu,
                                      const UfgwConfig& cfg);

const char* node_class_name(NodeClass c);

}  // namespace ufgw
