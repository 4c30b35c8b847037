#include "ufgw/solver.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ufgw/errors.hpp"

namespace ufgw {

void UfgwConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  if (!(rho > 0.0)) throw ValidationError("rho must be positive");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  if (!(tau > 0.0)) throw ValidationError("tau must be positive");
  if (sinkhorn_iters < 1) throw ValidationError("sinkhorn_iters must be >= 1");
  if (bcd_iters < 1) throw ValidationError("bcd_iters must be >= 1");
  if (!(tol > 0.0)) throw ValidationError("tol must be positive");
  if (!(bcd_damping > 0.0 && bcd_damping <= 1.0)) {
    throw ValidationError("bcd_damping must lie in (0, 1]");
  }
}

Eigen::MatrixXd anchor_matrix(Eigen::Index n, double tau) {
  if (!(tau > 0.0)) throw ValidationError("tau must be positive");
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, tau);
  m.diagonal().setZero();
  return m;
}

Eigen::MatrixXd linearized_gradient(const CostMatrix& cm, const CostMatrix& cg,
                                    const Eigen::MatrixXd& anchor,
                                    const Eigen::MatrixXd& pi, double alpha) {
  const auto n = cm.values.rows();
  if (cg.values.rows() != n || anchor.rows() != n || pi.rows() != n ||
      cg.values.cols() != n || anchor.cols() != n || pi.cols() != n) {
    throw InternalError("linearized_gradient: dimension mismatch");
  }
  const Eigen::VectorXd r = pi.rowwise().sum();
  const Eigen::VectorXd c = pi.colwise().sum().transpose();
  Eigen::MatrixXd grad =
      2.0 * (cm.values.cwiseProduct(cm.values) * r).replicate(1, n) +
      2.0 * (cg.values.cwiseProduct(cg.values) * c).transpose().replicate(n, 1) -
      4.0 * cm.values * pi * cg.values.transpose();
  return (1.0 - alpha) * anchor + alpha * grad;
}

namespace {

// log(sum_j exp(l(i,j) + add(j))) for every row i; `add` broadcast over columns.
Eigen::VectorXd log_sum_exp_rows(const Eigen::MatrixXd& l, const Eigen::VectorXd& add) {
  const auto n = l.rows();
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < l.cols(); ++j) {
      m = std::max(m, l(i, j) + add(j));
    }
    double s = 0.0;
    for (Eigen::Index j = 0; j < l.cols(); ++j) {
      s += std::exp(l(i, j) + add(j) - m);
    }
    out(i) = m + std::log(s);
  }
  return out;
}

Eigen::VectorXd log_sum_exp_cols(const Eigen::MatrixXd& l, const Eigen::VectorXd& add) {
  const auto m_cols = l.cols();
  Eigen::VectorXd out(m_cols);
  for (Eigen::Index j = 0; j < m_cols; ++j) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
      m = std::max(m, l(i, j) + add(i));
    }
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
      s += std::exp(l(i, j) + add(i) - m);
    }
    out(j) = m + std::log(s);
  }
  return out;
}

TransportPlan sinkhorn_log_domain(const Eigen::MatrixXd& g_cost, const Eigen::VectorXd& mu,
                                  const Eigen::VectorXd& nu, double rho, double epsilon,
                                  int iters, double tol) {
  const auto n = g_cost.rows();
  const auto m = g_cost.cols();
  const double fexp = rho / (rho + epsilon);
  const Eigen::MatrixXd logk = -g_cost / epsilon;
  const Eigen::VectorXd log_mu = mu.array().log();
  const Eigen::VectorXd log_nu = nu.array().log();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m);

  TransportPlan plan;
  plan.final_residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd f_old = f;
    f = fexp * (log_mu - log_sum_exp_rows(logk, g));
    g = fexp * (log_nu - log_sum_exp_cols(logk, f));
    plan.iterations = it + 1;
    plan.final_residual = (f - f_old).cwiseAbs().maxCoeff();
    if (plan.final_residual < tol) {
      plan.converged = true;
      break;
    }
  }
  plan.pi = (logk.colwise() + f).rowwise() + g.transpose();
  plan.pi = plan.pi.array().exp();
  plan.u = f.array().exp();
  plan.v = g.array().exp();
  return plan;
}

TransportPlan sinkhorn_plain(const Eigen::MatrixXd& g_cost, const Eigen::VectorXd& mu,
                             const Eigen::VectorXd& nu, double rho, double epsilon,
                             int iters, double tol) {
  const auto n = g_cost.rows();
  const auto m = g_cost.cols();
  const double fexp = rho / (rho + epsilon);
  const Eigen::MatrixXd kernel = (-g_cost / epsilon).array().exp();
  if (kernel.maxCoeff() <= 0.0) {
    throw NumericalError("Gibbs kernel underflowed to zero; G/epsilon spans [" +
                         std::to_string((g_cost / epsilon).minCoeff()) + ", " +
                         std::to_string((g_cost / epsilon).maxCoeff()) + "]");
  }
  Eigen::VectorXd u = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m);
  TransportPlan plan;
  plan.final_residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd u_old = u;
    u = (mu.array() / (kernel * v).array()).pow(fexp);
    v = (nu.array() / (kernel.transpose() * u).array()).pow(fexp);
    if (!u.allFinite() || !v.allFinite()) {
      throw NumericalError("Sinkhorn scalings diverged; G/epsilon spans [" +
                           std::to_string((g_cost / epsilon).minCoeff()) + ", " +
                           std::to_string((g_cost / epsilon).maxCoeff()) + "]");
    }
    plan.iterations = it + 1;
    plan.final_residual = (u.array() / u_old.array()).log().abs().maxCoeff();
    if (plan.final_residual < tol) {
      plan.converged = true;
      break;
    }
  }
  plan.pi = u.asDiagonal() * kernel * v.asDiagonal();
  plan.u = std::move(u);
  plan.v = std::move(v);
  return plan;
}

void check_plan_reconstruction(const TransportPlan& plan, const Eigen::MatrixXd& g_cost,
                               double epsilon) {
  // Only checkable when the kernel itself is representable.
  if ((g_cost / epsilon).cwiseAbs().maxCoeff() > 500.0) return;
  if (!plan.u.allFinite() || !plan.v.allFinite()) return;
  const Eigen::MatrixXd kernel = (-g_cost / epsilon).array().exp();
  const Eigen::MatrixXd recon = plan.u.asDiagonal() * kernel * plan.v.asDiagonal();
  if ((recon - plan.pi).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, plan.pi.maxCoeff())) {
    throw InternalError("transport plan does not reconstruct from diag(u) K diag(v)");
  }
}

double generalized_kl(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) > 0.0) {
      s += a(i) * std::log(a(i) / b(i)) - a(i) + b(i);
    } else {
      s += b(i);
    }
  }
  return s;
}

// sum(pi log pi - pi + 1); the entropic penalty the scaling iterations minimize.
double entropic_penalty(const Eigen::MatrixXd& pi) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < pi.cols(); ++j) {
    for (Eigen::Index i = 0; i < pi.rows(); ++i) {
      const double x = pi(i, j);
      s += x > 0.0 ? x * std::log(x) - x + 1.0 : 1.0;
    }
  }
  return s;
}

double shannon_entropy(const Eigen::MatrixXd& pi) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < pi.cols(); ++j) {
    for (Eigen::Index i = 0; i < pi.rows(); ++i) {
      const double x = pi(i, j);
      if (x > 0.0) s -= x * std::log(x);
    }
  }
  return s;
}

}  // namespace

TransportPlan unbalanced_sinkhorn(const Eigen::MatrixXd& g_cost, const Eigen::VectorXd& mu,
                                  const Eigen::VectorXd& nu, double rho, double epsilon,
                                  int iters, double tol) {
  if (g_cost.rows() != mu.size() || g_cost.cols() != nu.size()) {
    throw InternalError("unbalanced_sinkhorn: dimension mismatch");
  }
  if (!(rho > 0.0) || !(epsilon > 0.0)) {
    throw ValidationError("rho and epsilon must be positive");
  }
  if ((mu.array() <= 0.0).any() || (nu.array() <= 0.0).any()) {
    throw ValidationError("measures must be entrywise positive");
  }
  const bool use_log =
      epsilon < 0.1 || (g_cost / epsilon).cwiseAbs().maxCoeff() > 500.0;
  TransportPlan plan = use_log ? sinkhorn_log_domain(g_cost, mu, nu, rho, epsilon, iters, tol)
                               : sinkhorn_plain(g_cost, mu, nu, rho, epsilon, iters, tol);
  if (!plan.pi.allFinite()) {
    throw NumericalError("transport plan contains non-finite entries");
  }
  if (plan.pi.maxCoeff() <= 0.0) {
    throw NumericalError("transport plan underflowed to all zeros; G/epsilon spans [" +
                         std::to_string((g_cost / epsilon).minCoeff()) + ", " +
                         std::to_string((g_cost / epsilon).maxCoeff()) + "]");
  }
  check_plan_reconstruction(plan, g_cost, epsilon);
  return plan;
}

UfgwLosses ufgw_loss_breakdown(const CostMatrix& cm, const CostMatrix& cg,
                               const Eigen::MatrixXd& anchor, const Eigen::MatrixXd& pi,
                               const Eigen::VectorXd& mu, const Eigen::VectorXd& nu,
                               const UfgwConfig& cfg) {
  UfgwLosses l;
  const Eigen::VectorXd r = pi.rowwise().sum();
  const Eigen::VectorXd c = pi.colwise().sum().transpose();
  const Eigen::MatrixXd cross = cm.values * pi * cg.values.transpose();
  l.linear = anchor.cwiseProduct(pi).sum();
  l.quadratic = r.dot(cm.values.cwiseProduct(cm.values) * r) +
                c.dot(cg.values.cwiseProduct(cg.values) * c) -
                2.0 * pi.cwiseProduct(cross).sum();
  l.quadratic_linearized = 2.0 * pi.cwiseProduct(cross).sum();
  l.kl = cfg.rho * (generalized_kl(r, mu) + generalized_kl(c, nu));
  l.entropy = entropic_penalty(pi);
  l.plan_entropy = shannon_entropy(pi);
  l.total = (1.0 - cfg.alpha) * l.linear + cfg.alpha * l.quadratic + l.kl +
            cfg.epsilon * l.entropy;
  return l;
}

std::vector<NodeClass> classify_nodes(const Eigen::MatrixXd& pi, const Eigen::VectorXd& mu,
                                      const UfgwConfig& cfg) {
  const auto n = pi.rows();
  std::vector<NodeClass> cls(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = pi.row(i).sum();
    const double diag_share = r > 0.0 ? pi(i, i) / r : 0.0;
    if (r < cfg.reject_mass_frac * mu(i)) {
      cls[static_cast<std::size_t>(i)] = NodeClass::rejected;
    } else if (r >= cfg.anchor_mass_frac * mu(i) && diag_share >= cfg.anchor_diag_share) {
      cls[static_cast<std::size_t>(i)] = NodeClass::anchor;
    } else {
      cls[static_cast<std::size_t>(i)] = NodeClass::smoothed;
    }
  }
  return cls;
}

const char* node_class_name(NodeClass c) {
  switch (c) {
    case NodeClass::anchor: return "anchor";
    case NodeClass::smoothed: return "smoothed";
    case NodeClass::rejected: return "rejected";
  }
  return "?";
}

std::pair<TransportPlan, UfgwReport> solve_ufgw(const MeasureSpace& semantic,
                                                const MeasureSpace& graph,
                                                const UfgwConfig& cfg) {
  cfg.validate();
  const auto n = semantic.cost.values.rows();
  if (graph.cost.values.rows() != n) {
    throw ValidationError("semantic and graph spaces have different sizes");
  }
  const Eigen::MatrixXd anchor = anchor_matrix(n, cfg.tau);
  const Eigen::VectorXd& mu = semantic.mu;
  const Eigen::VectorXd& nu = graph.mu;

  // Linearization point; the product coupling is the standard warm start and is
  // permutation-equivariant.
  Eigen::MatrixXd z = mu * nu.transpose();

  constexpr double kOuterLossTol = 1e-7;
  UfgwReport report;
  TransportPlan best_plan;
  UfgwLosses best_losses;
  double best_total = std::numeric_limits<double>::infinity();
  double prev_total = std::numeric_limits<double>::quiet_NaN();

  for (int k = 0; k < cfg.bcd_iters; ++k) {
    const Eigen::MatrixXd g_cost = linearized_gradient(semantic.cost, graph.cost, anchor, z,
                                                       cfg.alpha);
    TransportPlan plan = unbalanced_sinkhorn(g_cost, mu, nu, cfg.rho, cfg.epsilon,
                                             cfg.sinkhorn_iters, cfg.tol);
    const UfgwLosses losses =
        ufgw_loss_breakdown(semantic.cost, graph.cost, anchor, plan.pi, mu, nu, cfg);
    if (!std::isfinite(losses.total)) {
      throw NumericalError(
          "non-finite loss at BCD iteration " + std::to_string(k) +
          ": linear=" + std::to_string(losses.linear) +
          " quadratic=" + std::to_string(losses.quadratic) + " kl=" + std::to_string(losses.kl) +
          " entropy=" + std::to_string(losses.entropy));
    }
    report.loss_history.push_back(losses.total);
    report.bcd_iterations = k + 1;
    if (losses.total < best_total) {
      best_total = losses.total;
      best_plan = std::move(plan);
      best_losses = losses;
      z = (1.0 - cfg.bcd_damping) * z + cfg.bcd_damping * best_plan.pi;
    } else {
      z = (1.0 - cfg.bcd_damping) * z + cfg.bcd_damping * plan.pi;
    }
    if (k > 0 && std::abs(losses.total - prev_total) < kOuterLossTol) break;
    prev_total = losses.total;
  }

  report.loss_linear = best_losses.linear;
  report.loss_quadratic = best_losses.quadratic;
  report.loss_kl = best_losses.kl;
  report.loss_entropy = best_losses.entropy;
  report.loss_total = best_losses.total;
  report.loss_quadratic_linearized = best_losses.quadratic_linearized;
  report.plan_entropy = best_losses.plan_entropy;
  report.row_mass = best_plan.pi.rowwise().sum();
  report.col_mass = best_plan.pi.colwise().sum().transpose();
  report.node_class = classify_nodes(best_plan.pi, mu, cfg);
  return {std::move(best_plan), std::move(report)};
}

MassDiagnostics mass_equilibrium_diagnostics(const TransportPlan& plan,
                                             const Eigen::MatrixXd& g_cost,
                                             const Eigen::VectorXd& mu, double rho) {
  if (!plan.pi.allFinite()) {
    throw ValidationError("plan contains non-finite entries");
  }
  const auto n = plan.pi.rows();
  MassDiagnostics diag;
  diag.row_mass = plan.pi.rowwise().sum();
  diag.cost_per_node.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    diag.cost_per_node(i) =
        plan.pi.row(i).dot(g_cost.row(i)) / std::max(diag.row_mass(i), 1e-30);
  }
  diag.predicted_row_mass =
      mu.array() * (-diag.cost_per_node.array() / rho).exp();
  const double pred_sum = diag.predicted_row_mass.sum();
  if (pred_sum > 0.0) {
    diag.predicted_row_mass *= diag.row_mass.sum() / pred_sum;
  }
  return diag;
}

}  // namespace ufgw
