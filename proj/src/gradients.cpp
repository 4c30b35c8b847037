#include "ufgw/gradients.hpp"

#include <cmath>
#include <string>

#include "ufgw/errors.hpp"

namespace ufgw {

Eigen::MatrixXd grad_wrt_cost(const CostMatrix& cm, const CostMatrix& cg,
                              const TransportPlan& pi_detached, double alpha) {
  const auto n = cm.values.rows();
  if (cg.values.rows() != n || pi_detached.pi.rows() != n || pi_detached.pi.cols() != n) {
    throw InternalError("grad_wrt_cost: dimension mismatch");
  }
  const Eigen::MatrixXd& pi = pi_detached.pi;
  const Eigen::VectorXd r = pi.rowwise().sum();
  return 2.0 * alpha *
         ((r * r.transpose()).cwiseProduct(cm.values) - pi * cg.values * pi.transpose());
}

Eigen::MatrixXd grad_wrt_embeddings(const EmbeddingMatrix& emb, const Eigen::MatrixXd& d_cost,
                                    double normalization_mean, double delta) {
  const auto n = emb.rows();
  if (d_cost.rows() != n || d_cost.cols() != n) {
    throw InternalError("grad_wrt_embeddings: d_cost must be n x n for n embedding rows");
  }
  if (!d_cost.allFinite()) {
    throw ValidationError("d_cost contains non-finite entries");
  }
  Eigen::VectorXd norms = emb.values.rowwise().norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms(i) == 0.0) {
      throw ValidationError("embedding row " + std::to_string(i) + " is the zero vector");
    }
  }
  norms = norms.cwiseMax(1e-12);
  const Eigen::MatrixXd unit = emb.values.array().colwise() / norms.array();
  Eigen::MatrixXd cos_sim = unit * unit.transpose();

  // Undo the mean normalization: Cbar = C / s with s = mean(C) + delta, so
  //   dL/dC_pq = d_cost_pq / s - <d_cost, C> / (n^2 s^2).
  const double s = normalization_mean + delta;
  Eigen::MatrixXd raw_cost = (1.0 - cos_sim.array()).cwiseMax(0.0).cwiseMin(2.0);
  raw_cost.diagonal().setZero();
  const double inner = d_cost.cwiseProduct(raw_cost).sum();
  const double offset = inner / (static_cast<double>(n) * static_cast<double>(n) * s * s);
  Eigen::MatrixXd d_raw = d_cost / s;
  d_raw.array() -= offset;

  // Cosine chain. For p != q,
  //   dC_pq/dh_p = cos_pq h_p/|h_p|^2 - h_q/(|h_p||h_q|),
  // and the diagonal is identically zero. Fold d_raw_pq + d_raw_qp into one
  // symmetric weight per pair.
  Eigen::MatrixXd w = d_raw + d_raw.transpose();
  w.diagonal().setZero();
  Eigen::MatrixXd d_emb(n, emb.dim());
  for (Eigen::Index p = 0; p < n; ++p) {
    const double self_coef = w.row(p).dot(cos_sim.row(p)) / (norms(p) * norms(p));
    Eigen::RowVectorXd cross = (w.row(p).array() / (norms(p) * norms.transpose().array()));
    d_emb.row(p) = self_coef * emb.values.row(p) - cross * emb.values;
  }
  return d_emb;
}

}  // namespace ufgw
