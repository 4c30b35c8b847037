#pragma once

#include <Eigen/Dense>

#include "ufgw/cost.hpp"
#include "ufgw/semantic.hpp"
#include "ufgw/solver.hpp"

namespace ufgw {

struct RegGradient {
  Eigen::MatrixXd d_cost;        // dL/dCm_bar, n x n
  Eigen::MatrixXd d_embeddings;  // dL/dH, n x d
};

// Gradient of the (alpha-weighted) relational term with the plan held constant:
//   dL/dCm_bar = 2 alpha (r r^T .* Cm_bar - pi Cg_bar pi^T),  r = pi 1.
// The anchor, KL and entropic terms do not depend on Cm_bar, so with the plan
// detached this is the entire regularizer gradient in cost space.
Eigen::MatrixXd grad_wrt_cost(const CostMatrix& cm, const CostMatrix& cg,
                              const TransportPlan& pi_detached, double alpha);

// Chains d_cost back through the mean normalization and the cosine distance to
// the embedding rows. `normalization_mean` is the raw-cost mean recorded by the
// normalization step; the raw cosine matrix is recomputed from `emb`.
Eigen::MatrixXd grad_wrt_embeddings(const EmbeddingMatrix& emb, const Eigen::MatrixXd& d_cost,
                                    double normalization_mean, double delta);

}  // namespace ufgw
