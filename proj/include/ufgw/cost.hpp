#pragma once

#include <Eigen/Dense>

namespace ufgw {

enum class CostKind { graph, semantic };

// Pairwise cost matrix for one domain. `normalization_mean` holds the raw-entry
// mean recorded when the matrix was mean-normalized (0 while unnormalized); the
// gradient chain needs it to undo the scaling.
struct CostMatrix {
  Eigen::MatrixXd values;
  double normalization_mean = 0.0;
  CostKind kind = CostKind::semantic;

  Eigen::Index size() const { return values.rows(); }
};

// C / (mean(C) + delta). Records the mean on the result.
CostMatrix mean_normalize(const CostMatrix& raw, double delta);

// Node distribution plus cost matrix; the transport-ready view of one domain.
struct MeasureSpace {
  CostMatrix cost;
  Eigen::VectorXd mu;
};

}  // namespace ufgw
