#pragma once

#include <Eigen/Dense>
#include <string>

#include "ufgw/cost.hpp"
#include "ufgw/graph.hpp"

namespace ufgw {

// Dense personalized-PageRank diffusion matrix beta * (I - (1-beta) * Awalk)^-1.
// Rows sum to 1; every entry is a diffusion probability; the diagonal is >= beta.
struct PprMatrix {
  Eigen::MatrixXd values;
  double beta = 0.0;
};

// Direct dense solve. The system matrix is strictly row diagonally dominant for
// beta in (0,1), so the LU factorization cannot fail.
PprMatrix compute_ppr(const Graph& g, double beta);

// Fixed-point fallback for graphs too large to solve densely: iterates
// P <- beta*I + (1-beta) * Awalk * P using the sparse adjacency until the
// Neumann-tail bound (1-beta)^k drops below tol.
PprMatrix compute_ppr_power(const Graph& g, double beta, double tol = 1e-8);

// Extracts the batch submatrix of diffusion probabilities, converts to distances
// via -log(S + delta), clamps the (at most delta-sized) negative drift at 0, and
// mean-normalizes. kind = graph.
CostMatrix graph_cost_for_batch(const PprMatrix& ppr, const BatchSample& batch, double delta);

// Cache file: magic "PPR1", N: u64, beta: f64, then N*N float64 row-major,
// little-endian.
void save_ppr_cache(const PprMatrix& ppr, const std::string& path);
PprMatrix load_ppr_cache(const std::string& path);

}  // namespace ufgw
