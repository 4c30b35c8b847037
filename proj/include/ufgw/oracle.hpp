#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "ufgw/cost.hpp"
#include "ufgw/solver.hpp"

namespace ufgw::oracle {

// Brute-force references for the test suites. Deliberately slow, hard size
// limits, loop-level implementations independent of the production solver.

struct ExactOtSolution {
  Eigen::MatrixXd plan;
  double cost = 0.0;
};

// Exact balanced transport LP via the transportation simplex (northwest-corner
// start, dual-based pivoting). Requires n*m <= 64 and matching total masses.
ExactOtSolution exact_linear_ot(const Eigen::MatrixXd& cost, const Eigen::VectorXd& mu,
                                const Eigen::VectorXd& nu);

struct GwPermutationResult {
  std::vector<int> permutation;
  double value = 0.0;
};

// Minimizes sum_{ik} |C1(i,k) - C2(s(i),s(k))|^2 / n^2 over all permutations s.
// A restriction of the relational objective to permutation plans with uniform
// measures; exact when an isometry exists. Requires n <= 7.
GwPermutationResult exhaustive_gw(const Eigen::MatrixXd& c1, const Eigen::MatrixXd& c2,
                                  const Eigen::VectorXd& mu, const Eigen::VectorXd& nu);

// Best objective value found by projected gradient descent on pi >= 0 from
// `restarts` random nonnegative starts, evaluating the exact O(n^4) relational
// tensor. Structurally independent reference for solve_ufgw. Requires n <= 6.
double reference_ufgw(const MeasureSpace& semantic, const MeasureSpace& graph,
                      const UfgwConfig& cfg, int restarts = 50, int iters = 3000,
                      double step = 2e-3, std::uint64_t seed = 20240901);

}  // namespace ufgw::oracle
