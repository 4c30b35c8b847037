#include "ufgw/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ufgw/errors.hpp"
#include "ufgw/rng.hpp"

namespace ufgw::oracle {

namespace {

struct Cell {
  int row;
  int col;
};

// Dual potentials over the spanning-tree basis: u_i + v_j = cost(i,j) on basic
// cells, anchored at u_0 = 0.
void compute_duals(const Eigen::MatrixXd& cost, const std::vector<std::vector<char>>& basic,
                   std::vector<double>& u, std::vector<double>& v) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  std::vector<char> row_done(n, 0), col_done(m, 0);
  u.assign(n, 0.0);
  v.assign(m, 0.0);
  row_done[0] = 1;
  bool progress = true;
  while (progress) {
    progress = false;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        if (!basic[i][j]) continue;
        if (row_done[i] && !col_done[j]) {
          v[j] = cost(i, j) - u[i];
          col_done[j] = 1;
          progress = true;
        } else if (col_done[j] && !row_done[i]) {
          u[i] = cost(i, j) - v[j];
          row_done[i] = 1;
          progress = true;
        }
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!row_done[i]) throw InternalError("transportation basis is not a spanning tree");
  }
  for (int j = 0; j < m; ++j) {
    if (!col_done[j]) throw InternalError("transportation basis is not a spanning tree");
  }
}

// Unique tree path from row vertex r0 to column vertex c0 through basic cells.
// Returned as the cell sequence along the path.
std::vector<Cell> tree_path(int n, int m, const std::vector<std::vector<char>>& basic,
                            int r0, int c0) {
  // vertices: rows [0, n), cols [n, n+m)
  const int total = n + m;
  std::vector<int> parent_vertex(total, -1);
  std::vector<Cell> parent_cell(total, {-1, -1});
  std::vector<char> seen(total, 0);
  std::vector<int> queue = {r0};
  seen[r0] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int x = queue[head];
    if (x == n + c0) break;
    if (x < n) {
      for (int j = 0; j < m; ++j) {
        if (basic[x][j] && !seen[n + j]) {
          seen[n + j] = 1;
          parent_vertex[n + j] = x;
          parent_cell[n + j] = {x, j};
          queue.push_back(n + j);
        }
      }
    } else {
      const int j = x - n;
      for (int i = 0; i < n; ++i) {
        if (basic[i][j] && !seen[i]) {
          seen[i] = 1;
          parent_vertex[i] = x;
          parent_cell[i] = {i, j};
          queue.push_back(i);
        }
      }
    }
  }
  if (!seen[n + c0]) throw InternalError("transportation basis lost connectivity");
  std::vector<Cell> path;
  for (int x = n + c0; x != r0; x = parent_vertex[x]) {
    path.push_back(parent_cell[x]);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

ExactOtSolution exact_linear_ot(const Eigen::MatrixXd& cost, const Eigen::VectorXd& mu,
                                const Eigen::VectorXd& nu) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n * m > 64) {
    throw ValidationError("exact_linear_ot is limited to n*m <= 64");
  }
  if (mu.size() != n || nu.size() != m) {
    throw ValidationError("marginal sizes do not match the cost matrix");
  }
  if (std::abs(mu.sum() - nu.sum()) > 1e-12) {
    throw ValidationError("infeasible marginals: total masses differ by more than 1e-12");
  }

  Eigen::MatrixXd plan = Eigen::MatrixXd::Zero(n, m);
  std::vector<std::vector<char>> basic(n, std::vector<char>(m, 0));

  // Northwest corner start. The walk emits exactly n+m-1 basic cells (some may
  // carry zero flow) and keeps the basis connected.
  {
    Eigen::VectorXd a = mu, b = nu;
    int i = 0, j = 0;
    while (true) {
      const double x = std::min(a(i), b(j));
      plan(i, j) = x;
      basic[i][j] = 1;
      a(i) -= x;
      b(j) -= x;
      if (i == n - 1 && j == m - 1) break;
      if (a(i) <= 0.0 && i < n - 1) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  std::vector<double> u, v;
  for (int pivot = 0; pivot < 10000; ++pivot) {
    compute_duals(cost, basic, u, v);
    int bi = -1, bj = -1;
    double most_negative = -1e-12;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        if (basic[i][j]) continue;
        const double reduced = cost(i, j) - u[i] - v[j];
        if (reduced < most_negative) {
          most_negative = reduced;
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0) {
      ExactOtSolution sol;
      sol.plan = plan;
      sol.cost = plan.cwiseProduct(cost).sum();
      return sol;
    }

    // Cycle = entering cell + tree path; odd positions along the path lose flow.
    const std::vector<Cell> path = tree_path(n, m, basic, bi, bj);
    double theta = std::numeric_limits<double>::infinity();
    Cell leaving{-1, -1};
    for (std::size_t k = 0; k < path.size(); k += 2) {
      if (plan(path[k].row, path[k].col) < theta) {
        theta = plan(path[k].row, path[k].col);
        leaving = path[k];
      }
    }
    plan(bi, bj) += theta;
    basic[bi][bj] = 1;
    bool sign = false;  // path starts on a losing cell
    for (const Cell& cell : path) {
      plan(cell.row, cell.col) += sign ? theta : -theta;
      sign = !sign;
    }
    plan(leaving.row, leaving.col) = 0.0;
    basic[leaving.row][leaving.col] = 0;
  }
  throw InternalError("transportation simplex exceeded its pivot budget");
}

GwPermutationResult exhaustive_gw(const Eigen::MatrixXd& c1, const Eigen::MatrixXd& c2,
                                  const Eigen::VectorXd& mu, const Eigen::VectorXd& nu) {
  const int n = static_cast<int>(c1.rows());
  if (n > 7) throw ValidationError("exhaustive_gw is limited to n <= 7");
  if (c2.rows() != n || c1.cols() != n || c2.cols() != n) {
    throw ValidationError("cost matrices must be square and equal-sized");
  }
  const double unif = 1.0 / static_cast<double>(n);
  for (int i = 0; i < n; ++i) {
    if (std::abs(mu(i) - unif) > 1e-12 || std::abs(nu(i) - unif) > 1e-12) {
      throw ValidationError("exhaustive_gw expects uniform measures");
    }
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  GwPermutationResult best;
  best.value = std::numeric_limits<double>::infinity();
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  do {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        const double d = c1(i, k) - c2(perm[static_cast<std::size_t>(i)],
                                       perm[static_cast<std::size_t>(k)]);
        acc += d * d;
      }
    }
    acc *= scale;
    if (acc < best.value) {
      best.value = acc;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

namespace {

constexpr double kTiny = 1e-300;

// Objective evaluation with quadruple loops; shares no code with the solver.
double eval_objective(const Eigen::MatrixXd& cm, const Eigen::MatrixXd& cg,
                      const Eigen::MatrixXd& pi, const Eigen::VectorXd& mu,
                      const Eigen::VectorXd& nu, double alpha, double rho, double eps,
                      double tau) {
  const int n = static_cast<int>(pi.rows());
  double linear = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) linear += tau * pi(i, j);
    }
  }
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (pi(i, j) == 0.0) continue;
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          const double d = cm(i, k) - cg(j, l);
          quad += d * d * pi(i, j) * pi(k, l);
        }
      }
    }
  }
  double kl = 0.0;
  for (int i = 0; i < n; ++i) {
    double r = 0.0;
    for (int j = 0; j < n; ++j) r += pi(i, j);
    kl += r > 0.0 ? r * std::log(r / mu(i)) - r + mu(i) : mu(i);
  }
  for (int j = 0; j < n; ++j) {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += pi(i, j);
    kl += c > 0.0 ? c * std::log(c / nu(j)) - c + nu(j) : nu(j);
  }
  double ent = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = pi(i, j);
      ent += x > 0.0 ? x * std::log(x) - x + 1.0 : 1.0;
    }
  }
  return (1.0 - alpha) * linear + alpha * quad + rho * kl + eps * ent;
}

}  // namespace

double reference_ufgw(const MeasureSpace& semantic, const MeasureSpace& graph,
                      const UfgwConfig& cfg, int restarts, int iters, double step,
                      std::uint64_t seed) {
  const int n = static_cast<int>(semantic.cost.values.rows());
  if (n > 6) throw ValidationError("reference_ufgw is limited to n <= 6");
  const Eigen::MatrixXd& cm = semantic.cost.values;
  const Eigen::MatrixXd& cg = graph.cost.values;
  const Eigen::VectorXd& mu = semantic.mu;
  const Eigen::VectorXd& nu = graph.mu;

  Rng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd pi(n, n), grad(n, n);
  for (int r = 0; r < restarts; ++r) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        pi(i, j) = rng.uniform(0.01, 1.5 / static_cast<double>(n));
      }
    }
    for (int it = 0; it < iters; ++it) {
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          double gq = 0.0;
          for (int k = 0; k < n; ++k) {
            for (int l = 0; l < n; ++l) {
              const double d = cm(a, k) - cg(b, l);
              gq += d * d * pi(k, l);
            }
          }
          grad(a, b) = (a == b ? 0.0 : (1.0 - cfg.alpha) * cfg.tau) + cfg.alpha * 2.0 * gq;
        }
      }
      for (int i = 0; i < n; ++i) {
        double rmass = 0.0;
        for (int j = 0; j < n; ++j) rmass += pi(i, j);
        const double lr = std::log(std::max(rmass, kTiny) / mu(i));
        for (int j = 0; j < n; ++j) grad(i, j) += cfg.rho * lr;
      }
      for (int j = 0; j < n; ++j) {
        double cmass = 0.0;
        for (int i = 0; i < n; ++i) cmass += pi(i, j);
        const double lc = std::log(std::max(cmass, kTiny) / nu(j));
        for (int i = 0; i < n; ++i) grad(i, j) += cfg.rho * lc;
      }
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          grad(i, j) += cfg.epsilon * std::log(std::max(pi(i, j), kTiny));
          pi(i, j) = std::max(0.0, pi(i, j) - step * grad(i, j));
        }
      }
      if (it % 25 == 0 || it == iters - 1) {
        best = std::min(best, eval_objective(cm, cg, pi, mu, nu, cfg.alpha, cfg.rho,
                                             cfg.epsilon, cfg.tau));
      }
    }
  }
  return best;
}

}  // namespace ufgw::oracle
