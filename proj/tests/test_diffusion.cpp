#include "doctest.h"

#include <cmath>

#include "ufgw/diffusion.hpp"
#include "ufgw/errors.hpp"
#include "ufgw/rng.hpp"

using namespace ufgw;

namespace {

Graph random_graph(std::size_t n, std::size_t extra_edges, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>((i + 1) % n));
  }
  for (std::size_t k = 0; k < extra_edges; ++k) {
    const auto a = static_cast<NodeId>(rng.index(n));
    const auto b = static_cast<NodeId>(rng.index(n));
    if (a != b) edges.emplace_back(a, b);
  }
  return build_graph(n, std::move(edges));
}

// Truncated Neumann series sum_k beta (1-beta)^k Awalk^k, built column by
// column with sparse matrix-vector products. Independent of the dense solve.
Eigen::MatrixXd neumann_ppr(const Graph& g, double beta, double tail_tol) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes);
  Eigen::MatrixXd out(n, n);
  const int terms =
      static_cast<int>(std::ceil(std::log(tail_tol) / std::log1p(-beta))) + 1;
  Eigen::VectorXd x(n), next(n);
  for (Eigen::Index col = 0; col < n; ++col) {
    x.setZero();
    x(col) = 1.0;
    Eigen::VectorXd acc = beta * x;
    for (int k = 1; k <= terms; ++k) {
      // next = Awalk * x done via adjacency loops
      next.setZero();
      for (std::size_t i = 0; i < g.num_nodes; ++i) {
        double s = 0.0;
        for (NodeId j : g.neighbors_of(static_cast<NodeId>(i))) s += x(j);
        next(static_cast<Eigen::Index>(i)) = s / static_cast<double>(g.degrees[i]);
      }
      x = next;
      acc += beta * std::pow(1.0 - beta, k) * x;
    }
    out.col(col) = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("compute_ppr on a single edge matches the closed form") {
  const Graph g = build_graph(2, {{0, 1}});
  const PprMatrix ppr = compute_ppr(g, 0.5);
  CHECK(ppr.values(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(ppr.values(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(ppr.values(1, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(ppr.values(1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("beta near 1 collapses to the identity") {
  const Graph g = random_graph(6, 5, 2);
  const PprMatrix ppr = compute_ppr(g, 1.0 - 1e-9);
  CHECK((ppr.values - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("dense solve matches the truncated Neumann oracle") {
  const Graph g = random_graph(6, 6, 14);
  const PprMatrix ppr = compute_ppr(g, 0.15);
  const Eigen::MatrixXd oracle = neumann_ppr(g, 0.15, 1e-10);
  CHECK((ppr.values - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("power-iteration fallback agrees with the dense solve") {
  const Graph g = random_graph(15, 20, 4);
  const PprMatrix dense = compute_ppr(g, 0.15);
  const PprMatrix power = compute_ppr_power(g, 0.15, 1e-10);
  CHECK((dense.values - power.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("PPR rows are stochastic and diagonals dominate beta") {
  for (const double beta : {0.05, 0.15, 0.5, 0.85}) {
    const Graph g = random_graph(12, 18, 31);
    const PprMatrix ppr = compute_ppr(g, beta);
    CHECK(ppr.values.minCoeff() >= 0.0);
    CHECK((ppr.values.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(ppr.values.diagonal().minCoeff() >= beta - 1e-12);
  }
}

TEST_CASE("adding an edge never decreases the pair's diffusion") {
  Rng rng(555);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng.index(4);
    const Graph g = random_graph(n, rng.index(n), rng.next_u64());
    // find an absent pair
    NodeId a = 0, b = 0;
    bool found = false;
    for (std::size_t tries = 0; tries < 50 && !found; ++tries) {
      a = static_cast<NodeId>(rng.index(n));
      b = static_cast<NodeId>(rng.index(n));
      if (a == b) continue;
      found = true;
      for (NodeId w : g.neighbors_of(a)) {
        if (w == b) found = false;
      }
    }
    if (!found) continue;
    const double beta = 0.15;
    const Eigen::MatrixXd before = neumann_ppr(g, beta, 1e-11);
    auto edges = g.edges;
    edges.emplace_back(std::min(a, b), std::max(a, b));
    const Graph g2 = build_graph(n, std::move(edges));
    const Eigen::MatrixXd after = neumann_ppr(g2, beta, 1e-11);
    CHECK(after(a, b) >= before(a, b) - 1e-12);
  }
}

TEST_CASE("graph_cost_for_batch stays finite and normalizes to mean 1") {
  const Graph g = random_graph(9, 12, 8);
  const PprMatrix ppr = compute_ppr(g, 0.15);
  BatchSample batch;
  batch.node_ids = {0, 2, 4, 6, 8};
  const CostMatrix cost = graph_cost_for_batch(ppr, batch, 1e-9);
  CHECK(cost.kind == CostKind::graph);
  CHECK(cost.values.allFinite());
  CHECK(cost.values.minCoeff() >= 0.0);
  CHECK(cost.values.mean() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("two-node batch cost matches scalar arithmetic") {
  const Graph g = build_graph(2, {{0, 1}});
  const PprMatrix ppr = compute_ppr(g, 0.5);
  BatchSample batch;
  batch.node_ids = {0, 1};
  const double delta = 1e-9;
  const CostMatrix cost = graph_cost_for_batch(ppr, batch, delta);

  double raw[2][2];
  double mean = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      raw[i][j] = -std::log(ppr.values(i, j) + delta);
      mean += raw[i][j] / 4.0;
    }
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(cost.values(i, j) == doctest::Approx(raw[i][j] / (mean + delta)).epsilon(1e-12));
    }
  }
  CHECK(cost.normalization_mean == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("constant diffusion block normalizes to the all-ones matrix") {
  PprMatrix ppr;
  ppr.beta = 0.2;
  ppr.values = Eigen::MatrixXd::Constant(4, 4, 0.25);
  BatchSample batch;
  batch.node_ids = {0, 1, 2, 3};
  const CostMatrix cost = graph_cost_for_batch(ppr, batch, 1e-9);
  CHECK((cost.values.array() - 1.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("PPR cache roundtrips exactly") {
  const Graph g = random_graph(7, 9, 21);
  const PprMatrix ppr = compute_ppr(g, 0.15);
  const std::string path = "/tmp/ufgw_test_cache.ppr";
  save_ppr_cache(ppr, path);
  const PprMatrix back = load_ppr_cache(path);
  CHECK(back.beta == ppr.beta);
  CHECK((back.values - ppr.values).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(load_ppr_cache("/tmp/ufgw_test_missing.ppr"), InputError);
}

TEST_CASE("compute_ppr validates beta") {
  const Graph g = build_graph(2, {{0, 1}});
  CHECK_THROWS_AS(compute_ppr(g, 0.0), ValidationError);
  CHECK_THROWS_AS(compute_ppr(g, 1.0), ValidationError);
}
