#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ufgw/errors.hpp"
#include "ufgw/rng.hpp"
#include "ufgw/semantic.hpp"
#include "ufgw/solver.hpp"

using namespace ufgw;

namespace {

EmbeddingMatrix random_embeddings(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingMatrix emb;
  emb.values.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) emb.values(i, j) = rng.normal();
  }
  return emb;
}

MeasureSpace random_space(Eigen::Index n, std::uint64_t seed, CostKind kind = CostKind::semantic) {
  std::vector<std::uint32_t> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0u);
  CostMatrix raw = cosine_cost(random_embeddings(n, 5, seed), rows);
  raw.kind = kind;
  return build_measure_space(raw, 1e-9);
}

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const auto n = a.size();
  auto ranks = [n](const Eigen::VectorXd& x) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int p, int q) { return x(p) < x(q); });
    Eigen::VectorXd r(n);
    for (int k = 0; k < n; ++k) r(idx[static_cast<std::size_t>(k)]) = k;
    return r;
  };
  const Eigen::VectorXd ra = ranks(a), rb = ranks(b);
  const double ma = ra.mean(), mb = rb.mean();
  const double cov = ((ra.array() - ma) * (rb.array() - mb)).sum();
  const double sa = std::sqrt(((ra.array() - ma).square()).sum());
  const double sb = std::sqrt(((rb.array() - mb).square()).sum());
  return cov / (sa * sb);
}

}  // namespace

TEST_CASE("anchor_matrix fills the off-diagonal with tau") {
  const Eigen::MatrixXd m2 = anchor_matrix(2, 0.5);
  CHECK(m2(0, 0) == 0.0);
  CHECK(m2(1, 1) == 0.0);
  CHECK(m2(0, 1) == 0.5);
  CHECK(m2(1, 0) == 0.5);

  const Eigen::MatrixXd m1 = anchor_matrix(1, 0.7);
  CHECK(m1(0, 0) == 0.0);

  const Eigen::MatrixXd m3 = anchor_matrix(3, 1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(m3(i, j) == (i == j ? 0.0 : 1.0));
}

TEST_CASE("linearized_gradient trivial regimes") {
  const MeasureSpace a = random_space(3, 1);
  const MeasureSpace b = random_space(3, 2);
  const Eigen::MatrixXd anchor = anchor_matrix(3, 0.5);
  const Eigen::MatrixXd pi = Eigen::MatrixXd::Constant(3, 3, 0.1);

  // alpha = 0: the relational part is disabled no matter the plan
  CHECK((linearized_gradient(a.cost, b.cost, anchor, pi, 0.0) - anchor).cwiseAbs().maxCoeff() ==
        0.0);

  // zero plan: only the anchor term survives
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 3);
  CHECK((linearized_gradient(a.cost, b.cost, anchor, zero, 0.4) - 0.6 * anchor)
            .cwiseAbs()
            .maxCoeff() < 1e-15);
}

TEST_CASE("linearized_gradient matches a triple-loop oracle") {
  const MeasureSpace a = random_space(3, 5);
  const MeasureSpace b = random_space(3, 6);
  const Eigen::MatrixXd anchor = anchor_matrix(3, 0.5);
  Rng rng(7);
  Eigen::MatrixXd pi(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) pi(i, j) = rng.uniform(0.0, 0.4);
  const double alpha = 0.6;
  const Eigen::MatrixXd got = linearized_gradient(a.cost, b.cost, anchor, pi, alpha);

  const Eigen::MatrixXd& cm = a.cost.values;
  const Eigen::MatrixXd& cg = b.cost.values;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      // d/dpi(i,j) of sum |cm(i,k)-cg(j,l)|^2 pi(i,j) pi(k,l), written out
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) {
        for (int l = 0; l < 3; ++l) {
          const double d = cm(i, k) - cg(j, l);
          acc += 2.0 * d * d * pi(k, l);
        }
      }
      const double expect = (1.0 - alpha) * anchor(i, j) + alpha * acc;
      CHECK(got(i, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("constant cost with uniform measures gives a constant plan") {
  const Eigen::MatrixXd g = Eigen::MatrixXd::Constant(4, 4, 0.8);
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(4, 0.25);
  const TransportPlan plan = unbalanced_sinkhorn(g, mu, mu, 0.1, 0.2, 500, 1e-12);
  CHECK(plan.converged);
  CHECK((plan.pi.array() - plan.pi(0, 0)).abs().maxCoeff() < 1e-12);
  CHECK((plan.u.array() - plan.u(0)).abs().maxCoeff() < 1e-12);
}

TEST_CASE("near-balanced limit matches the marginals") {
  Rng rng(12);
  for (int t = 0; t < 5; ++t) {
    Eigen::MatrixXd g(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) g(i, j) = rng.uniform();
    Eigen::VectorXd mu(4), nu(4);
    for (int i = 0; i < 4; ++i) {
      mu(i) = rng.uniform(0.5, 1.5);
      nu(i) = rng.uniform(0.5, 1.5);
    }
    mu /= mu.sum();
    nu /= nu.sum();
    const TransportPlan plan = unbalanced_sinkhorn(g, mu, nu, 1e6, 0.05, 2000, 1e-12);
    CHECK((plan.pi.rowwise().sum() - mu).cwiseAbs().maxCoeff() < 1e-4);
    CHECK((plan.pi.colwise().sum().transpose() - nu).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("an expensive row sheds its mass while cheap rows keep theirs") {
  Rng rng(3);
  Eigen::MatrixXd g(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) g(i, j) = rng.uniform(0.8, 1.2);
  g.row(2).setConstant(100.0);
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(6, 1.0 / 6.0);
  const TransportPlan plan = unbalanced_sinkhorn(g, mu, mu, 0.01, 0.5, 2000, 1e-12);
  const Eigen::VectorXd rows = plan.pi.rowwise().sum();
  CHECK(rows(2) < 1e-3 * mu(2));
  for (int i = 0; i < 6; ++i) {
    if (i != 2) CHECK(rows(i) > 0.9 * mu(i));
  }
}

TEST_CASE("a converged fixed point moves less than tol under one more update") {
  Rng rng(9);
  Eigen::MatrixXd g(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) g(i, j) = rng.uniform();
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(5, 0.2);
  const double tol = 1e-11;
  const TransportPlan plan = unbalanced_sinkhorn(g, mu, mu, 0.3, 0.2, 5000, tol);
  REQUIRE(plan.converged);
  // one further update from the converged scalings
  const double fexp = 0.3 / (0.3 + 0.2);
  const Eigen::MatrixXd kernel = (-g / 0.2).array().exp();
  const Eigen::VectorXd u_next =
      (mu.array() / (kernel * plan.v).array()).pow(fexp);
  CHECK((u_next.array() / plan.u.array()).log().abs().maxCoeff() < tol);
}

TEST_CASE("plan mass spreads toward the product measure as epsilon grows") {
  Rng rng(21);
  Eigen::MatrixXd g(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) g(i, j) = rng.uniform(0.2, 1.8);
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(5, 0.2);
  double prev = 1e100;
  for (const double eps : {0.05, 0.5, 10.0}) {
    const TransportPlan plan = unbalanced_sinkhorn(g, mu, mu, 0.5, eps, 3000, 1e-12);
    Eigen::MatrixXd normalized = plan.pi / plan.pi.sum();
    double kl = 0.0;
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        const double p = normalized(i, j);
        if (p > 0.0) kl += p * std::log(p / (mu(i) * mu(j)));
      }
    }
    CHECK(kl < prev);
    prev = kl;
  }
}

TEST_CASE("row mass decreases strictly with an injected cost shift") {
  Rng rng(33);
  Eigen::MatrixXd base(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) base(i, j) = rng.uniform(0.8, 1.2);
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(6, 1.0 / 6.0);
  double prev_mass = 1e100;
  for (const double shift : {1.0, 2.0, 4.0, 8.0}) {
    Eigen::MatrixXd g = base;
    g.row(2).array() += shift;
    const TransportPlan plan = unbalanced_sinkhorn(g, mu, mu, 0.05, 0.3, 2000, 1e-12);
    const double mass = plan.pi.row(2).sum();
    CHECK(mass < prev_mass);
    prev_mass = mass;
  }
}

TEST_CASE("solve_ufgw on identical spaces prefers the diagonal") {
  const MeasureSpace space = random_space(5, 44);
  MeasureSpace graph = space;
  graph.cost.kind = CostKind::graph;
  UfgwConfig cfg;
  cfg.alpha = 1.0;
  cfg.rho = 1.0;
  cfg.epsilon = 0.02;
  cfg.sinkhorn_iters = 300;
  cfg.bcd_iters = 30;
  auto [plan, report] = solve_ufgw(space, graph, cfg);
  const double diag_mass = plan.pi.diagonal().sum();
  CHECK(diag_mass / plan.pi.sum() > 0.5);

  // perturbing the semantic cost strictly increases the total loss
  MeasureSpace bumped = space;
  bumped.cost.values(0, 1) += 0.3;
  bumped.cost.values(1, 0) += 0.3;
  auto [plan2, report2] = solve_ufgw(bumped, graph, cfg);
  CHECK(report2.loss_total > report.loss_total);
}

TEST_CASE("solve_ufgw handles the singleton problem") {
  CostMatrix c;
  c.values = Eigen::MatrixXd::Zero(1, 1);
  const MeasureSpace space = build_measure_space(c, 1e-9);
  UfgwConfig cfg;
  auto [plan, report] = solve_ufgw(space, space, cfg);
  CHECK(plan.pi.rows() == 1);
  CHECK(report.loss_linear == 0.0);
  CHECK(std::isfinite(report.loss_total));
}

TEST_CASE("loss recombination holds to 1e-10") {
  const MeasureSpace a = random_space(4, 50);
  const MeasureSpace b = random_space(4, 51, CostKind::graph);
  UfgwConfig cfg;
  auto [plan, report] = solve_ufgw(a, b, cfg);
  const double recombined = (1.0 - cfg.alpha) * report.loss_linear +
                            cfg.alpha * report.loss_quadratic + report.loss_kl +
                            cfg.epsilon * report.loss_entropy;
  CHECK(report.loss_total == doctest::Approx(recombined).epsilon(1e-10));
  CHECK(report.row_mass.minCoeff() >= 0.0);
}

TEST_CASE("BCD loss trend is non-increasing on at least 95% of instances") {
  int monotone = 0;
  const int trials = 40;
  for (int t = 0; t < trials; ++t) {
    const auto n = static_cast<Eigen::Index>(3 + t % 3);
    const MeasureSpace a = random_space(n, 100 + static_cast<std::uint64_t>(t) * 2);
    const MeasureSpace b =
        random_space(n, 101 + static_cast<std::uint64_t>(t) * 2, CostKind::graph);
    UfgwConfig cfg;
    cfg.sinkhorn_iters = 200;
    cfg.bcd_iters = 25;
    auto [plan, report] = solve_ufgw(a, b, cfg);
    bool ok = true;
    for (std::size_t k = 1; k < report.loss_history.size(); ++k) {
      if (report.loss_history[k] > report.loss_history[k - 1] + 1e-6) ok = false;
    }
    monotone += ok;
  }
  CHECK(monotone >= static_cast<int>(0.95 * trials));
}

TEST_CASE("solve_ufgw is equivariant under simultaneous relabeling") {
  const Eigen::Index n = 5;
  const MeasureSpace a = random_space(n, 60);
  const MeasureSpace b = random_space(n, 61, CostKind::graph);
  UfgwConfig cfg;
  cfg.sinkhorn_iters = 200;
  cfg.bcd_iters = 15;
  auto [plan, report] = solve_ufgw(a, b, cfg);

  const std::vector<int> perm{2, 4, 0, 3, 1};
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) p(perm[static_cast<std::size_t>(i)], i) = 1.0;

  auto relabel = [&](const MeasureSpace& s) {
    MeasureSpace out = s;
    out.cost.values = p * s.cost.values * p.transpose();
    return out;
  };
  auto [plan2, report2] = solve_ufgw(relabel(a), relabel(b), cfg);
  const Eigen::MatrixXd expected = p * plan.pi * p.transpose();
  CHECK((plan2.pi - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("mass diagnostics: uniform costs predict uniform masses") {
  const Eigen::MatrixXd g = Eigen::MatrixXd::Constant(4, 4, 0.7);
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(4, 0.25);
  const TransportPlan plan = unbalanced_sinkhorn(g, mu, mu, 0.2, 0.3, 1000, 1e-12);
  const MassDiagnostics diag = mass_equilibrium_diagnostics(plan, g, mu, 0.2);
  CHECK((diag.predicted_row_mass.array() - diag.predicted_row_mass(0)).abs().maxCoeff() < 1e-10);
  CHECK(diag.predicted_row_mass.sum() == doctest::Approx(diag.row_mass.sum()).epsilon(1e-9));
}

TEST_CASE("mass diagnostics: predicted ordering tracks the actual ordering") {
  Eigen::MatrixXd g(2, 2);
  g << 0.1, 0.1, 5.0, 5.0;
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(2, 0.5);
  const TransportPlan plan = unbalanced_sinkhorn(g, mu, mu, 0.2, 0.3, 1000, 1e-12);
  const MassDiagnostics diag = mass_equilibrium_diagnostics(plan, g, mu, 0.2);
  CHECK(diag.predicted_row_mass(0) > diag.predicted_row_mass(1));
  CHECK(diag.row_mass(0) > diag.row_mass(1));
}

TEST_CASE("mass diagnostics: rank correlation on a spread of row costs") {
  Rng rng(71);
  Eigen::MatrixXd g(8, 8);
  for (int i = 0; i < 8; ++i) {
    const double level = rng.uniform(0.5, 3.0);
    for (int j = 0; j < 8; ++j) g(i, j) = level + rng.uniform(-0.05, 0.05);
  }
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(8, 0.125);
  const TransportPlan plan = unbalanced_sinkhorn(g, mu, mu, 0.05, 0.3, 3000, 1e-12);
  const MassDiagnostics diag = mass_equilibrium_diagnostics(plan, g, mu, 0.05);
  CHECK(spearman(-diag.cost_per_node, diag.row_mass) > 0.9);
}

TEST_CASE("node classification thresholds") {
  UfgwConfig cfg;
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(3, 3);
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  pi(0, 0) = 0.30;               // r=0.3 >= 0.8/3, diagonal share 1 -> anchor
  pi(1, 0) = 0.20; pi(1, 1) = 0.10;  // r=0.3, share 1/3 < 0.5 -> smoothed
  pi(2, 2) = 0.01;               // r=0.01 < 0.2/3 -> rejected
  const auto cls = classify_nodes(pi, mu, cfg);
  CHECK(cls[0] == NodeClass::anchor);
  CHECK(cls[1] == NodeClass::smoothed);
  CHECK(cls[2] == NodeClass::rejected);
}

TEST_CASE("config validation rejects out-of-range values") {
  UfgwConfig cfg;
  cfg.alpha = 1.2;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = UfgwConfig{};
  cfg.rho = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = UfgwConfig{};
  cfg.sinkhorn_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("solver input validation") {
  const Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(2, 0.5);
  Eigen::VectorXd bad = mu;
  bad(0) = 0.0;
  CHECK_THROWS_AS(unbalanced_sinkhorn(g, bad, mu, 0.1, 0.1, 10, 1e-9), ValidationError);
  CHECK_THROWS_AS(unbalanced_sinkhorn(g, mu, mu, -1.0, 0.1, 10, 1e-9), ValidationError);

  const MeasureSpace a = random_space(3, 80);
  const MeasureSpace b = random_space(4, 81);
  UfgwConfig cfg;
  CHECK_THROWS_AS(solve_ufgw(a, b, cfg), ValidationError);
}
