#include "ufgw/diffusion.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ufgw/errors.hpp"

namespace ufgw {

namespace {

void check_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ValidationError("teleport probability must lie in (0, 1), got " + std::to_string(beta));
  }
}

}  // namespace

PprMatrix compute_ppr(const Graph& g, double beta) {
  check_beta(beta);
  const auto n = static_cast<Eigen::Index>(g.num_nodes);
  Eigen::MatrixXd system = -(1.0 - beta) * random_walk_matrix(g);
  system.diagonal().array() += 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  PprMatrix ppr;
  ppr.beta = beta;
  ppr.values = lu.solve(Eigen::MatrixXd::Identity(n, n) * beta);
  if (!ppr.values.allFinite()) {
    throw InternalError("PPR solve produced non-finite entries");
  }
  // roundoff can leave tiny negatives on far pairs
  ppr.values = ppr.values.cwiseMax(0.0);
  return ppr;
}

PprMatrix compute_ppr_power(const Graph& g, double beta, double tol) {
  check_beta(beta);
  const auto n = static_cast<Eigen::Index>(g.num_nodes);
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n) * beta;
  Eigen::MatrixXd next(n, n);
  // after k applications the remaining Neumann tail is bounded by (1-beta)^k
  double tail = 1.0;
  while (tail > tol) {
    next.setZero();
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      const double w = (1.0 - beta) / static_cast<double>(g.degrees[i]);
      auto row = next.row(static_cast<Eigen::Index>(i));
      for (NodeId j : g.neighbors_of(static_cast<NodeId>(i))) {
        row += w * p.row(j);
      }
    }
    next.diagonal().array() += beta;
    p.swap(next);
    tail *= 1.0 - beta;
  }
  return {std::move(p), beta};
}

CostMatrix graph_cost_for_batch(const PprMatrix& ppr, const BatchSample& batch, double delta) {
  if (delta <= 0.0) {
    throw ValidationError("delta must be positive");
  }
  const auto n = static_cast<Eigen::Index>(batch.node_ids.size());
  const auto total = ppr.values.rows();
  CostMatrix raw;
  raw.kind = CostKind::graph;
  raw.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const NodeId bi = batch.node_ids[static_cast<std::size_t>(i)];
    if (bi >= total) {
      throw InputError("batch node id " + std::to_string(bi) + " out of range");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const NodeId bj = batch.node_ids[static_cast<std::size_t>(j)];
      raw.values(i, j) = std::max(0.0, -std::log(ppr.values(bi, bj) + delta));
    }
  }
  return mean_normalize(raw, delta);
}

namespace {
constexpr char kPprMagic[4] = {'P', 'P', 'R', '1'};
}

void save_ppr_cache(const PprMatrix& ppr, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write PPR cache: " + path);
  }
  out.write(kPprMagic, 4);
  const std::uint64_t n = static_cast<std::uint64_t>(ppr.values.rows());
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&ppr.beta), 8);
  for (std::uint64_t i = 0; i < n; ++i) {
    Eigen::RowVectorXd row = ppr.values.row(static_cast<Eigen::Index>(i));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!out) {
    throw InputError("failed writing PPR cache: " + path);
  }
}

PprMatrix load_ppr_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open PPR cache: " + path);
  }
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kPprMagic, 4) != 0) {
    throw InputError(path + ": not a PPR cache (bad magic)");
  }
  std::uint64_t n = 0;
  PprMatrix ppr;
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&ppr.beta), 8);
  if (!in || n == 0) {
    throw InputError(path + ": truncated PPR header");
  }
  ppr.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<double> buf(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double)) {
      throw InputError(path + ": truncated PPR payload");
    }
    for (std::uint64_t j = 0; j < n; ++j) {
      ppr.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = buf[j];
    }
  }
  return ppr;
}

}  // namespace ufgw
