#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ufgw {

using NodeId = std::uint32_t;

// Undirected graph in CSR form. Canonical invariants, enforced by build_graph:
// no self-loops, no duplicate edges, every stored edge present in both
// directions, no isolated nodes. Immutable after construction.
struct Graph {
  std::size_t num_nodes = 0;
  std::vector<std::pair<NodeId, NodeId>> edges;  // canonical list, src < dst, sorted
  std::vector<std::size_t> offsets;              // CSR row pointers, size num_nodes + 1
  std::vector<NodeId> neighbors;                 // CSR adjacency, sorted per row
  std::vector<std::uint32_t> degrees;

  std::span<const NodeId> neighbors_of(NodeId u) const {
    return {neighbors.data() + offsets[u], neighbors.data() + offsets[u + 1]};
  }
  std::size_t degree(NodeId u) const { return degrees[u]; }
  std::size_t num_edges() const { return edges.size(); }
};

// Canonicalizes raw edges (drops self-loops, collapses duplicates, symmetrizes)
// and builds the CSR structure. Throws ValidationError on an empty edge set,
// an isolated node, or an id >= num_nodes.
Graph build_graph(std::size_t num_nodes, std::vector<std::pair<NodeId, NodeId>> raw_edges);

// Edge-list file: UTF-8 text, one "src dst" pair per line, '#' comments ignored,
// optional "nodes=N" header line. Node count defaults to 1 + max id.
Graph load_edge_list(const std::string& path);
void save_edge_list(const Graph& g, const std::string& path);

// Row-normalized random walk matrix D^-1 A. Requires every degree >= 1.
Eigen::MatrixXd random_walk_matrix(const Graph& g);

struct BatchSample {
  std::vector<NodeId> node_ids;  // seeds first, then hop-order discovery
  std::vector<NodeId> seed_ids;
};

// Multi-hop neighbor sampling without replacement, deterministic per rng_seed.
// Each frontier node contributes at most `fanout` unseen neighbors per hop.
// `max_nodes` truncates discovery (never seeds); the library default is no cap.
BatchSample sample_neighbor_batch(const Graph& g, const std::vector<NodeId>& seeds,
                                  std::size_t fanout, std::size_t hops,
                                  std::uint64_t rng_seed,
                                  std::size_t max_nodes = SIZE_MAX);

}  // namespace ufgw
