#include "ufgw/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "ufgw/errors.hpp"
#include "ufgw/rng.hpp"

namespace ufgw {

Graph build_graph(std::size_t num_nodes, std::vector<std::pair<NodeId, NodeId>> raw_edges) {
  std::set<std::pair<NodeId, NodeId>> canon;
  for (auto [a, b] : raw_edges) {
    if (a >= num_nodes || b >= num_nodes) {
      throw ValidationError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                            ") references a node id >= num_nodes=" + std::to_string(num_nodes));
    }
    if (a == b) continue;  // self-loops dropped
    if (a > b) std::swap(a, b);
    canon.emplace(a, b);
  }
  if (canon.empty()) {
    throw ValidationError("graph has no edges after canonicalization");
  }

  Graph g;
  g.num_nodes = num_nodes;
  g.edges.assign(canon.begin(), canon.end());
  g.degrees.assign(num_nodes, 0);
  for (auto [a, b] : g.edges) {
    ++g.degrees[a];
    ++g.degrees[b];
  }
  for (std::size_t i = 0; i < num_nodes; ++i) {
    if (g.degrees[i] == 0) {
      throw ValidationError("node " + std::to_string(i) +
                            " is isolated; diffusion is undefined for degree-0 nodes");
    }
  }

  g.offsets.assign(num_nodes + 1, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    g.offsets[i + 1] = g.offsets[i] + g.degrees[i];
  }
  g.neighbors.resize(2 * g.edges.size());
  std::vector<std::size_t> cursor(g.offsets.begin(), g.offsets.end() - 1);
  for (auto [a, b] : g.edges) {
    g.neighbors[cursor[a]++] = b;
    g.neighbors[cursor[b]++] = a;
  }
  for (std::size_t i = 0; i < num_nodes; ++i) {
    std::sort(g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[i]),
              g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[i + 1]));
  }
  return g;
}

namespace {

// Parses a non-negative integer token; returns false on junk.
bool parse_id(std::string_view tok, long long& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Graph load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open edge list: " + path);
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  long long header_nodes = -1;
  long long max_id = -1;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok_a, tok_b;
    if (!(ls >> tok_a)) continue;  // blank line
    if (tok_a.rfind("nodes=", 0) == 0) {
      long long n = 0;
      if (!parse_id(std::string_view(tok_a).substr(6), n) || n <= 0) {
        throw InputError(path + ":" + std::to_string(lineno) + ": bad header '" + tok_a + "'");
      }
      header_nodes = n;
      continue;
    }
    long long a = 0, b = 0;
    std::string trailing;
    if (!(ls >> tok_b) || (ls >> trailing) || !parse_id(tok_a, a) || !parse_id(tok_b, b) ||
        a < 0 || b < 0) {
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": expected two non-negative integer node ids");
    }
    max_id = std::max({max_id, a, b});
    edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
  }
  if (edges.empty()) {
    throw ValidationError(path + ": empty edge set");
  }
  const std::size_t num_nodes =
      header_nodes > 0 ? static_cast<std::size_t>(header_nodes)
                       : static_cast<std::size_t>(max_id + 1);
  if (header_nodes > 0 && max_id >= header_nodes) {
    throw InputError(path + ": node id " + std::to_string(max_id) +
                     " exceeds header nodes=" + std::to_string(header_nodes));
  }
  return build_graph(num_nodes, std::move(edges));
}

void save_edge_list(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write edge list: " + path);
  }
  out << "nodes=" << g.num_nodes << "\n";
  for (auto [a, b] : g.edges) {
    out << a << " " << b << "\n";
  }
  if (!out) {
    throw InputError("failed writing edge list: " + path);
  }
}

Eigen::MatrixXd random_walk_matrix(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    if (g.degrees[i] == 0) {
      throw ValidationError("node " + std::to_string(i) + " has degree 0");
    }
  }
  Eigen::MatrixXd walk = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    const double w = 1.0 / static_cast<double>(g.degrees[i]);
    for (NodeId j : g.neighbors_of(static_cast<NodeId>(i))) {
      walk(static_cast<Eigen::Index>(i), j) = w;
    }
  }
  return walk;
}

BatchSample sample_neighbor_batch(const Graph& g, const std::vector<NodeId>& seeds,
                                  std::size_t fanout, std::size_t hops,
                                  std::uint64_t rng_seed, std::size_t max_nodes) {
  for (NodeId s : seeds) {
    if (s >= g.num_nodes) {
      throw InputError("seed id " + std::to_string(s) + " out of range");
    }
  }
  Rng rng(rng_seed);
  BatchSample batch;
  std::unordered_set<NodeId> seen;
  seen.reserve(seeds.size() * (fanout + 1));
  for (NodeId s : seeds) {
    if (seen.insert(s).second) {
      batch.node_ids.push_back(s);
      batch.seed_ids.push_back(s);
    }
  }
  std::vector<NodeId> frontier = batch.node_ids;
  std::vector<NodeId> next;
  for (std::size_t h = 0; h < hops && batch.node_ids.size() < max_nodes; ++h) {
    next.clear();
    for (NodeId u : frontier) {
      auto nbrs = g.neighbors_of(u);
      std::vector<NodeId> pool(nbrs.begin(), nbrs.end());
      const std::size_t take = std::min(fanout, pool.size());
      // partial Fisher-Yates: the first `take` entries are the sample
      for (std::size_t i = 0; i < take; ++i) {
        std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
      }
      for (std::size_t i = 0; i < take; ++i) {
        if (batch.node_ids.size() >= max_nodes) break;
        if (seen.insert(pool[i]).second) {
          batch.node_ids.push_back(pool[i]);
          next.push_back(pool[i]);
        }
      }
    }
    frontier = next;
  }
  return batch;
}

}  // namespace ufgw
