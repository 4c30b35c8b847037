#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ufgw/errors.hpp"
#include "ufgw/graph.hpp"
#include "ufgw/rng.hpp"

using namespace ufgw;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = std::string("/tmp/ufgw_test_") + name;
  std::ofstream out(path);
  out << content;
  return path;
}

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

}  // namespace

TEST_CASE("load_edge_list parses a path graph") {
  const auto path = write_temp("path.txt", "0 1\n1 2\n");
  const Graph g = load_edge_list(path);
  CHECK(g.num_nodes == 3);
  CHECK(g.num_edges() == 2);
  CHECK(g.degree(0) == 1);
  CHECK(g.degree(1) == 2);
  CHECK(g.degree(2) == 1);
  const auto nbrs1 = g.neighbors_of(1);
  REQUIRE(nbrs1.size() == 2);
  CHECK(nbrs1[0] == 0);
  CHECK(nbrs1[1] == 2);
}

TEST_CASE("canonicalization collapses duplicates and drops self-loops") {
  // the self-loop on node 2 is dropped; 2 stays connected through "1 2"
  const auto path = write_temp("canon.txt", "0 1\n1 0\n1 2\n2 2\n");
  const Graph g = load_edge_list(path);
  CHECK(g.num_nodes == 3);
  CHECK(g.num_edges() == 2);
  CHECK(g.degree(2) == 1);
}

TEST_CASE("a node left with only a self-loop is isolated and rejected") {
  const auto path = write_temp("isolated.txt", "0 1\n1 0\n2 2\n");
  CHECK_THROWS_AS(load_edge_list(path), ValidationError);
  try {
    load_edge_list(path);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("load errors carry line numbers") {
  const auto path = write_temp("badline.txt", "0 1\n1 x\n");
  CHECK_THROWS_WITH_AS(load_edge_list(path), doctest::Contains(":2:"), InputError);

  const auto neg = write_temp("negid.txt", "0 1\n-3 1\n");
  CHECK_THROWS_AS(load_edge_list(neg), InputError);

  const auto empty = write_temp("empty.txt", "# only a comment\n");
  CHECK_THROWS_AS(load_edge_list(empty), ValidationError);
}

TEST_CASE("nodes= header overrides the node count and validates ids") {
  const auto path = write_temp("header.txt", "nodes=3\n0 1\n1 2\n");
  const Graph g = load_edge_list(path);
  CHECK(g.num_nodes == 3);

  const auto bad = write_temp("header_bad.txt", "nodes=2\n0 1\n1 2\n");
  CHECK_THROWS_AS(load_edge_list(bad), InputError);
}

TEST_CASE("degree sequence matches an independent recount of the raw file") {
  // build a random file, then recount canonical degrees by streaming the text
  Rng rng(77);
  std::ostringstream file;
  std::set<std::pair<NodeId, NodeId>> expected;
  for (std::size_t i = 0; i < 10; ++i) {
    file << i << " " << (i + 1) % 10 << "\n";
    expected.insert({static_cast<NodeId>(std::min(i, (i + 1) % 10)),
                     static_cast<NodeId>(std::max(i, (i + 1) % 10))});
  }
  for (int k = 0; k < 25; ++k) {
    const auto a = static_cast<NodeId>(rng.index(10));
    const auto b = static_cast<NodeId>(rng.index(10));
    file << a << " " << b << "\n";
    if (a != b) expected.insert({std::min(a, b), std::max(a, b)});
  }
  const auto path = write_temp("recount.txt", file.str());
  const Graph g = load_edge_list(path);

  std::map<NodeId, int> degree_oracle;
  for (const auto& [a, b] : expected) {
    ++degree_oracle[a];
    ++degree_oracle[b];
  }
  REQUIRE(g.num_nodes == 10);
  for (NodeId v = 0; v < 10; ++v) {
    CHECK(static_cast<int>(g.degree(v)) == degree_oracle[v]);
  }
}

TEST_CASE("save/load roundtrip preserves the canonical edge set") {
  const Graph g = random_graph(12, 20, 5);
  const std::string path = "/tmp/ufgw_test_roundtrip.txt";
  save_edge_list(g, path);
  const Graph back = load_edge_list(path);
  CHECK(back.num_nodes == g.num_nodes);
  CHECK(back.edges == g.edges);
}

TEST_CASE("random_walk_matrix on the triangle and the path") {
  const Graph tri = build_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  const Eigen::MatrixXd wt = random_walk_matrix(tri);
  for (int i = 0; i < 3; ++i) {
    CHECK(wt(i, i) == 0.0);
    for (int j = 0; j < 3; ++j) {
      if (i != j) CHECK(wt(i, j) == doctest::Approx(0.5));
    }
  }

  const Graph path = build_graph(3, {{0, 1}, {1, 2}});
  const Eigen::MatrixXd wp = random_walk_matrix(path);
  CHECK(wp(1, 0) == doctest::Approx(0.5));
  CHECK(wp(1, 1) == 0.0);
  CHECK(wp(1, 2) == doctest::Approx(0.5));
}

TEST_CASE("random_walk_matrix rows match a per-row division oracle") {
  const Graph g = random_graph(8, 14, 9);
  const Eigen::MatrixXd walk = random_walk_matrix(g);
  for (std::size_t i = 0; i < 8; ++i) {
    // independent per-row loop over the adjacency
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(8);
    for (NodeId j : g.neighbors_of(static_cast<NodeId>(i))) {
      row(j) = 1.0 / static_cast<double>(g.degree(static_cast<NodeId>(i)));
    }
    CHECK((walk.row(static_cast<Eigen::Index>(i)) - row).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(walk.row(static_cast<Eigen::Index>(i)).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sample_neighbor_batch: zero hops returns the seeds") {
  const Graph g = random_graph(10, 10, 3);
  const BatchSample b = sample_neighbor_batch(g, {4, 7, 1}, 5, 0, 123);
  CHECK(b.node_ids == std::vector<NodeId>{4, 7, 1});
  CHECK(b.seed_ids == std::vector<NodeId>{4, 7, 1});
}

TEST_CASE("sample_neighbor_batch saturates a star with enough fanout") {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId leaf = 1; leaf <= 6; ++leaf) edges.emplace_back(0, leaf);
  const Graph star = build_graph(7, std::move(edges));
  const BatchSample b = sample_neighbor_batch(star, {0}, 10, 1, 42);
  CHECK(b.node_ids.size() == 7);
  CHECK(b.node_ids[0] == 0);
}

TEST_CASE("sample_neighbor_batch is deterministic and respects the size bound") {
  const Graph g = random_graph(20, 40, 11);
  const std::vector<NodeId> seeds{0, 5, 9};
  const BatchSample a = sample_neighbor_batch(g, seeds, 3, 2, 99);
  const BatchSample b = sample_neighbor_batch(g, seeds, 3, 2, 99);
  CHECK(a.node_ids == b.node_ids);
  CHECK(a.seed_ids == b.seed_ids);
  // |seeds| * (1 + fanout + fanout^2)
  CHECK(a.node_ids.size() <= 3 * (1 + 3 + 9));

  std::set<NodeId> uniq(a.node_ids.begin(), a.node_ids.end());
  CHECK(uniq.size() == a.node_ids.size());
  for (NodeId s : seeds) CHECK(uniq.count(s) == 1);
}

TEST_CASE("sample_neighbor_batch rejects invalid seeds and honors max_nodes") {
  const Graph g = random_graph(10, 5, 3);
  CHECK_THROWS_AS(sample_neighbor_batch(g, {42}, 3, 1, 1), InputError);

  const BatchSample capped = sample_neighbor_batch(g, {0, 1}, 10, 3, 7, 4);
  CHECK(capped.node_ids.size() <= 4);
  CHECK(capped.node_ids[0] == 0);
  CHECK(capped.node_ids[1] == 1);
}
