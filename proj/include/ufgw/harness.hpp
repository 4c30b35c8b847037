#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ufgw/graph.hpp"
#include "ufgw/semantic.hpp"
#include "ufgw/solver.hpp"

namespace ufgw {

enum class EdgeTag { both_similar, text_only, image_only, neither };

const char* edge_tag_name(EdgeTag t);
EdgeTag edge_tag_from_name(const std::string& name);

// Synthetic multimodal attributed graph with planted cross-modal conflicts.
// Every node carries a text cluster and an image cluster; "flipped" nodes
// disagree between the two, and conflict edges are built around them:
//   text_only  - endpoints share the text cluster but not the image cluster
//   image_only - endpoints share the image cluster but not the text cluster
//   both_similar - endpoints agree in both
// conflict_labels[k] tags graph.edges[k].
struct SyntheticMag {
  Graph graph;
  EmbeddingMatrix text_emb;
  EmbeddingMatrix image_emb;
  std::vector<EdgeTag> conflict_labels;
  std::vector<int> text_cluster;
  std::vector<int> image_cluster;
  std::vector<bool> flipped;
  int clusters = 0;
};

struct MagGenConfig {
  std::size_t avg_degree = 6;
  double flip_fraction = 0.1;   // share of nodes whose image cluster disagrees
  double noise_text = 0.2;
  double noise_image = 0.2;
  double cluster_scale = 1.5;   // cluster-mean magnitude
  Eigen::Index dim_text = 16;
  Eigen::Index dim_image = 12;
};

SyntheticMag generate_synthetic_mag(std::size_t n, int clusters, double conflict_fraction,
                                    std::uint64_t rng_seed, const MagGenConfig& gen = {});

// Labels sidecar: one "edge_index tag" line per edge.
void save_labels_sidecar(const SyntheticMag& mag, const std::string& path);
std::vector<EdgeTag> load_labels_sidecar(const std::string& path);

struct StepLoss {
  double task = 0.0;
  double reg_text = 0.0;
  double reg_image = 0.0;
  double total = 0.0;  // task + lambda * (reg_text + reg_image)
};

struct TrainOptions {
  std::size_t batch_size = 48;
  Eigen::Index encoder_dim = 4;
  std::size_t num_labeled = 12;  // first num_labeled nodes; stratified since t_i = i mod K
  std::size_t fanout = 10;
  std::size_t hops = 0;          // batches are partition chunks by default
  double beta = 0.15;            // diffusion teleport probability
  double delta = 1e-9;
  bool task_only = false;        // skip regularizer solves entirely
  bool track_rejections = false; // accumulate per-class rejection counts (2nd half)
};

struct TrainState {
  Eigen::MatrixXd w_text;    // d_text_raw x d
  Eigen::MatrixXd w_image;   // d_image_raw x d
  Eigen::MatrixXd head;      // 2d x clusters, trained with the task loss
  int step = 0;
  std::vector<StepLoss> loss_history;
  // rejection statistics over the second half of training, both modalities
  std::int64_t rejected_conflict = 0;
  std::int64_t seen_conflict = 0;
  std::int64_t rejected_clean = 0;
  std::int64_t seen_clean = 0;
};

// Trains one linear encoder per modality plus a linear classification head with
// plain gradient descent. Each step solves the transport problem per modality
// on one batch, applies the detached-plan regularizer gradient scaled by
// lambda, and a cross-entropy gradient on the labeled subset. Deterministic for
// a fixed rng_seed.
TrainState train_toy_encoder(const SyntheticMag& mag, const UfgwConfig& cfg, double lambda,
                             int steps, double lr, std::uint64_t rng_seed,
                             const TrainOptions& opts = {});

// Fraction of all nodes whose head prediction matches the text cluster.
double evaluate_accuracy(const SyntheticMag& mag, const TrainState& state);

// Node classification counts (anchor, smoothed, rejected) at the final encoder,
// text modality, over a deterministic partition of all nodes.
std::array<int, 3> final_node_class_counts(const SyntheticMag& mag, const TrainState& state,
                                           const UfgwConfig& cfg, std::size_t batch_size,
                                           double delta, std::uint64_t rng_seed);

}  // namespace ufgw
