#include "ufgw/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ufgw/diffusion.hpp"
#include "ufgw/errors.hpp"
#include "ufgw/gradients.hpp"
#include "ufgw/rng.hpp"

namespace ufgw {

const char* edge_tag_name(EdgeTag t) {
  switch (t) {
    case EdgeTag::both_similar: return "both_similar";
    case EdgeTag::text_only: return "text_only";
    case EdgeTag::image_only: return "image_only";
    case EdgeTag::neither: return "neither";
  }
  return "?";
}

EdgeTag edge_tag_from_name(const std::string& name) {
  if (name == "both_similar") return EdgeTag::both_similar;
  if (name == "text_only") return EdgeTag::text_only;
  if (name == "image_only") return EdgeTag::image_only;
  if (name == "neither") return EdgeTag::neither;
  throw InputError("unknown edge tag '" + name + "'");
}

namespace {

using EdgeKey = std::pair<NodeId, NodeId>;

EdgeKey key(NodeId a, NodeId b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

}  // namespace

SyntheticMag generate_synthetic_mag(std::size_t n, int clusters, double conflict_fraction,
                                    std::uint64_t rng_seed, const MagGenConfig& gen) {
  if (clusters < 2 || n < static_cast<std::size_t>(clusters)) {
    throw ValidationError("need n >= clusters >= 2");
  }
  if (conflict_fraction < 0.0 || conflict_fraction > 1.0) {
    throw ValidationError("conflict_fraction must lie in [0, 1]");
  }
  Rng rng(rng_seed);
  const int k_clusters = clusters;

  SyntheticMag mag;
  mag.clusters = k_clusters;
  mag.text_cluster.resize(n);
  mag.image_cluster.resize(n);
  mag.flipped.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    mag.text_cluster[i] = static_cast<int>(i % static_cast<std::size_t>(k_clusters));
  }
  // stratified flips: the same share of every text cluster disagrees in the image
  const auto per_cluster =
      static_cast<std::size_t>(std::lround(gen.flip_fraction * static_cast<double>(n) /
                                           static_cast<double>(k_clusters)));
  for (int a = 0; a < k_clusters; ++a) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (mag.text_cluster[i] == a) members.push_back(i);
    }
    rng.shuffle(members);
    for (std::size_t j = 0; j < std::min(per_cluster, members.size()); ++j) {
      mag.flipped[members[j]] = true;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    mag.image_cluster[i] =
        mag.flipped[i] ? (mag.text_cluster[i] + 1) % k_clusters : mag.text_cluster[i];
  }

  std::vector<std::vector<NodeId>> clean_pool(static_cast<std::size_t>(k_clusters));
  std::vector<std::vector<NodeId>> flip_pool(static_cast<std::size_t>(k_clusters));
  std::vector<NodeId> flip_list;
  for (std::size_t i = 0; i < n; ++i) {
    auto& pool = mag.flipped[i] ? flip_pool : clean_pool;
    pool[static_cast<std::size_t>(mag.text_cluster[i])].push_back(static_cast<NodeId>(i));
    if (mag.flipped[i]) flip_list.push_back(static_cast<NodeId>(i));
  }

  const std::size_t target_edges = gen.avg_degree * n / 2;
  const auto n_conflict =
      static_cast<std::size_t>(std::lround(conflict_fraction * static_cast<double>(target_edges)));
  const std::size_t n_text_only = n_conflict / 2;
  const std::size_t n_image_only = n_conflict - n_text_only;
  const std::size_t n_both = target_edges - n_conflict;
  if (n_conflict > 0 && flip_list.empty()) {
    throw ValidationError("conflict_fraction > 0 requires flip_fraction > 0");
  }

  std::map<EdgeKey, EdgeTag> tags;
  auto add_edge = [&](NodeId u, NodeId v, EdgeTag tag) {
    if (u == v) return false;
    return tags.emplace(key(u, v), tag).second;
  };
  auto pick = [&](const std::vector<NodeId>& pool) { return pool[rng.index(pool.size())]; };

  // conflict edges round-robin over flipped nodes so each carries a fair share
  std::size_t cursor = 0;
  for (std::size_t got = 0, tries = 0; got < n_text_only && tries < 60 * (n_text_only + 1);
       ++tries) {
    const NodeId v = flip_list[cursor++ % flip_list.size()];
    const auto a = static_cast<std::size_t>(mag.text_cluster[v]);
    if (clean_pool[a].empty()) continue;
    if (add_edge(pick(clean_pool[a]), v, EdgeTag::text_only)) ++got;
  }
  cursor = 0;
  for (std::size_t got = 0, tries = 0; got < n_image_only && tries < 60 * (n_image_only + 1);
       ++tries) {
    const NodeId v = flip_list[cursor++ % flip_list.size()];
    const auto b = static_cast<std::size_t>(mag.image_cluster[v]);
    if (clean_pool[b].empty()) continue;
    if (add_edge(pick(clean_pool[b]), v, EdgeTag::image_only)) ++got;
  }
  for (std::size_t got = 0, tries = 0; got < n_both && tries < 60 * (n_both + 1); ++tries) {
    const auto a = rng.index(static_cast<std::size_t>(k_clusters));
    const bool use_flip = rng.uniform() >= 0.85 && flip_pool[a].size() >= 2;
    const auto& pool = use_flip ? flip_pool[a] : clean_pool[a];
    if (pool.size() < 2) continue;
    if (add_edge(pick(pool), pick(pool), EdgeTag::both_similar)) ++got;
  }

  // attach isolated nodes; with full planting the attachment must stay a conflict
  std::vector<std::size_t> degree(n, 0);
  for (const auto& [e, tag] : tags) {
    ++degree[e.first];
    ++degree[e.second];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (degree[i] > 0) continue;
    const auto a = static_cast<std::size_t>(mag.text_cluster[i]);
    for (int attempt = 0; attempt < 200; ++attempt) {
      NodeId j;
      EdgeTag tag;
      if (conflict_fraction >= 1.0) {
        const auto& pool = mag.flipped[i] ? clean_pool[a] : flip_pool[a];
        if (pool.empty()) break;
        j = pick(pool);
        tag = EdgeTag::text_only;
      } else {
        const auto& pool = mag.flipped[i] ? flip_pool[a] : clean_pool[a];
        if (pool.size() < 2) break;
        j = pick(pool);
        tag = EdgeTag::both_similar;
      }
      if (add_edge(static_cast<NodeId>(i), j, tag)) {
        ++degree[i];
        ++degree[j];
        break;
      }
    }
  }

  std::vector<EdgeKey> raw_edges;
  raw_edges.reserve(tags.size());
  for (const auto& [e, tag] : tags) raw_edges.push_back(e);
  mag.graph = build_graph(n, std::move(raw_edges));
  mag.conflict_labels.reserve(mag.graph.edges.size());
  for (const auto& e : mag.graph.edges) {
    mag.conflict_labels.push_back(tags.at(e));
  }

  mag.text_emb.modality = Modality::text;
  mag.text_emb.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), gen.dim_text);
  mag.image_emb.modality = Modality::image;
  mag.image_emb.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), gen.dim_image);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index d = 0; d < gen.dim_text; ++d) {
      mag.text_emb.values(row, d) = rng.normal(0.0, gen.noise_text);
    }
    mag.text_emb.values(row, mag.text_cluster[i] % gen.dim_text) += gen.cluster_scale;
    for (Eigen::Index d = 0; d < gen.dim_image; ++d) {
      mag.image_emb.values(row, d) = rng.normal(0.0, gen.noise_image);
    }
    mag.image_emb.values(row, mag.image_cluster[i] % gen.dim_image) += gen.cluster_scale;
  }
  return mag;
}

void save_labels_sidecar(const SyntheticMag& mag, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write labels sidecar: " + path);
  for (std::size_t k = 0; k < mag.conflict_labels.size(); ++k) {
    out << k << " " << edge_tag_name(mag.conflict_labels[k]) << "\n";
  }
  if (!out) throw InputError("failed writing labels sidecar: " + path);
}

std::vector<EdgeTag> load_labels_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open labels sidecar: " + path);
  std::vector<EdgeTag> tags;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t idx = 0;
    std::string name;
    if (!(ls >> idx >> name) || idx != tags.size()) {
      throw InputError(path + ":" + std::to_string(lineno) + ": bad sidecar line");
    }
    tags.push_back(edge_tag_from_name(name));
  }
  return tags;
}

namespace {

struct BatchGradient {
  Eigen::MatrixXd d_embedded;  // gradient w.r.t. the encoded batch rows
  double loss_total = 0.0;
  Eigen::VectorXd row_mass;
};

// One modality solve on a batch of encoded embeddings; returns the detached-plan
// regularizer gradient w.r.t. the encoded rows.
BatchGradient batch_reg_gradient(const Eigen::MatrixXd& embedded_batch,
                                 const Eigen::MatrixXd& ppr_block, const UfgwConfig& cfg,
                                 double delta) {
  const auto nb = embedded_batch.rows();
  EmbeddingMatrix batch_emb{embedded_batch, Modality::other};
  std::vector<std::uint32_t> all(static_cast<std::size_t>(nb));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
  const CostMatrix raw = cosine_cost(batch_emb, all);
  const MeasureSpace semantic = build_measure_space(raw, delta);

  CostMatrix graw;
  graw.kind = CostKind::graph;
  graw.values = (-(ppr_block.array() + delta).log()).cwiseMax(0.0);
  const MeasureSpace graph_space = build_measure_space(graw, delta);

  auto [plan, report] = solve_ufgw(semantic, graph_space, cfg);
  BatchGradient out;
  out.loss_total = report.loss_total;
  out.row_mass = report.row_mass;
  const Eigen::MatrixXd d_cost = grad_wrt_cost(semantic.cost, graph_space.cost, plan, cfg.alpha);
  out.d_embedded =
      grad_wrt_embeddings(batch_emb, d_cost, semantic.cost.normalization_mean, delta);
  return out;
}

}  // namespace

TrainState train_toy_encoder(const SyntheticMag& mag, const UfgwConfig& cfg, double lambda,
                             int steps, double lr, std::uint64_t rng_seed,
                             const TrainOptions& opts) {
  if (steps < 1) throw ValidationError("steps must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("lr must be positive");
  const std::size_t n = mag.graph.num_nodes;
  const int k_clusters = mag.clusters;
  const Eigen::Index d = opts.encoder_dim;
  const std::size_t n_labeled = std::min(opts.num_labeled, n);

  const PprMatrix ppr = compute_ppr(mag.graph, opts.beta);

  Rng rng(rng_seed);
  TrainState state;
  state.w_text.resize(mag.text_emb.dim(), d);
  state.w_image.resize(mag.image_emb.dim(), d);
  state.head = Eigen::MatrixXd::Zero(2 * d, k_clusters);
  for (Eigen::Index i = 0; i < state.w_text.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) state.w_text(i, j) = rng.normal(0.0, 0.3);
  }
  for (Eigen::Index i = 0; i < state.w_image.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) state.w_image(i, j) = rng.normal(0.0, 0.3);
  }

  std::vector<NodeId> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeId>(i);
  rng.shuffle(order);
  const std::size_t batch = std::min(opts.batch_size, n);
  const std::size_t num_chunks = (n + batch - 1) / batch;

  Eigen::MatrixXd labeled_text(static_cast<Eigen::Index>(n_labeled), mag.text_emb.dim());
  Eigen::MatrixXd labeled_image(static_cast<Eigen::Index>(n_labeled), mag.image_emb.dim());
  for (std::size_t i = 0; i < n_labeled; ++i) {
    labeled_text.row(static_cast<Eigen::Index>(i)) = mag.text_emb.values.row(static_cast<Eigen::Index>(i));
    labeled_image.row(static_cast<Eigen::Index>(i)) = mag.image_emb.values.row(static_cast<Eigen::Index>(i));
  }

  for (int step = 0; step < steps; ++step) {
    // batch = next partition chunk, optionally expanded by neighbor sampling
    const std::size_t c = static_cast<std::size_t>(step) % num_chunks;
    std::vector<NodeId> seeds(order.begin() + static_cast<std::ptrdiff_t>(c * batch),
                              order.begin() + static_cast<std::ptrdiff_t>(
                                                  std::min(n, (c + 1) * batch)));
    if (seeds.size() < 2) {
      seeds.assign(order.end() - static_cast<std::ptrdiff_t>(std::min(n, batch)), order.end());
    }
    const BatchSample sample = sample_neighbor_batch(mag.graph, seeds, opts.fanout, opts.hops,
                                                     rng_seed ^ (0x9e3779b9ull + step), batch);
    const auto nb = static_cast<Eigen::Index>(sample.node_ids.size());

    Eigen::MatrixXd raw_text(nb, mag.text_emb.dim());
    Eigen::MatrixXd raw_image(nb, mag.image_emb.dim());
    Eigen::MatrixXd ppr_block(nb, nb);
    for (Eigen::Index i = 0; i < nb; ++i) {
      const NodeId gi = sample.node_ids[static_cast<std::size_t>(i)];
      raw_text.row(i) = mag.text_emb.values.row(gi);
      raw_image.row(i) = mag.image_emb.values.row(gi);
      for (Eigen::Index j = 0; j < nb; ++j) {
        ppr_block(i, j) = ppr.values(gi, sample.node_ids[static_cast<std::size_t>(j)]);
      }
    }

    StepLoss losses;
    Eigen::MatrixXd grad_w_text = Eigen::MatrixXd::Zero(state.w_text.rows(), d);
    Eigen::MatrixXd grad_w_image = Eigen::MatrixXd::Zero(state.w_image.rows(), d);
    if (!opts.task_only) {
      const BatchGradient reg_t =
          batch_reg_gradient(raw_text * state.w_text, ppr_block, cfg, opts.delta);
      const BatchGradient reg_i =
          batch_reg_gradient(raw_image * state.w_image, ppr_block, cfg, opts.delta);
      losses.reg_text = reg_t.loss_total;
      losses.reg_image = reg_i.loss_total;
      grad_w_text += lambda * (raw_text.transpose() * reg_t.d_embedded);
      grad_w_image += lambda * (raw_image.transpose() * reg_i.d_embedded);
      if (opts.track_rejections && step >= steps / 2) {
        for (Eigen::Index i = 0; i < nb; ++i) {
          const NodeId gi = sample.node_ids[static_cast<std::size_t>(i)];
          const double mu_i = 1.0 / static_cast<double>(nb);
          const bool conflict = mag.flipped[gi];
          for (const auto* rm : {&reg_t.row_mass, &reg_i.row_mass}) {
            const bool rejected = (*rm)(i) < cfg.reject_mass_frac * mu_i;
            if (conflict) {
              ++state.seen_conflict;
              state.rejected_conflict += rejected;
            } else {
              ++state.seen_clean;
              state.rejected_clean += rejected;
            }
          }
        }
      }
    }

    // cross-entropy on the labeled subset, evaluated every step
    const Eigen::MatrixXd z_text = labeled_text * state.w_text;
    const Eigen::MatrixXd z_image = labeled_image * state.w_image;
    Eigen::MatrixXd features(static_cast<Eigen::Index>(n_labeled), 2 * d);
    features << z_text, z_image;
    Eigen::MatrixXd logits = features * state.head;
    Eigen::MatrixXd probs = logits;
    double task_loss = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      const double m = probs.row(i).maxCoeff();
      probs.row(i) = (probs.row(i).array() - m).exp();
      probs.row(i) /= probs.row(i).sum();
      const int y = mag.text_cluster[static_cast<std::size_t>(i)];
      task_loss -= std::log(std::max(probs(i, y), 1e-300));
      probs(i, y) -= 1.0;
    }
    task_loss /= static_cast<double>(n_labeled);
    probs /= static_cast<double>(n_labeled);
    const Eigen::MatrixXd grad_head = features.transpose() * probs;
    const Eigen::MatrixXd d_features = probs * state.head.transpose();
    grad_w_text += labeled_text.transpose() * d_features.leftCols(d);
    grad_w_image += labeled_image.transpose() * d_features.rightCols(d);

    losses.task = task_loss;
    losses.total = task_loss + lambda * (losses.reg_text + losses.reg_image);
    if (!std::isfinite(losses.total)) {
      throw NumericalError("non-finite training loss at step " + std::to_string(step) +
                           ": task=" + std::to_string(losses.task) +
                           " reg_text=" + std::to_string(losses.reg_text) +
                           " reg_image=" + std::to_string(losses.reg_image));
    }

    state.w_text -= lr * grad_w_text;
    state.w_image -= lr * grad_w_image;
    state.head -= lr * grad_head;
    state.loss_history.push_back(losses);
    state.step = step + 1;
  }
  return state;
}

double evaluate_accuracy(const SyntheticMag& mag, const TrainState& state) {
  const Eigen::MatrixXd z_text = mag.text_emb.values * state.w_text;
  const Eigen::MatrixXd z_image = mag.image_emb.values * state.w_image;
  Eigen::MatrixXd features(z_text.rows(), z_text.cols() + z_image.cols());
  features << z_text, z_image;
  const Eigen::MatrixXd logits = features * state.head;
  int correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    correct += (static_cast<int>(arg) == mag.text_cluster[static_cast<std::size_t>(i)]);
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

std::array<int, 3> final_node_class_counts(const SyntheticMag& mag, const TrainState& state,
                                           const UfgwConfig& cfg, std::size_t batch_size,
                                           double delta, std::uint64_t rng_seed) {
  const std::size_t n = mag.graph.num_nodes;
  const PprMatrix ppr = compute_ppr(mag.graph, 0.15);
  Rng rng(rng_seed);
  std::vector<NodeId> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeId>(i);
  rng.shuffle(order);
  const std::size_t batch = std::max<std::size_t>(2, std::min(batch_size, n));

  std::array<int, 3> counts{0, 0, 0};
  for (std::size_t start = 0; start < n; start += batch) {
    std::vector<NodeId> ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                            order.begin() + static_cast<std::ptrdiff_t>(
                                                std::min(n, start + batch)));
    if (ids.size() < 2) break;
    const auto nb = static_cast<Eigen::Index>(ids.size());
    Eigen::MatrixXd raw(nb, mag.text_emb.dim());
    Eigen::MatrixXd ppr_block(nb, nb);
    for (Eigen::Index i = 0; i < nb; ++i) {
      raw.row(i) = mag.text_emb.values.row(ids[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < nb; ++j) {
        ppr_block(i, j) = ppr.values(ids[static_cast<std::size_t>(i)],
                                     ids[static_cast<std::size_t>(j)]);
      }
    }
    EmbeddingMatrix encoded{raw * state.w_text, Modality::text};
    std::vector<std::uint32_t> all(static_cast<std::size_t>(nb));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
    const MeasureSpace semantic = build_measure_space(cosine_cost(encoded, all), delta);
    CostMatrix graw;
    graw.kind = CostKind::graph;
    graw.values = (-(ppr_block.array() + delta).log()).cwiseMax(0.0);
    const MeasureSpace graph_space = build_measure_space(graw, delta);
    auto [plan, report] = solve_ufgw(semantic, graph_space, cfg);
    for (NodeClass c : report.node_class) {
      ++counts[static_cast<std::size_t>(c)];
    }
  }
  return counts;
}

}  // namespace ufgw
