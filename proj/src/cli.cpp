#include "ufgw/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "ufgw/diffusion.hpp"
#include "ufgw/errors.hpp"
#include "ufgw/gradients.hpp"
#include "ufgw/graph.hpp"
#include "ufgw/harness.hpp"
#include "ufgw/report.hpp"
#include "ufgw/rng.hpp"
#include "ufgw/semantic.hpp"
#include "ufgw/solver.hpp"

namespace ufgw {

namespace {

RunConfig load_config(const std::optional<std::string>& path) {
  if (path) return parse_config_file(*path);
  return RunConfig{};
}

int run_guarded(const char* command, const std::function<int()>& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return static_cast<int>(ExitCode::usage);
  } catch (const InputError& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return static_cast<int>(ExitCode::input);
  } catch (const ValidationError& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return static_cast<int>(ExitCode::input);
  } catch (const NumericalError& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return static_cast<int>(ExitCode::numerical);
  } catch (const std::exception& e) {
    std::cerr << command << ": internal error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::numerical);
  }
}

PprMatrix compute_ppr_by_method(const Graph& g, const RunConfig& cfg) {
  if (cfg.ppr_method == "power") return compute_ppr_power(g, cfg.beta, cfg.ppr_tol);
  return compute_ppr(g, cfg.beta);
}

}  // namespace

std::size_t effective_thread_cap() {
  if (const char* env = std::getenv("UFGW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    throw UsageError("UFGW_THREADS must be a positive integer");
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? hc : 1;
}

int run_diffuse(const DiffuseArgs& args) {
  return run_guarded("diffuse", [&] {
    RunConfig cfg = load_config(args.config_path);
    if (args.beta) cfg.beta = *args.beta;
    cfg.validate();
    const Graph g = load_edge_list(args.edge_list);
    const PprMatrix ppr = compute_ppr_by_method(g, cfg);
    save_ppr_cache(ppr, args.out);
    const double max_dev =
        (ppr.values.rowwise().sum().array() - 1.0).abs().maxCoeff();
    std::printf("nodes=%zu beta=%.17g max_row_sum_deviation=%.3e\n", g.num_nodes, ppr.beta,
                max_dev);
    return static_cast<int>(ExitCode::ok);
  });
}

namespace {

struct BatchResult {
  nlohmann::json record;
  std::vector<NodeId> nodes;
  Eigen::VectorXd mass_ratio;
  Eigen::VectorXd diag_share;
  Eigen::VectorXd cost_per_node;
  Eigen::VectorXd row_mass;
};

BatchResult solve_align_batch(std::size_t index, const BatchSample& sample,
                              const EmbeddingMatrix& emb, const PprMatrix& ppr,
                              const RunConfig& cfg) {
  const auto nb = static_cast<Eigen::Index>(sample.node_ids.size());
  const MeasureSpace semantic =
      build_measure_space(cosine_cost(emb, sample.node_ids), cfg.delta);
  const MeasureSpace graph_space =
      measure_space_from_normalized(graph_cost_for_batch(ppr, sample, cfg.delta));
  auto [plan, report] = solve_ufgw(semantic, graph_space, cfg.ufgw);

  const Eigen::MatrixXd anchor = anchor_matrix(nb, cfg.ufgw.tau);
  const Eigen::MatrixXd g_final =
      linearized_gradient(semantic.cost, graph_space.cost, anchor, plan.pi, cfg.ufgw.alpha);
  const MassDiagnostics diag =
      mass_equilibrium_diagnostics(plan, g_final, semantic.mu, cfg.ufgw.rho);

  BatchResult out;
  out.nodes = sample.node_ids;
  out.row_mass = report.row_mass;
  out.mass_ratio = report.row_mass.array() * static_cast<double>(nb);
  out.cost_per_node = diag.cost_per_node;
  out.diag_share.resize(nb);
  int counts[3] = {0, 0, 0};
  for (Eigen::Index i = 0; i < nb; ++i) {
    const double r = report.row_mass(i);
    out.diag_share(i) = r > 0.0 ? plan.pi(i, i) / r : 0.0;
    ++counts[static_cast<int>(report.node_class[static_cast<std::size_t>(i)])];
  }
  out.record = nlohmann::json{
      {"type", "batch"},
      {"batch", index},
      {"num_nodes", sample.node_ids.size()},
      {"num_seeds", sample.seed_ids.size()},
      {"loss_linear", report.loss_linear},
      {"loss_quadratic", report.loss_quadratic},
      {"loss_kl", report.loss_kl},
      {"loss_entropy", report.loss_entropy},
      {"loss_total", report.loss_total},
      {"converged", plan.converged},
      {"final_residual", plan.final_residual},
      {"bcd_iterations", report.bcd_iterations},
      {"anchor", counts[0]},
      {"smoothed", counts[1]},
      {"rejected", counts[2]},
  };
  return out;
}

}  // namespace

int run_align(const AlignArgs& args) {
  return run_guarded("align", [&] {
    RunConfig cfg = load_config(args.config_path);
    if (args.seed) cfg.rng_seed = *args.seed;
    cfg.validate();

    const Graph g = load_edge_list(args.edge_list);
    const EmbeddingMatrix emb = load_embeddings(args.embeddings);
    if (static_cast<std::size_t>(emb.rows()) != g.num_nodes) {
      throw ValidationError("embedding rows (" + std::to_string(emb.rows()) +
                            ") do not match graph nodes (" + std::to_string(g.num_nodes) + ")");
    }
    PprMatrix ppr;
    if (args.ppr_cache) {
      ppr = load_ppr_cache(*args.ppr_cache);
      if (static_cast<std::size_t>(ppr.values.rows()) != g.num_nodes) {
        throw ValidationError("PPR cache size does not match the graph");
      }
    } else {
      ppr = compute_ppr_by_method(g, cfg);
    }

    // round-robin seed partition covering every node at least once
    const std::size_t slice =
        cfg.hops > 0 ? std::max<std::size_t>(2, cfg.batch_size / 2)
                     : std::max<std::size_t>(2, cfg.batch_size);
    std::vector<std::vector<NodeId>> seed_groups;
    for (std::size_t start = 0; start < g.num_nodes; start += slice) {
      std::vector<NodeId> seeds;
      for (std::size_t i = start; i < std::min(g.num_nodes, start + slice); ++i) {
        seeds.push_back(static_cast<NodeId>(i));
      }
      if (seeds.size() == 1 && !seed_groups.empty()) {
        seed_groups.back().push_back(seeds[0]);
      } else {
        seed_groups.push_back(std::move(seeds));
      }
    }

    std::vector<BatchSample> samples(seed_groups.size());
    for (std::size_t b = 0; b < seed_groups.size(); ++b) {
      samples[b] = sample_neighbor_batch(g, seed_groups[b], cfg.fanout, cfg.hops,
                                         cfg.rng_seed + b, cfg.batch_size);
    }

    std::vector<BatchResult> results(samples.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;
    const std::size_t workers =
        std::min({effective_thread_cap(), samples.size(), std::size_t{64}});
    auto worker = [&] {
      while (true) {
        const std::size_t b = next.fetch_add(1);
        if (b >= samples.size() || failed.load()) break;
        try {
          results[b] = solve_align_batch(b, samples[b], emb, ppr, cfg);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          failed.store(true);
          if (failure.empty()) failure = "batch " + std::to_string(b) + ": " + e.what();
        }
      }
    };
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    if (failed.load()) throw NumericalError(failure);

    // aggregate per-node stats across batches by averaging
    const std::size_t n = g.num_nodes;
    std::vector<double> sum_ratio(n, 0.0), sum_share(n, 0.0), sum_cost(n, 0.0),
        sum_mass(n, 0.0);
    std::vector<int> hits(n, 0);
    for (const auto& res : results) {
      for (std::size_t i = 0; i < res.nodes.size(); ++i) {
        const NodeId v = res.nodes[i];
        const auto ie = static_cast<Eigen::Index>(i);
        sum_ratio[v] += res.mass_ratio(ie);
        sum_share[v] += res.diag_share(ie);
        sum_cost[v] += res.cost_per_node(ie);
        sum_mass[v] += res.row_mass(ie);
        ++hits[v];
      }
    }

    ReportWriter writer(args.out);
    writer.write_header("align", config_to_json(cfg));
    for (const auto& res : results) writer.write_record(res.record);
    int class_counts[3] = {0, 0, 0};
    for (std::size_t v = 0; v < n; ++v) {
      if (hits[v] == 0) {
        throw InternalError("node " + std::to_string(v) + " missing from every batch");
      }
      const double k = hits[v];
      const double ratio = sum_ratio[v] / k;
      const double share = sum_share[v] / k;
      const char* cls = "smoothed";
      if (ratio < cfg.ufgw.reject_mass_frac) {
        cls = "rejected";
      } else if (ratio >= cfg.ufgw.anchor_mass_frac && share >= cfg.ufgw.anchor_diag_share) {
        cls = "anchor";
      }
      ++class_counts[cls[0] == 'a' ? 0 : (cls[0] == 's' ? 1 : 2)];
      writer.write_record(nlohmann::json{
          {"type", "node"},
          {"node", v},
          {"row_mass", sum_mass[v] / k},
          {"mass_ratio", ratio},
          {"diag_share", share},
          {"c", sum_cost[v] / k},
          {"class", cls},
          {"batches", hits[v]},
      });
    }
    writer.write_record(nlohmann::json{
        {"type", "summary"},
        {"batches", results.size()},
        {"anchor", class_counts[0]},
        {"smoothed", class_counts[1]},
        {"rejected", class_counts[2]},
    });
    writer.close();
    std::printf("batches=%zu nodes=%zu anchor=%d smoothed=%d rejected=%d\n", results.size(), n,
                class_counts[0], class_counts[1], class_counts[2]);
    return static_cast<int>(ExitCode::ok);
  });
}

int run_analyze_conflict(const AnalyzeConflictArgs& args) {
  return run_guarded("analyze-conflict", [&] {
    RunConfig cfg = load_config(args.config_path);
    if (args.sample_edges) cfg.sample_edges = *args.sample_edges;
    if (args.theta) cfg.theta = *args.theta;
    if (args.seed) cfg.rng_seed = *args.seed;
    cfg.validate();

    const Graph g = load_edge_list(args.edge_list);
    const EmbeddingMatrix text = load_embeddings(args.text_embeddings, Modality::text);
    const EmbeddingMatrix image = load_embeddings(args.image_embeddings, Modality::image);
    if (static_cast<std::size_t>(text.rows()) != g.num_nodes ||
        static_cast<std::size_t>(image.rows()) != g.num_nodes) {
      throw ValidationError("embedding row counts do not match graph nodes");
    }

    Rng rng(cfg.rng_seed);
    const std::size_t take = std::min(cfg.sample_edges, g.num_edges());
    const std::vector<std::size_t> chosen = rng.sample_without_replacement(g.num_edges(), take);

    auto cosine = [](const EmbeddingMatrix& e, NodeId a, NodeId b) {
      const auto ra = e.values.row(a);
      const auto rb = e.values.row(b);
      return ra.dot(rb) / std::max(ra.norm() * rb.norm(), 1e-12);
    };

    ReportWriter writer(args.out);
    writer.write_header("analyze-conflict", config_to_json(cfg));
    int counts[4] = {0, 0, 0, 0};  // both, text_only, image_only, neither
    for (const std::size_t k : chosen) {
      const auto [src, dst] = g.edges[k];
      const double ct = cosine(text, src, dst);
      const double ci = cosine(image, src, dst);
      const bool ts = ct >= cfg.theta;
      const bool is = ci >= cfg.theta;
      const char* quadrant = ts ? (is ? "both_similar" : "text_only")
                                : (is ? "image_only" : "neither");
      ++counts[ts ? (is ? 0 : 1) : (is ? 2 : 3)];
      writer.write_record(nlohmann::json{
          {"type", "edge"},
          {"edge_index", k},
          {"src", src},
          {"dst", dst},
          {"cos_text", ct},
          {"cos_image", ci},
          {"quadrant", quadrant},
      });
    }
    writer.write_record(nlohmann::json{
        {"type", "summary"},
        {"sampled", take},
        {"both_similar", counts[0]},
        {"text_only", counts[1]},
        {"image_only", counts[2]},
        {"neither", counts[3]},
    });
    writer.close();
    std::printf("sampled=%zu both_similar=%d text_only=%d image_only=%d neither=%d\n", take,
                counts[0], counts[1], counts[2], counts[3]);
    return static_cast<int>(ExitCode::ok);
  });
}

int run_demo(const DemoArgs& args) {
  return run_guarded("demo", [&] {
    RunConfig cfg = load_config(args.config_path);
    if (args.seed) cfg.rng_seed = *args.seed;
    cfg.validate();

    MagGenConfig gen;
    gen.avg_degree = cfg.demo_avg_degree;
    gen.flip_fraction = cfg.demo_flip_fraction;
    gen.noise_text = cfg.demo_noise_text;
    gen.noise_image = cfg.demo_noise_image;
    const SyntheticMag mag = generate_synthetic_mag(cfg.demo_nodes, cfg.demo_clusters,
                                                    cfg.demo_conflict, cfg.rng_seed, gen);
    TrainOptions opts;
    opts.batch_size = cfg.demo_batch_size;
    opts.encoder_dim = cfg.demo_encoder_dim;
    opts.num_labeled = cfg.demo_labels;
    opts.beta = cfg.beta;
    opts.delta = cfg.delta;
    opts.track_rejections = true;
    const TrainState state = train_toy_encoder(mag, cfg.ufgw, cfg.lambda, cfg.demo_steps,
                                               cfg.demo_lr, cfg.rng_seed, opts);

    ReportWriter writer(args.out);
    writer.write_header("demo", config_to_json(cfg));
    for (std::size_t s = 0; s < state.loss_history.size(); ++s) {
      const StepLoss& l = state.loss_history[s];
      writer.write_record(nlohmann::json{
          {"type", "step"},
          {"step", s},
          {"task", l.task},
          {"reg_text", l.reg_text},
          {"reg_image", l.reg_image},
          {"total", l.total},
      });
    }
    const double acc = evaluate_accuracy(mag, state);
    const auto counts = final_node_class_counts(mag, state, cfg.ufgw, cfg.demo_batch_size,
                                                cfg.delta, cfg.rng_seed);
    writer.write_record(nlohmann::json{
        {"type", "summary"},
        {"steps", state.step},
        {"accuracy", acc},
        {"anchor", counts[0]},
        {"smoothed", counts[1]},
        {"rejected", counts[2]},
        {"rejected_conflict", state.rejected_conflict},
        {"seen_conflict", state.seen_conflict},
        {"rejected_clean", state.rejected_clean},
        {"seen_clean", state.seen_clean},
    });
    writer.close();
    std::printf("steps=%d accuracy=%.4f anchor=%d smoothed=%d rejected=%d\n", state.step, acc,
                counts[0], counts[1], counts[2]);
    return static_cast<int>(ExitCode::ok);
  });
}

}  // namespace ufgw
