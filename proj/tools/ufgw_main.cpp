#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ufgw/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Unbalanced fused Gromov-Wasserstein alignment for multimodal graphs"};
  app.require_subcommand(1);

  ufgw::DiffuseArgs diffuse;
  std::optional<double> beta;
  std::optional<std::string> diffuse_config;
  auto* cmd_diffuse = app.add_subcommand("diffuse", "Precompute the PPR diffusion cache");
  cmd_diffuse->add_option("--edge-list", diffuse.edge_list, "Edge list file")->required();
  cmd_diffuse->add_option("--out", diffuse.out, "Output cache path")->required();
  cmd_diffuse->add_option("--config", diffuse_config, "Config file");
  cmd_diffuse->add_option("--beta", beta, "Teleport probability override");

  ufgw::AlignArgs align;
  std::optional<std::string> align_config, align_cache;
  std::optional<std::uint64_t> align_seed;
  auto* cmd_align = app.add_subcommand("align", "Solve the batch alignment problem");
  cmd_align->add_option("--edge-list", align.edge_list, "Edge list file")->required();
  cmd_align->add_option("--embeddings", align.embeddings, "Embedding file")->required();
  cmd_align->add_option("--out", align.out, "Report path")->required();
  cmd_align->add_option("--ppr-cache", align_cache, "Precomputed PPR cache");
  cmd_align->add_option("--config", align_config, "Config file");
  cmd_align->add_option("--seed", align_seed, "RNG seed override");

  ufgw::AnalyzeConflictArgs analyze;
  std::optional<std::string> analyze_config;
  std::optional<std::size_t> analyze_edges;
  std::optional<double> analyze_theta;
  std::optional<std::uint64_t> analyze_seed;
  auto* cmd_analyze =
      app.add_subcommand("analyze-conflict", "Per-edge cross-modal similarity quadrants");
  cmd_analyze->add_option("--edge-list", analyze.edge_list, "Edge list file")->required();
  cmd_analyze->add_option("--text-embeddings", analyze.text_embeddings, "Text embeddings")
      ->required();
  cmd_analyze->add_option("--image-embeddings", analyze.image_embeddings, "Image embeddings")
      ->required();
  cmd_analyze->add_option("--out", analyze.out, "Report path")->required();
  cmd_analyze->add_option("--config", analyze_config, "Config file");
  cmd_analyze->add_option("--sample-edges", analyze_edges, "Edges to sample");
  cmd_analyze->add_option("--theta", analyze_theta, "Similarity threshold");
  cmd_analyze->add_option("--seed", analyze_seed, "RNG seed override");

  ufgw::DemoArgs demo;
  std::optional<std::string> demo_config;
  std::optional<std::uint64_t> demo_seed;
  auto* cmd_demo = app.add_subcommand("demo", "Synthetic end-to-end training demo");
  cmd_demo->add_option("--out", demo.out, "Report path")->required();
  cmd_demo->add_option("--config", demo_config, "Config file");
  cmd_demo->add_option("--seed", demo_seed, "RNG seed override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(ufgw::ExitCode::usage);
  }

  if (cmd_diffuse->parsed()) {
    diffuse.config_path = diffuse_config;
    diffuse.beta = beta;
    return ufgw::run_diffuse(diffuse);
  }
  if (cmd_align->parsed()) {
    align.config_path = align_config;
    align.ppr_cache = align_cache;
    align.seed = align_seed;
    return ufgw::run_align(align);
  }
  if (cmd_analyze->parsed()) {
    analyze.config_path = analyze_config;
    analyze.sample_edges = analyze_edges;
    analyze.theta = analyze_theta;
    analyze.seed = analyze_seed;
    return ufgw::run_analyze_conflict(analyze);
  }
  if (cmd_demo->parsed()) {
    demo.config_path = demo_config;
    demo.seed = demo_seed;
    return ufgw::run_demo(demo);
  }
  return static_cast<int>(ufgw::ExitCode::usage);
}
