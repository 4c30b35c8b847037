#pragma once

#include <cstdint>
#include <string>

#include "ufgw/solver.hpp"

#include <nlohmann/json_fwd.hpp>

namespace ufgw {

// Flat key = value run configuration shared by every CLI command. Unknown keys
// are rejected so typos fail loudly.
struct RunConfig {
  UfgwConfig ufgw;            // alpha, rho, epsilon, tau, iteration counts, cutoffs
  double beta = 0.15;         // diffusion teleport probability
  double delta = 1e-9;        // log/normalization stabilizer
  double lambda = 0.1;        // regularization strength in the training objective
  std::size_t batch_size = 512;
  std::size_t fanout = 10;
  std::size_t hops = 2;
  std::uint64_t rng_seed = 1;
  double theta = 0.5;         // conflict-analysis similarity threshold
  std::size_t sample_edges = 1000;
  std::string ppr_method = "dense";  // dense | power
  double ppr_tol = 1e-8;

  // synthetic demo knobs
  std::size_t demo_nodes = 200;
  int demo_clusters = 4;
  double demo_conflict = 0.3;
  int demo_steps = 200;
  double demo_lr = 0.25;
  std::size_t demo_batch_size = 48;
  std::size_t demo_labels = 12;
  int demo_encoder_dim = 4;
  double demo_noise_text = 0.2;
  double demo_noise_image = 0.2;
  double demo_flip_fraction = 0.1;
  std::size_t demo_avg_degree = 6;

  void validate() const;
};

// Parses "key = value" lines; '#' starts a comment. Throws InputError on
// malformed lines or unknown keys.
RunConfig parse_config_file(const std::string& path);

// Applies one key=value assignment (the file parser and CLI overrides share it).
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

nlohmann::json config_to_json(const RunConfig& cfg);

}  // namespace ufgw
