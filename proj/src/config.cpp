#include "ufgw/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>

#include "ufgw/errors.hpp"

namespace ufgw {

namespace {

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw InputError("config key '" + key + "': cannot parse '" + value + "' as a number");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  long long x = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), x);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw InputError("config key '" + key + "': cannot parse '" + value + "' as an integer");
  }
  return x;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  const auto last = s.find_last_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, last - first + 1);
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"alpha", [](RunConfig& c, auto& k, auto& v) { c.ufgw.alpha = parse_double(k, v); }},
      {"rho", [](RunConfig& c, auto& k, auto& v) { c.ufgw.rho = parse_double(k, v); }},
      {"epsilon", [](RunConfig& c, auto& k, auto& v) { c.ufgw.epsilon = parse_double(k, v); }},
      {"tau", [](RunConfig& c, auto& k, auto& v) { c.ufgw.tau = parse_double(k, v); }},
      {"sinkhorn_iters",
       [](RunConfig& c, auto& k, auto& v) { c.ufgw.sinkhorn_iters = static_cast<int>(parse_int(k, v)); }},
      {"bcd_iters",
       [](RunConfig& c, auto& k, auto& v) { c.ufgw.bcd_iters = static_cast<int>(parse_int(k, v)); }},
      {"tol", [](RunConfig& c, auto& k, auto& v) { c.ufgw.tol = parse_double(k, v); }},
      {"bcd_damping",
       [](RunConfig& c, auto& k, auto& v) { c.ufgw.bcd_damping = parse_double(k, v); }},
      {"anchor_mass_frac",
       [](RunConfig& c, auto& k, auto& v) { c.ufgw.anchor_mass_frac = parse_double(k, v); }},
      {"anchor_diag_share",
       [](RunConfig& c, auto& k, auto& v) { c.ufgw.anchor_diag_share = parse_double(k, v); }},
      {"reject_mass_frac",
       [](RunConfig& c, auto& k, auto& v) { c.ufgw.reject_mass_frac = parse_double(k, v); }},
      {"beta", [](RunConfig& c, auto& k, auto& v) { c.beta = parse_double(k, v); }},
      {"delta", [](RunConfig& c, auto& k, auto& v) { c.delta = parse_double(k, v); }},
      {"lambda", [](RunConfig& c, auto& k, auto& v) { c.lambda = parse_double(k, v); }},
      {"batch_size",
       [](RunConfig& c, auto& k, auto& v) { c.batch_size = static_cast<std::size_t>(parse_int(k, v)); }},
      {"fanout",
       [](RunConfig& c, auto& k, auto& v) { c.fanout = static_cast<std::size_t>(parse_int(k, v)); }},
      {"hops",
       [](RunConfig& c, auto& k, auto& v) { c.hops = static_cast<std::size_t>(parse_int(k, v)); }},
      {"rng_seed",
       [](RunConfig& c, auto& k, auto& v) { c.rng_seed = static_cast<std::uint64_t>(parse_int(k, v)); }},
      {"theta", [](RunConfig& c, auto& k, auto& v) { c.theta = parse_double(k, v); }},
      {"sample_edges",
       [](RunConfig& c, auto& k, auto& v) { c.sample_edges = static_cast<std::size_t>(parse_int(k, v)); }},
      {"ppr_method",
       [](RunConfig& c, auto&, auto& v) {
         if (v != "dense" && v != "power") {
           throw InputError("config key 'ppr_method': expected 'dense' or 'power', got '" + v + "'");
         }
         c.ppr_method = v;
       }},
      {"ppr_tol", [](RunConfig& c, auto& k, auto& v) { c.ppr_tol = parse_double(k, v); }},
      {"demo_nodes",
       [](RunConfig& c, auto& k, auto& v) { c.demo_nodes = static_cast<std::size_t>(parse_int(k, v)); }},
      {"demo_clusters",
       [](RunConfig& c, auto& k, auto& v) { c.demo_clusters = static_cast<int>(parse_int(k, v)); }},
      {"demo_conflict",
       [](RunConfig& c, auto& k, auto& v) { c.demo_conflict = parse_double(k, v); }},
      {"demo_steps",
       [](RunConfig& c, auto& k, auto& v) { c.demo_steps = static_cast<int>(parse_int(k, v)); }},
      {"demo_lr", [](RunConfig& c, auto& k, auto& v) { c.demo_lr = parse_double(k, v); }},
      {"demo_batch_size",
       [](RunConfig& c, auto& k, auto& v) { c.demo_batch_size = static_cast<std::size_t>(parse_int(k, v)); }},
      {"demo_labels",
       [](RunConfig& c, auto& k, auto& v) { c.demo_labels = static_cast<std::size_t>(parse_int(k, v)); }},
      {"demo_encoder_dim",
       [](RunConfig& c, auto& k, auto& v) { c.demo_encoder_dim = static_cast<int>(parse_int(k, v)); }},
      {"demo_noise_text",
       [](RunConfig& c, auto& k, auto& v) { c.demo_noise_text = parse_double(k, v); }},
      {"demo_noise_image",
       [](RunConfig& c, auto& k, auto& v) { c.demo_noise_image = parse_double(k, v); }},
      {"demo_flip_fraction",
       [](RunConfig& c, auto& k, auto& v) { c.demo_flip_fraction = parse_double(k, v); }},
      {"demo_avg_degree",
       [](RunConfig& c, auto& k, auto& v) { c.demo_avg_degree = static_cast<std::size_t>(parse_int(k, v)); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) {
    throw InputError("unknown config key '" + key + "'");
  }
  it->second(cfg, key, value);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw InputError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      apply_config_entry(cfg, key, value);
    } catch (const InputError& e) {
      throw InputError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  ufgw.validate();
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("beta must lie in (0, 1)");
  if (!(delta > 0.0)) throw ValidationError("delta must be positive");
  if (batch_size < 2) throw ValidationError("batch_size must be >= 2");
  if (lambda < 0.0) throw ValidationError("lambda must be non-negative");
  if (!(theta > -1.0 && theta < 1.0)) throw ValidationError("theta must lie in (-1, 1)");
  if (demo_clusters < 2) throw ValidationError("demo_clusters must be >= 2");
  if (demo_steps < 1) throw ValidationError("demo_steps must be >= 1");
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  return nlohmann::json{
      {"alpha", cfg.ufgw.alpha},
      {"rho", cfg.ufgw.rho},
      {"epsilon", cfg.ufgw.epsilon},
      {"tau", cfg.ufgw.tau},
      {"sinkhorn_iters", cfg.ufgw.sinkhorn_iters},
      {"bcd_iters", cfg.ufgw.bcd_iters},
      {"tol", cfg.ufgw.tol},
      {"bcd_damping", cfg.ufgw.bcd_damping},
      {"anchor_mass_frac", cfg.ufgw.anchor_mass_frac},
      {"anchor_diag_share", cfg.ufgw.anchor_diag_share},
      {"reject_mass_frac", cfg.ufgw.reject_mass_frac},
      {"beta", cfg.beta},
      {"delta", cfg.delta},
      {"lambda", cfg.lambda},
      {"batch_size", cfg.batch_size},
      {"fanout", cfg.fanout},
      {"hops", cfg.hops},
      {"rng_seed", cfg.rng_seed},
      {"theta", cfg.theta},
      {"sample_edges", cfg.sample_edges},
      {"ppr_method", cfg.ppr_method},
      {"ppr_tol", cfg.ppr_tol},
      {"demo_nodes", cfg.demo_nodes},
      {"demo_clusters", cfg.demo_clusters},
      {"demo_conflict", cfg.demo_conflict},
      {"demo_steps", cfg.demo_steps},
      {"demo_lr", cfg.demo_lr},
      {"demo_batch_size", cfg.demo_batch_size},
      {"demo_labels", cfg.demo_labels},
      {"demo_encoder_dim", cfg.demo_encoder_dim},
      {"demo_noise_text", cfg.demo_noise_text},
      {"demo_noise_image", cfg.demo_noise_image},
      {"demo_flip_fraction", cfg.demo_flip_fraction},
      {"demo_avg_degree", cfg.demo_avg_degree},
  };
}

}  // namespace ufgw
