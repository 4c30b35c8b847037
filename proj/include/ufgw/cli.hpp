#pragma once

#include <optional>
#include <string>

#include "ufgw/config.hpp"
#include "ufgw/errors.hpp"

namespace ufgw {

struct DiffuseArgs {
  std::string edge_list;
  std::string out;
  std::optional<std::string> config_path;
  std::optional<double> beta;  // overrides the config value
};

struct AlignArgs {
  std::string edge_list;
  std::string embeddings;
  std::string out;
  std::optional<std::string> ppr_cache;
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
};

struct AnalyzeConflictArgs {
  std::string edge_list;
  std::string text_embeddings;
  std::string image_embeddings;
  std::string out;
  std::optional<std::string> config_path;
  std::optional<std::size_t> sample_edges;
  std::optional<double> theta;
  std::optional<std::uint64_t> seed;
};

struct DemoArgs {
  std::string out;
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
};

// Command bodies. Each returns a process exit code and reports errors on
// stderr; exceptions do not escape.
int run_diffuse(const DiffuseArgs& args);
int run_align(const AlignArgs& args);
int run_analyze_conflict(const AnalyzeConflictArgs& args);
int run_demo(const DemoArgs& args);

// Worker cap: UFGW_THREADS when set, hardware concurrency otherwise.
std::size_t effective_thread_cap();

}  // namespace ufgw
