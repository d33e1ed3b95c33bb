#pragma once

#include <stdexcept>
#include <string>

#include "phasenas/llm_client.hpp"
#include "phasenas/search.hpp"

namespace phasenas::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Merged view of everything a run needs. Loaded from a single JSON file;
// unknown keys anywhere are errors so that a mistyped threshold name cannot
// silently change search behavior.
struct RunConfig {
  ArchMode mode = ArchMode::Classification;
  std::string generator = "mock";  // mock | micro | llm
  std::string init_arch_path;
  std::string init_arch_text;
  SearchConfig search;
  EndpointConfig endpoint;
  int bench_seeds = 10;
  std::string table_cache_dir = ".";
  bool bench_ablation = false;
  std::string log_path = "search_log.jsonl";
  std::string best_path = "best.arch";
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& text);

}  // namespace phasenas::cli
