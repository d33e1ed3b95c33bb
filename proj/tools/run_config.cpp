#include "run_config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace phasenas::cli {

namespace {

using nlohmann::json;

void check_keys(const json& object, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key '" + where + key + "'");
    }
  }
}

template <typename T>
void read_field(const json& object, const char* key, T& out) {
  if (object.contains(key)) {
    try {
      out = object.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config key '") + key +
                        "' has the wrong type");
    }
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& err) {
    throw ConfigError(std::string("config is not valid JSON: ") + err.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");

  check_keys(root,
             {"mode", "generator", "init_arch", "init_arch_text", "score",
              "search", "constraints", "endpoint", "bench", "output"},
             "");

  RunConfig config;

  if (root.contains("mode")) {
    const auto mode = arch_mode_from_string(root.at("mode").get<std::string>());
    if (!mode) throw ConfigError("mode must be 'classification' or 'detection'");
    config.mode = *mode;
  }
  read_field(root, "generator", config.generator);
  if (config.generator != "mock" && config.generator != "micro" &&
      config.generator != "llm") {
    throw ConfigError("generator must be 'mock', 'micro' or 'llm'");
  }
  read_field(root, "init_arch", config.init_arch_path);
  read_field(root, "init_arch_text", config.init_arch_text);

  if (root.contains("score")) {
    const json& score = root.at("score");
    check_keys(score,
               {"gamma_mix", "epsilon", "repeats", "batch_size", "resolution",
                "seed"},
               "score.");
    read_field(score, "gamma_mix", config.search.score.gamma_mix);
    read_field(score, "epsilon", config.search.score.epsilon);
    read_field(score, "repeats", config.search.score.repeats);
    read_field(score, "batch_size", config.search.score.batch_size);
    read_field(score, "resolution", config.search.score.resolution);
    read_field(score, "seed", config.search.score.seed);
  }

  if (root.contains("search")) {
    const json& search = root.at("search");
    check_keys(search,
               {"gamma_trans", "gamma_stop", "pool_size", "max_iterations",
                "seed"},
               "search.");
    read_field(search, "gamma_trans", config.search.gamma_trans);
    read_field(search, "gamma_stop", config.search.gamma_stop);
    read_field(search, "pool_size", config.search.pool_size);
    read_field(search, "max_iterations", config.search.max_iterations);
    read_field(search, "seed", config.search.seed);
  }

  if (root.contains("constraints")) {
    const json& constraints = root.at("constraints");
    check_keys(constraints,
               {"max_params", "max_flops", "max_depth", "min_params"},
               "constraints.");
    read_field(constraints, "max_params", config.search.constraints.max_params);
    read_field(constraints, "max_flops", config.search.constraints.max_flops);
    read_field(constraints, "max_depth", config.search.constraints.max_depth);
    read_field(constraints, "min_params", config.search.constraints.min_params);
  }

  if (root.contains("endpoint")) {
    const json& endpoint = root.at("endpoint");
    check_keys(endpoint,
               {"base_url", "model_explore", "model_refine",
                "temperature_explore", "temperature_refine", "timeout_seconds",
                "max_retries", "api_key"},
               "endpoint.");
    read_field(endpoint, "base_url", config.endpoint.base_url);
    read_field(endpoint, "model_explore", config.endpoint.model_explore);
    read_field(endpoint, "model_refine", config.endpoint.model_refine);
    read_field(endpoint, "temperature_explore",
               config.endpoint.temperature_explore);
    read_field(endpoint, "temperature_refine",
               config.endpoint.temperature_refine);
    read_field(endpoint, "timeout_seconds", config.endpoint.timeout_seconds);
    read_field(endpoint, "max_retries", config.endpoint.max_retries);
    read_field(endpoint, "api_key", config.endpoint.api_key);
  }

  if (root.contains("bench")) {
    const json& bench = root.at("bench");
    check_keys(bench, {"seeds", "table_cache_dir", "ablation"}, "bench.");
    read_field(bench, "seeds", config.bench_seeds);
    read_field(bench, "table_cache_dir", config.table_cache_dir);
    read_field(bench, "ablation", config.bench_ablation);
  }

  if (root.contains("output")) {
    const json& output = root.at("output");
    check_keys(output, {"log", "best"}, "output.");
    read_field(output, "log", config.log_path);
    read_field(output, "best", config.best_path);
  }

  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

}  // namespace phasenas::cli
