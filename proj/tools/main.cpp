#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "phasenas/dsl.hpp"
#include "phasenas/log_io.hpp"
#include "phasenas/micro_bench.hpp"
#include "phasenas/network.hpp"
#include "phasenas/score.hpp"
#include "phasenas/search.hpp"
#include "run_config.hpp"

namespace {

using namespace phasenas;
using phasenas::cli::ConfigError;
using phasenas::cli::RunConfig;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;    // parse/validation failures, non-finite scores
constexpr int kExitConfig = 2;     // config or I/O errors
constexpr int kExitTransport = 3;  // generator transport exhausted

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out << content;
  return bool(out);
}

int report_validation(const std::vector<ValidationError>& errors) {
  for (const ValidationError& err : errors) {
    std::cerr << format_error(err) << "\n";
  }
  return errors.empty() ? kExitOk : kExitInvalid;
}

int cmd_validate(const std::string& path, ArchMode mode) {
  const auto text = read_file(path);
  if (!text) {
    std::cerr << "cannot read " << path << "\n";
    return kExitConfig;
  }
  try {
    const ArchitectureSpec arch = parse_architecture(*text, mode);
    const int status = report_validation(validate(arch, ConstraintSet{}));
    if (status == kExitOk) {
      std::cout << "OK: " << arch.blocks.size() << " blocks, "
                << to_string(mode) << " mode\n";
    }
    return status;
  } catch (const ParseError& err) {
    std::cerr << err.what() << "\n";
    return kExitInvalid;
  }
}

int cmd_score(const std::string& path, const std::string& config_path,
              std::optional<std::uint64_t> seed_override,
              std::optional<std::string> out_path) {
  RunConfig config;
  try {
    config = cli::load_run_config(config_path);
  } catch (const ConfigError& err) {
    std::cerr << err.what() << "\n";
    return kExitConfig;
  }
  if (seed_override) config.search.score.seed = *seed_override;

  const auto text = read_file(path);
  if (!text) {
    std::cerr << "cannot read " << path << "\n";
    return kExitConfig;
  }

  try {
    const ArchitectureSpec arch = parse_architecture(*text, config.mode);
    const auto errors = validate(arch, config.search.constraints);
    if (!errors.empty()) return report_validation(errors);

    const auto problems = validate_config(config.search.score);
    if (!problems.empty()) {
      std::cerr << problems.front() << "\n";
      return kExitConfig;
    }

    const NetworkInstance net = build_network(arch, config.search.score.seed);
    const ScoreReport report = config.mode == ArchMode::Classification
                                   ? classification_score(net, config.search.score)
                                   : detection_score(net, config.search.score);

    std::cout.precision(10);
    std::cout << "mu=" << report.mean << " sigma=" << report.stddev
              << " repeats=" << report.per_repeat.size() << "\n";

    const std::string record_path = out_path ? *out_path : path + ".score.jsonl";
    std::ofstream out(record_path, std::ios::binary | std::ios::app);
    if (!out) {
      std::cerr << "cannot write " << record_path << "\n";
      return kExitConfig;
    }
    out << score_report_to_json_line(report) << "\n";
    return kExitOk;
  } catch (const ParseError& err) {
    std::cerr << err.what() << "\n";
    return kExitInvalid;
  } catch (const NonFiniteScoreError& err) {
    std::cerr << "non-finite score: " << err.what() << "\n";
    return kExitInvalid;
  }
}

int cmd_estimate(const std::string& path, ArchMode mode,
                 std::optional<int> resolution) {
  const auto text = read_file(path);
  if (!text) {
    std::cerr << "cannot read " << path << "\n";
    return kExitConfig;
  }
  try {
    ArchitectureSpec arch = parse_architecture(*text, mode);
    if (resolution) arch.input_resolution = *resolution;
    const auto errors = validate(arch, ConstraintSet{});
    if (!errors.empty()) return report_validation(errors);
    const ResourceProfile profile = estimate(arch);
    std::cout << "# params: conv k*k*cin*cout, depthwise k*k*c, BN 2c, "
                 "FC cin*classes+classes\n"
              << "# flops: 2*MACs for conv/FC; BN 2 per element; ReLU 1 per "
                 "element; residual add 1 per element;\n"
              << "#        pooling 1 per element + 1 per channel; softmax 3 "
                 "per channel\n";
    std::cout << "params=" << profile.params << " flops=" << profile.flops
              << " depth=" << profile.depth
              << " resolution=" << profile.resolution << "\n";
    return kExitOk;
  } catch (const ParseError& err) {
    std::cerr << err.what() << "\n";
    return kExitInvalid;
  }
}

struct GeneratorPair {
  std::unique_ptr<ArchitectureGenerator> explorer;
  std::unique_ptr<ArchitectureGenerator> refiner;
  ArchitectureGenerator* explore_ptr = nullptr;
  ArchitectureGenerator* refine_ptr = nullptr;
};

// The llm generator serves both phases (it switches model by phase); mocks
// come as a pair.
std::optional<GeneratorPair> make_generators(const RunConfig& config,
                                             std::string* error) {
  GeneratorPair pair;
  if (config.generator == "mock") {
    pair.explorer = std::make_unique<MockExploreGenerator>();
    pair.refiner = std::make_unique<MockRefineGenerator>();
    pair.explore_ptr = pair.explorer.get();
    pair.refine_ptr = pair.refiner.get();
    return pair;
  }
  if (config.generator == "micro") {
    pair.explorer = std::make_unique<MicroExploreGenerator>();
    pair.refiner = std::make_unique<MicroRefineGenerator>();
    pair.explore_ptr = pair.explorer.get();
    pair.refine_ptr = pair.refiner.get();
    return pair;
  }
  const EndpointConfig endpoint = endpoint_from_env(config.endpoint);
  if (endpoint.api_key.empty()) {
    *error = "llm generator needs an api key (config endpoint.api_key or " +
             std::string(kApiKeyEnvVar) + ")";
    return std::nullopt;
  }
  if (endpoint.base_url.empty() || endpoint.model_explore.empty() ||
      endpoint.model_refine.empty()) {
    *error = "llm generator needs endpoint.base_url, model_explore and "
             "model_refine";
    return std::nullopt;
  }
  pair.explorer = std::make_unique<LlmGenerator>(endpoint);
  pair.explore_ptr = pair.explorer.get();
  pair.refine_ptr = pair.explorer.get();
  return pair;
}

std::optional<ArchitectureSpec> load_init_arch(const RunConfig& config,
                                               std::string* error) {
  if (!config.init_arch_text.empty()) {
    return parse_architecture(config.init_arch_text, config.mode);
  }
  if (!config.init_arch_path.empty()) {
    const auto text = read_file(config.init_arch_path);
    if (!text) {
      *error = "cannot read init_arch file: " + config.init_arch_path;
      return std::nullopt;
    }
    return parse_architecture(*text, config.mode);
  }
  if (config.generator == "micro") {
    return MicroSpace::from_choices(MicroSpace::choices_at(0));
  }
  *error = "config needs init_arch or init_arch_text";
  return std::nullopt;
}

int cmd_search(const std::string& config_path,
               std::optional<std::uint64_t> seed_override,
               std::optional<std::string> log_override,
               std::optional<std::string> best_override) {
  RunConfig config;
  try {
    config = cli::load_run_config(config_path);
  } catch (const ConfigError& err) {
    std::cerr << err.what() << "\n";
    return kExitConfig;
  }
  if (seed_override) config.search.seed = *seed_override;
  if (log_override) config.log_path = *log_override;
  if (best_override) config.best_path = *best_override;

  const auto problems = validate_search_config(config.search);
  if (!problems.empty()) {
    std::cerr << "invalid search config: " << problems.front() << "\n";
    return kExitConfig;
  }

  std::string error;
  auto generators = make_generators(config, &error);
  if (!generators) {
    std::cerr << error << "\n";
    return kExitConfig;
  }

  std::optional<ArchitectureSpec> init;
  try {
    init = load_init_arch(config, &error);
  } catch (const ParseError& err) {
    std::cerr << "init architecture: " << err.what() << "\n";
    return kExitConfig;
  }
  if (!init) {
    std::cerr << error << "\n";
    return kExitConfig;
  }

  std::error_code ec;
  std::filesystem::remove(config.log_path, ec);  // fresh run, fresh log
  try {
    SearchLogWriter writer(config.log_path);
    const RecordSink sink = [&writer](const IterationRecord& record) {
      writer.write(record);
    };
    const SearchResult result =
        run_search(*init, config.search, *generators->explore_ptr,
                   *generators->refine_ptr, sink);
    writer.write_summary(result.summary, config.mode);

    if (!write_file(config.best_path, serialize(result.summary.best))) {
      std::cerr << "cannot write " << config.best_path << "\n";
      return kExitConfig;
    }

    std::cout.precision(10);
    std::cout << "best architecture (mu=" << result.summary.best_mu << "):\n"
              << serialize(result.summary.best);
    std::cout << "params=" << result.summary.best_profile.params
              << " flops=" << result.summary.best_profile.flops
              << " depth=" << result.summary.best_profile.depth << "\n";
    std::cout << "iterations=" << result.summary.iterations
              << " phase_transition=";
    if (result.summary.transition_iteration) {
      std::cout << *result.summary.transition_iteration;
    } else {
      std::cout << "none";
    }
    std::cout << "\nlog=" << config.log_path << " best=" << config.best_path
              << "\n";
    return kExitOk;
  } catch (const SearchAborted& err) {
    std::cerr << "search aborted: " << err.what()
              << " (partial log: " << config.log_path << ")\n";
    return kExitTransport;
  } catch (const std::invalid_argument& err) {
    std::cerr << err.what() << "\n";
    return kExitConfig;
  }
}

struct BenchOutcome {
  int final_rank = 0;
  int iterations = 0;
  std::optional<int> transition;
  std::vector<std::pair<int, int>> trajectory;  // (iteration, rank)
};

BenchOutcome run_bench_search(const ArchitectureSpec& init,
                              SearchConfig search_cfg, std::uint64_t seed,
                              const OracleTable& table, bool ablation) {
  search_cfg.seed = seed;
  if (ablation) {
    // Exploration-only: the transition threshold collapses onto the stop
    // threshold, so refinement can never run.
    search_cfg.gamma_trans = search_cfg.gamma_stop;
  }
  MicroExploreGenerator explorer;
  MicroRefineGenerator refiner;
  const SearchResult result = run_search(init, search_cfg, explorer, refiner);

  // mu values come from the same deterministic scorer the table used, so a
  // bitwise mu -> rank map recovers the rank of the running best.
  std::unordered_map<std::uint64_t, int> rank_by_mu;
  for (const OracleEntry& entry : table.entries) {
    rank_by_mu.emplace(std::bit_cast<std::uint64_t>(entry.mu), entry.rank);
  }

  BenchOutcome outcome;
  outcome.iterations = result.summary.iterations;
  outcome.transition = result.summary.transition_iteration;
  int last_rank = -1;
  for (const IterationRecord& record : result.records) {
    const auto it = rank_by_mu.find(std::bit_cast<std::uint64_t>(record.pool_best));
    if (it == rank_by_mu.end()) continue;
    if (it->second != last_rank) {
      outcome.trajectory.emplace_back(record.iteration, it->second);
      last_rank = it->second;
    }
  }
  outcome.final_rank = table.rank_of(result.summary.best).value_or(-1);
  return outcome;
}

double median_of(std::vector<int> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? values[n / 2]
                    : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

int cmd_bench(const std::string& config_path, std::optional<int> seeds_override,
              std::optional<std::uint64_t> seed_override, bool ablation_flag) {
  RunConfig config;
  try {
    config = cli::load_run_config(config_path);
  } catch (const ConfigError& err) {
    std::cerr << err.what() << "\n";
    return kExitConfig;
  }
  if (seeds_override) config.bench_seeds = *seeds_override;
  if (seed_override) config.search.seed = *seed_override;
  if (ablation_flag) config.bench_ablation = true;
  if (config.mode != ArchMode::Classification) {
    std::cerr << "bench runs on the classification micro space\n";
    return kExitConfig;
  }

  const auto problems = validate_search_config(config.search);
  if (!problems.empty()) {
    std::cerr << "invalid search config: " << problems.front() << "\n";
    return kExitConfig;
  }

  const std::string hash = score_config_hash(config.search.score);
  const std::string cache_path =
      config.table_cache_dir + "/oracle_" + hash + ".tsv";

  OracleTable table;
  bool cached = false;
  if (std::filesystem::exists(cache_path)) {
    try {
      table = load_oracle_table(cache_path);
      cached = table.config == config.search.score;
    } catch (const std::runtime_error&) {
      cached = false;
    }
  }
  if (!cached) {
    table = tabulate_micro_space(config.search.score);
    std::error_code ec;
    std::filesystem::create_directories(config.table_cache_dir, ec);
    save_oracle_table(table, cache_path);
  }
  std::cout << "oracle table: " << table.entries.size() << " entries, hash "
            << hash << (cached ? " (cached)" : " (tabulated)") << "\n";

  std::string error;
  std::optional<ArchitectureSpec> init;
  try {
    init = load_init_arch(config, &error);
  } catch (const ParseError& err) {
    std::cerr << "init architecture: " << err.what() << "\n";
    return kExitConfig;
  }
  if (!init) {
    std::cerr << error << "\n";
    return kExitConfig;
  }
  {
    const MicroSpace space;
    if (!space.index_of(serialize_compact(*init))) {
      std::cerr << "init architecture is not a member of the micro space\n";
      return kExitConfig;
    }
  }

  try {
    std::vector<int> phased_ranks, ablation_ranks;
    for (int k = 0; k < config.bench_seeds; ++k) {
      const std::uint64_t seed = config.search.seed + static_cast<std::uint64_t>(k);
      const BenchOutcome outcome =
          run_bench_search(*init, config.search, seed, table, false);
      phased_ranks.push_back(outcome.final_rank);
      std::cout << "seed " << k << ": final_rank=" << outcome.final_rank
                << " iterations=" << outcome.iterations << " transition=";
      if (outcome.transition) std::cout << *outcome.transition;
      else std::cout << "none";
      std::cout << " trajectory:";
      for (const auto& [iter, rank] : outcome.trajectory) {
        std::cout << " " << rank << "@" << iter;
      }
      std::cout << "\n";
    }
    std::cout << "two-phase median final rank: " << median_of(phased_ranks)
              << "\n";

    if (config.bench_ablation) {
      for (int k = 0; k < config.bench_seeds; ++k) {
        const std::uint64_t seed =
            config.search.seed + static_cast<std::uint64_t>(k);
        const BenchOutcome outcome =
            run_bench_search(*init, config.search, seed, table, true);
        ablation_ranks.push_back(outcome.final_rank);
        std::cout << "ablation seed " << k
                  << ": final_rank=" << outcome.final_rank << "\n";
      }
      std::cout << "exploration-only median final rank: "
                << median_of(ablation_ranks) << "\n";
    }
    return kExitOk;
  } catch (const SearchAborted& err) {
    std::cerr << "search aborted: " << err.what() << "\n";
    return kExitTransport;
  } catch (const std::invalid_argument& err) {
    std::cerr << err.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PhaseNAS: template-language architecture search with "
               "training-free scoring"};
  app.require_subcommand(1);

  std::string arch_file, config_file, mode_name = "classification";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path, log_path, best_path;
  std::optional<int> resolution, bench_seeds;
  bool ablation = false;

  auto* validate_cmd = app.add_subcommand("validate", "Parse and validate an architecture file");
  validate_cmd->add_option("file", arch_file, "architecture file")->required();
  validate_cmd->add_option("--mode", mode_name, "classification|detection");

  auto* score_cmd = app.add_subcommand("score", "Score an architecture");
  score_cmd->add_option("file", arch_file, "architecture file")->required();
  score_cmd->add_option("--config", config_file, "run config (JSON)")->required();
  score_cmd->add_option("--seed", seed, "override the scoring seed");
  score_cmd->add_option("--out", out_path, "score record destination");

  auto* estimate_cmd = app.add_subcommand("estimate", "Analytic params/FLOPs/depth");
  estimate_cmd->add_option("file", arch_file, "architecture file")->required();
  estimate_cmd->add_option("--mode", mode_name, "classification|detection");
  estimate_cmd->add_option("--resolution", resolution, "input resolution");

  auto* search_cmd = app.add_subcommand("search", "Run the two-phase search");
  search_cmd->add_option("--config", config_file, "run config (JSON)")->required();
  search_cmd->add_option("--seed", seed, "override the search seed");
  search_cmd->add_option("--log", log_path, "log file override");
  search_cmd->add_option("--best", best_path, "best-architecture file override");

  auto* bench_cmd = app.add_subcommand("bench", "Micro-space oracle benchmark");
  bench_cmd->add_option("--config", config_file, "run config (JSON)")->required();
  bench_cmd->add_option("--seeds", bench_seeds, "number of seeded searches");
  bench_cmd->add_option("--seed", seed, "base search seed override");
  bench_cmd->add_flag("--ablation", ablation, "also run exploration-only searches");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
  }

  const auto mode = arch_mode_from_string(mode_name);
  if (!mode) {
    std::cerr << "unknown mode: " << mode_name << "\n";
    return kExitConfig;
  }

  if (validate_cmd->parsed()) return cmd_validate(arch_file, *mode);
  if (score_cmd->parsed()) return cmd_score(arch_file, config_file, seed, out_path);
  if (estimate_cmd->parsed()) return cmd_estimate(arch_file, *mode, resolution);
  if (search_cmd->parsed()) return cmd_search(config_file, seed, log_path, best_path);
  if (bench_cmd->parsed()) return cmd_bench(config_file, bench_seeds, seed, ablation);
  return kExitConfig;
}
