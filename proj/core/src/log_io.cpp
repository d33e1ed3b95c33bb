#include "phasenas/log_io.hpp"

#include <stdexcept>

#include <json.hpp>

#include "phasenas/dsl.hpp"

namespace phasenas {

namespace {

using nlohmann::json;

json score_config_to_json(const ScoreConfig& cfg) {
  return json{{"gamma_mix", cfg.gamma_mix}, {"epsilon", cfg.epsilon},
              {"repeats", cfg.repeats},     {"batch_size", cfg.batch_size},
              {"resolution", cfg.resolution}, {"seed", cfg.seed}};
}

json record_to_json(const IterationRecord& record) {
  json j;
  j["type"] = "iteration";
  j["iteration"] = record.iteration;
  j["phase"] = to_string(record.phase);
  j["generator"] = record.generator;
  j["candidate"] = record.candidate;
  j["valid"] = record.valid;
  j["admitted"] = record.admitted;
  j["mu"] = record.mu ? json(*record.mu) : json(nullptr);
  j["sigma"] = record.sigma ? json(*record.sigma) : json(nullptr);
  j["rejection"] = record.rejection;
  j["pool_best"] = record.pool_best;
  j["pool_worst"] = record.pool_worst;
  j["pool_size"] = record.pool_size;
  return j;
}

IterationRecord record_from_json(const json& j) {
  IterationRecord record;
  record.iteration = j.at("iteration").get<int>();
  const auto phase = phase_from_string(j.at("phase").get<std::string>());
  if (!phase) throw std::runtime_error("unknown phase tag in log record");
  record.phase = *phase;
  record.generator = j.at("generator").get<std::string>();
  record.candidate = j.at("candidate").get<std::string>();
  record.valid = j.at("valid").get<bool>();
  record.admitted = j.at("admitted").get<bool>();
  if (!j.at("mu").is_null()) record.mu = j.at("mu").get<double>();
  if (!j.at("sigma").is_null()) record.sigma = j.at("sigma").get<double>();
  record.rejection = j.at("rejection").get<std::string>();
  record.pool_best = j.at("pool_best").get<double>();
  record.pool_worst = j.at("pool_worst").get<double>();
  record.pool_size = j.at("pool_size").get<int>();
  return record;
}

json summary_to_json(const SearchSummary& summary, ArchMode mode) {
  json j;
  j["type"] = "summary";
  j["mode"] = to_string(mode);
  j["best"] = serialize_compact(summary.best);
  j["mu"] = summary.best_mu;
  j["params"] = summary.best_profile.params;
  j["flops"] = summary.best_profile.flops;
  j["depth"] = summary.best_profile.depth;
  j["resolution"] = summary.best_profile.resolution;
  j["iterations"] = summary.iterations;
  j["transition_iteration"] = summary.transition_iteration
                                  ? json(*summary.transition_iteration)
                                  : json(nullptr);
  return j;
}

SearchSummary summary_from_json(const json& j) {
  SearchSummary summary;
  const auto mode = arch_mode_from_string(j.at("mode").get<std::string>());
  if (!mode) throw std::runtime_error("unknown mode in log summary");
  summary.best = parse_architecture(j.at("best").get<std::string>(), *mode);
  summary.best_mu = j.at("mu").get<double>();
  summary.best_profile.params = j.at("params").get<std::int64_t>();
  summary.best_profile.flops = j.at("flops").get<std::int64_t>();
  summary.best_profile.depth = j.at("depth").get<int>();
  summary.best_profile.resolution = j.at("resolution").get<int>();
  summary.iterations = j.at("iterations").get<int>();
  if (!j.at("transition_iteration").is_null()) {
    summary.transition_iteration = j.at("transition_iteration").get<int>();
  }
  return summary;
}

}  // namespace

std::string record_to_json_line(const IterationRecord& record) {
  return record_to_json(record).dump();
}

std::string summary_to_json_line(const SearchSummary& summary, ArchMode mode) {
  return summary_to_json(summary, mode).dump();
}

std::string score_report_to_json_line(const ScoreReport& report) {
  json j;
  j["type"] = "score";
  j["mu"] = report.mean;
  j["sigma"] = report.stddev;
  j["per_repeat"] = report.per_repeat;
  j["config"] = score_config_to_json(report.config);
  return j.dump();
}

ParsedLog parse_search_log(const std::string& text) {
  ParsedLog log;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& err) {
      throw std::runtime_error(std::string("malformed log line: ") + err.what());
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "iteration") {
      log.records.push_back(record_from_json(j));
    } else if (type == "summary") {
      log.summary = summary_from_json(j);
    } else {
      throw std::runtime_error("unknown log record type: " + type);
    }
  }
  return log;
}

ParsedLog read_search_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read log: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_search_log(text);
}

SearchLogWriter::SearchLogWriter(const std::string& path)
    : out_(path, std::ios::binary | std::ios::app) {
  if (!out_) throw std::runtime_error("cannot open log for writing: " + path);
}

void SearchLogWriter::write(const IterationRecord& record) {
  out_ << record_to_json_line(record) << '\n';
  out_.flush();
}

void SearchLogWriter::write_summary(const SearchSummary& summary,
                                    ArchMode mode) {
  out_ << summary_to_json_line(summary, mode) << '\n';
  out_.flush();
}

}  // namespace phasenas
