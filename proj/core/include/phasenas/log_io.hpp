#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "phasenas/score.hpp"
#include "phasenas/search.hpp"

namespace phasenas {

// Line-delimited JSON forms. Iteration lines omit the measured duration so
// equal-seed runs produce byte-identical logs; the summary line closes a run.
std::string record_to_json_line(const IterationRecord& record);
std::string summary_to_json_line(const SearchSummary& summary, ArchMode mode);
std::string score_report_to_json_line(const ScoreReport& report);

struct ParsedLog {
  std::vector<IterationRecord> records;
  std::optional<SearchSummary> summary;
};

// Throws std::runtime_error on unreadable files or lines that are not valid
// records.
ParsedLog read_search_log(const std::string& path);
ParsedLog parse_search_log(const std::string& text);

// Append-only writer; one line per record, flushed as written so an
// interrupted run leaves an analyzable prefix.
class SearchLogWriter {
 public:
  explicit SearchLogWriter(const std::string& path);

  void write(const IterationRecord& record);
  void write_summary(const SearchSummary& summary, ArchMode mode);

 private:
  std::ofstream out_;
};

}  // namespace phasenas
