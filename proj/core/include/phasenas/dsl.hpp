#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "phasenas/arch.hpp"
#include "phasenas/resource.hpp"

namespace phasenas {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& message);

  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& message() const { return message_; }

 private:
  int line_;
  int column_;
  std::string message_;
};

// Parses DSL text into a structurally populated (not yet validated)
// ArchitectureSpec. Statements are block calls `Name(i,i,i,i)` with an
// optional `@P<k>` tap suffix, separated by newlines or semicolons; `#`
// starts a comment running to end of line. Throws ParseError with line and
// column on anything outside the grammar.
ArchitectureSpec parse_architecture(std::string_view text, ArchMode mode);

// Canonical form: one block per line, no spaces inside parentheses, LF line
// endings. parse(serialize(a)) == a for every generator-produced spec.
// Throws std::invalid_argument on an empty block list.
std::string serialize(const ArchitectureSpec& arch);

// Single-line variant with ';' separators; used as the canonical pool /
// oracle key and inside line-delimited logs.
std::string serialize_compact(const ArchitectureSpec& arch);

// Structural validation: channel chain, per-kind parameter rules, mode
// admissibility, head/tap layout, and the depth bound from `limits`.
// Resource budgets (params/FLOPs) are checked separately via
// resource::check. Returns diagnostics; an empty list means valid.
std::vector<ValidationError> validate(const ArchitectureSpec& arch,
                                      const ConstraintSet& limits);

// True when `line` is a lone block call in the grammar; used by generator
// output extraction to find fence-less DSL lines.
bool looks_like_block_line(std::string_view line);

}  // namespace phasenas
