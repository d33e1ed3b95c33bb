#include "phasenas/dsl.hpp"

#include <cctype>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace phasenas {

namespace {

struct Scanner {
  std::string_view text;
  std::size_t pos = 0;
  int line = 1;
  int column = 1;

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }

  char advance() {
    const char c = text[pos++];
    if (c == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
    return c;
  }

  // Spaces, tabs and carriage returns; newlines are statement separators.
  void skip_inline_space() {
    while (!done() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) {
      advance();
    }
  }

  void skip_comment() {
    while (!done() && peek() != '\n') advance();
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(line, column, message);
  }
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

int parse_int(Scanner& s) {
  s.skip_inline_space();
  if (s.done()) s.fail("expected integer, found end of input");
  bool negative = false;
  if (s.peek() == '-') {
    negative = true;
    s.advance();
  }
  if (s.done() || !is_digit(s.peek())) s.fail("expected integer");
  long long value = 0;
  while (!s.done() && is_digit(s.peek())) {
    value = value * 10 + (s.advance() - '0');
    if (value > std::numeric_limits<int>::max()) s.fail("integer out of range");
  }
  return negative ? -static_cast<int>(value) : static_cast<int>(value);
}

// One block call: Name(i,i,i,i) with an optional @P<k> tap suffix. The
// scanner is positioned at an identifier start.
BlockSpec parse_statement(Scanner& s) {
  const int stmt_line = s.line;
  const int stmt_column = s.column;

  std::string name;
  while (!s.done() && is_ident_char(s.peek())) name.push_back(s.advance());

  const std::optional<BlockKind> kind = block_kind_from_name(name);
  if (!kind) {
    throw ParseError(stmt_line, stmt_column, "unknown block name '" + name + "'");
  }
  const BlockSignature& sig = catalog_signature(*kind);

  s.skip_inline_space();
  if (s.done() || s.peek() != '(') s.fail("expected '(' after block name");
  s.advance();

  std::vector<int> args;
  s.skip_inline_space();
  if (!s.done() && s.peek() == ')') {
    s.advance();
  } else {
    while (true) {
      args.push_back(parse_int(s));
      s.skip_inline_space();
      if (s.done()) s.fail("unterminated parameter list");
      const char c = s.advance();
      if (c == ')') break;
      if (c != ',') {
        throw ParseError(s.line, s.column - 1, "expected ',' or ')' in parameter list");
      }
    }
  }

  if (static_cast<int>(args.size()) != sig.arity) {
    std::ostringstream msg;
    msg << name << " takes " << sig.arity << " parameters, got " << args.size();
    throw ParseError(stmt_line, stmt_column, msg.str());
  }

  BlockSpec block;
  block.kind = *kind;
  block.in_channels = args[0];
  block.out_channels = args[1];
  block.stride = args[2];
  block.repeats = args[3];

  s.skip_inline_space();
  if (!s.done() && s.peek() == '@') {
    s.advance();
    if (s.done() || s.peek() != 'P') s.fail("expected tap label of the form P<k>");
    std::string label(1, s.advance());
    if (s.done() || !is_digit(s.peek())) s.fail("expected digits after 'P' in tap label");
    while (!s.done() && is_digit(s.peek())) label.push_back(s.advance());
    block.tap = label;
  }
  return block;
}

}  // namespace

ParseError::ParseError(int line, int column, const std::string& message)
    : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                         std::to_string(column) + ": " + message),
      line_(line),
      column_(column),
      message_(message) {}

ArchitectureSpec parse_architecture(std::string_view text, ArchMode mode) {
  ArchitectureSpec arch;
  arch.mode = mode;
  arch.input_resolution = mode == ArchMode::Classification
                              ? kDefaultClassificationResolution
                              : kDefaultDetectionResolution;

  Scanner s{text};
  bool expect_separator = false;
  while (!s.done()) {
    s.skip_inline_space();
    if (s.done()) break;
    const char c = s.peek();
    if (c == '#') {
      s.skip_comment();
      continue;
    }
    if (c == '\n' || c == ';') {
      s.advance();
      expect_separator = false;
      continue;
    }
    if (expect_separator) s.fail("expected newline or ';' between blocks");
    if (!is_ident_start(c)) s.fail("expected block name");
    arch.blocks.push_back(parse_statement(s));
    expect_separator = true;
  }

  if (!arch.blocks.empty()) {
    arch.input_channels = arch.blocks.front().in_channels;
    if (mode == ArchMode::Classification &&
        arch.blocks.back().kind == BlockKind::FC) {
      arch.num_classes = arch.blocks.back().out_channels;
    }
  }
  return arch;
}

namespace {

void append_block(std::string& out, const BlockSpec& block) {
  out += block_name(block.kind);
  out += '(';
  out += std::to_string(block.in_channels);
  out += ',';
  out += std::to_string(block.out_channels);
  out += ',';
  out += std::to_string(block.stride);
  out += ',';
  out += std::to_string(block.repeats);
  out += ')';
  if (block.tap) {
    out += '@';
    out += *block.tap;
  }
}

}  // namespace

std::string serialize(const ArchitectureSpec& arch) {
  if (arch.blocks.empty()) {
    throw std::invalid_argument("cannot serialize an architecture with no blocks");
  }
  std::string out;
  for (const BlockSpec& block : arch.blocks) {
    append_block(out, block);
    out += '\n';
  }
  return out;
}

std::string serialize_compact(const ArchitectureSpec& arch) {
  if (arch.blocks.empty()) {
    throw std::invalid_argument("cannot serialize an architecture with no blocks");
  }
  std::string out;
  for (std::size_t i = 0; i < arch.blocks.size(); ++i) {
    if (i > 0) out += ';';
    append_block(out, arch.blocks[i]);
  }
  return out;
}

std::vector<ValidationError> validate(const ArchitectureSpec& arch,
                                      const ConstraintSet& limits) {
  std::vector<ValidationError> errors;
  const bool classification = arch.mode == ArchMode::Classification;

  if (arch.blocks.empty()) {
    errors.push_back({ValidationCode::IllegalParameter, kWholeArchitecture,
                      "architecture has no blocks"});
    return errors;
  }

  const int count = static_cast<int>(arch.blocks.size());
  for (int i = 0; i < count; ++i) {
    const BlockSpec& block = arch.blocks[i];
    const BlockSignature& sig = catalog_signature(block.kind);
    const std::string name(sig.name);

    if (classification ? !sig.classification : !sig.detection) {
      errors.push_back({ValidationCode::ModeViolation, i,
                        name + " is not admissible in " +
                            std::string(to_string(arch.mode)) + " mode"});
    }
    if (block.in_channels <= 0) {
      errors.push_back({ValidationCode::IllegalParameter, i,
                        "in_channels must be positive"});
    }
    if (block.out_channels <= 0) {
      errors.push_back({ValidationCode::IllegalParameter, i,
                        "out_channels must be positive"});
    }
    if (block.repeats < 1) {
      errors.push_back({ValidationCode::IllegalParameter, i,
                        "repeats must be at least 1"});
    } else if (sig.fixed_head && block.repeats != 1) {
      errors.push_back({ValidationCode::IllegalParameter, i,
                        name + " requires repeats = 1"});
    }
    const bool stride_ok = (block.stride == 1 && sig.stride1) ||
                           (block.stride == 2 && sig.stride2);
    if (!stride_ok) {
      errors.push_back({ValidationCode::IllegalParameter, i,
                        name + " does not admit stride " +
                            std::to_string(block.stride)});
    }
    if (sig.equal_channels && block.in_channels != block.out_channels) {
      errors.push_back({ValidationCode::IllegalParameter, i,
                        name + " requires in_channels == out_channels"});
    }
    if (block.tap && classification) {
      errors.push_back({ValidationCode::ModeViolation, i,
                        "tap labels are detection-only"});
    }

    const int expected_in =
        i == 0 ? arch.input_channels : arch.blocks[i - 1].out_channels;
    if (block.in_channels != expected_in) {
      errors.push_back({ValidationCode::ChannelMismatch, i,
                        "expected in=" + std::to_string(expected_in) +
                            ", got " + std::to_string(block.in_channels)});
    }
  }

  if (count > limits.max_depth) {
    errors.push_back({ValidationCode::DepthExceeded, kWholeArchitecture,
                      "block count " + std::to_string(count) +
                          " exceeds max depth " +
                          std::to_string(limits.max_depth)});
  }

  if (classification) {
    const bool head_ok = count >= 2 &&
                         arch.blocks[count - 2].kind == BlockKind::GAP &&
                         arch.blocks[count - 1].kind == BlockKind::FC;
    if (!head_ok) {
      errors.push_back({ValidationCode::HeadMissing, kWholeArchitecture,
                        "classification head must be GAP followed by FC"});
    }
    for (int i = 0; i < count - 2; ++i) {
      const BlockKind kind = arch.blocks[i].kind;
      if (kind == BlockKind::GAP || kind == BlockKind::FC) {
        errors.push_back({ValidationCode::ModeViolation, i,
                          "GAP/FC are only admissible as the final head"});
      }
    }
    if (head_ok && arch.num_classes != arch.blocks[count - 1].out_channels) {
      errors.push_back({ValidationCode::IllegalParameter, count - 1,
                        "num_classes does not match the FC block width"});
    }
  } else {
    std::unordered_set<std::string> labels;
    bool any_tap = false;
    for (int i = 0; i < count; ++i) {
      if (!arch.blocks[i].tap) continue;
      any_tap = true;
      if (!labels.insert(*arch.blocks[i].tap).second) {
        errors.push_back({ValidationCode::IllegalParameter, i,
                          "duplicate tap label '" + *arch.blocks[i].tap + "'"});
      }
    }
    if (!any_tap) {
      errors.push_back({ValidationCode::NoTaps, kWholeArchitecture,
                        "detection architectures need at least one tap"});
    }
  }

  return errors;
}

bool looks_like_block_line(std::string_view line) {
  Scanner s{line};
  s.skip_inline_space();
  if (s.done() || !is_ident_start(s.peek())) return false;
  try {
    (void)parse_statement(s);
  } catch (const ParseError&) {
    return false;
  }
  s.skip_inline_space();
  if (!s.done() && s.peek() == '#') return true;
  return s.done();
}

}  // namespace phasenas
