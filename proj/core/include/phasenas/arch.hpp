#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phasenas {

enum class ArchMode { Classification, Detection };

std::string_view to_string(ArchMode mode);
std::optional<ArchMode> arch_mode_from_string(std::string_view name);

// Block kinds of the template language. The first ten form the classification
// catalog (GAP/FC are the fixed head); SCDown, PSA and Identity are admissible
// only in detection mode.
enum class BlockKind {
  ConvK1BNRELU,
  ConvK3BNRELU,
  ConvK5BNRELU,
  ConvK7BNRELU,
  ResK3K3,
  ResK5K5,
  ResK7K7,
  ResK1K3K1,
  GAP,
  FC,
  SCDown,
  PSA,
  Identity,
};

inline constexpr int kBlockKindCount = 13;

// Static description of one block kind; drives parser arity checks and the
// validator's per-kind rules.
struct BlockSignature {
  BlockKind kind;
  std::string_view name;       // DSL spelling
  int arity;                   // integer parameters in the template
  std::array<int, 3> kernels;  // kernel sizes, zero-padded
  int kernel_count;
  bool classification;
  bool detection;
  bool stride1;
  bool stride2;
  bool equal_channels;  // in_channels must equal out_channels
  bool fixed_head;      // GAP/FC: stride and repeats pinned to 1
};

std::span<const BlockSignature> block_catalog();
const BlockSignature& catalog_signature(BlockKind kind);
std::optional<BlockKind> block_kind_from_name(std::string_view name);
std::string_view block_name(BlockKind kind);

struct BlockSpec {
  BlockKind kind = BlockKind::ConvK3BNRELU;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  int repeats = 1;
  std::optional<std::string> tap;  // detection feature tap label, e.g. "P3"

  bool operator==(const BlockSpec&) const = default;
};

// Square input sides assumed when an architecture is parsed from bare DSL
// text (the text form carries only the block list).
inline constexpr int kDefaultClassificationResolution = 32;
inline constexpr int kDefaultDetectionResolution = 64;

struct ArchitectureSpec {
  ArchMode mode = ArchMode::Classification;
  std::vector<BlockSpec> blocks;
  int input_channels = 3;
  int input_resolution = kDefaultClassificationResolution;
  int num_classes = 0;  // classification only; mirrors the FC block width

  bool operator==(const ArchitectureSpec&) const = default;
};

enum class ValidationCode {
  ChannelMismatch,
  UnknownBlock,
  IllegalParameter,
  ModeViolation,
  DepthExceeded,
  HeadMissing,
  NoTaps,
};

std::string_view to_string(ValidationCode code);

// Position value for diagnostics that concern the whole architecture rather
// than a single block.
inline constexpr int kWholeArchitecture = -1;

struct ValidationError {
  ValidationCode code;
  int position = kWholeArchitecture;
  std::string detail;
};

std::string format_error(const ValidationError& err);

}  // namespace phasenas
