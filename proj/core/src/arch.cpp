#include "phasenas/arch.hpp"

#include <sstream>

namespace phasenas {

namespace {

// clang-format off
constexpr BlockSignature kCatalog[kBlockKindCount] = {
    //                         name            arity kernels    n  cls    det    s1     s2     eq_ch  head
    {BlockKind::ConvK1BNRELU, "ConvK1BNRELU",  4, {1, 0, 0}, 1, true,  true,  true,  true,  false, false},
    {BlockKind::ConvK3BNRELU, "ConvK3BNRELU",  4, {3, 0, 0}, 1, true,  true,  true,  true,  false, false},
    {BlockKind::ConvK5BNRELU, "ConvK5BNRELU",  4, {5, 0, 0}, 1, true,  true,  true,  true,  false, false},
    {BlockKind::ConvK7BNRELU, "ConvK7BNRELU",  4, {7, 0, 0}, 1, true,  true,  true,  true,  false, false},
    {BlockKind::ResK3K3,      "ResK3K3",       4, {3, 3, 0}, 2, true,  true,  true,  true,  false, false},
    {BlockKind::ResK5K5,      "ResK5K5",       4, {5, 5, 0}, 2, true,  true,  true,  true,  false, false},
    {BlockKind::ResK7K7,      "ResK7K7",       4, {7, 7, 0}, 2, true,  true,  true,  true,  false, false},
    {BlockKind::ResK1K3K1,    "ResK1K3K1",     4, {1, 3, 1}, 3, true,  true,  true,  true,  false, false},
    {BlockKind::GAP,          "GAP",           4, {0, 0, 0}, 0, true,  false, true,  false, true,  true},
    {BlockKind::FC,           "FC",            4, {0, 0, 0}, 0, true,  false, true,  false, false, true},
    {BlockKind::SCDown,       "SCDown",        4, {1, 3, 0}, 2, false, true,  false, true,  false, false},
    {BlockKind::PSA,          "PSA",           4, {1, 1, 0}, 2, false, true,  true,  false, true,  false},
    {BlockKind::Identity,     "Identity",      4, {0, 0, 0}, 0, false, true,  true,  false, true,  false},
};
// clang-format on

}  // namespace

std::string_view to_string(ArchMode mode) {
  return mode == ArchMode::Classification ? "classification" : "detection";
}

std::optional<ArchMode> arch_mode_from_string(std::string_view name) {
  if (name == "classification") return ArchMode::Classification;
  if (name == "detection") return ArchMode::Detection;
  return std::nullopt;
}

std::span<const BlockSignature> block_catalog() {
  return {kCatalog, kBlockKindCount};
}

const BlockSignature& catalog_signature(BlockKind kind) {
  return kCatalog[static_cast<int>(kind)];
}

std::optional<BlockKind> block_kind_from_name(std::string_view name) {
  for (const BlockSignature& sig : kCatalog) {
    if (sig.name == name) return sig.kind;
  }
  return std::nullopt;
}

std::string_view block_name(BlockKind kind) {
  return catalog_signature(kind).name;
}

std::string_view to_string(ValidationCode code) {
  switch (code) {
    case ValidationCode::ChannelMismatch: return "ChannelMismatch";
    case ValidationCode::UnknownBlock: return "UnknownBlock";
    case ValidationCode::IllegalParameter: return "IllegalParameter";
    case ValidationCode::ModeViolation: return "ModeViolation";
    case ValidationCode::DepthExceeded: return "DepthExceeded";
    case ValidationCode::HeadMissing: return "HeadMissing";
    case ValidationCode::NoTaps: return "NoTaps";
  }
  return "UnknownBlock";
}

std::string format_error(const ValidationError& err) {
  std::ostringstream out;
  out << to_string(err.code);
  if (err.position != kWholeArchitecture) {
    out << " at block " << err.position;
  }
  if (!err.detail.empty()) {
    out << ": " << err.detail;
  }
  return out.str();
}

}  // namespace phasenas
