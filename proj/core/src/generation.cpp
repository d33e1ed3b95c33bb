#include "phasenas/generation.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "phasenas/dsl.hpp"
#include "phasenas/rng.hpp"

namespace phasenas {

namespace {

constexpr std::uint64_t kExploreStream = 0x4D4F434B4558ull;
constexpr std::uint64_t kRefineStream = 0x4D4F434B5246ull;
constexpr std::uint64_t kSampleStream = 0x53414D504Cull;
constexpr std::uint64_t kMutateStream = 0x4D555441ull;

constexpr std::array<int, 6> kChannelPalette = {8, 16, 24, 32, 48, 64};

constexpr std::array<BlockKind, 8> kBodyKinds = {
    BlockKind::ConvK1BNRELU, BlockKind::ConvK3BNRELU, BlockKind::ConvK5BNRELU,
    BlockKind::ConvK7BNRELU, BlockKind::ResK3K3,      BlockKind::ResK5K5,
    BlockKind::ResK7K7,      BlockKind::ResK1K3K1,
};

int pick(Philox& rng, int n) {
  return static_cast<int>(rng.next_u32() % static_cast<std::uint32_t>(n));
}

std::uint64_t draw_seed(Philox& rng) {
  const std::uint64_t hi = rng.next_u32();
  return (hi << 32) | rng.next_u32();
}

int palette_index(int value) {
  int best = 0;
  for (std::size_t i = 0; i < kChannelPalette.size(); ++i) {
    if (kChannelPalette[i] <= value) best = static_cast<int>(i);
  }
  return best;
}

int choose_channels(Philox& rng, int current, int cap) {
  const int cap_idx = palette_index(cap);
  if (current < kChannelPalette.front()) {
    return kChannelPalette[pick(rng, std::min(cap_idx + 1, 3))];
  }
  const int cur_idx = palette_index(current);
  const int roll = pick(rng, 4);
  int idx = cur_idx;
  if (roll <= 1) idx = std::min(cur_idx + 1, cap_idx);       // widen
  else if (roll == 3) idx = std::max(cur_idx - 1, 0);        // narrow
  return kChannelPalette[std::min(idx, cap_idx)];
}

// Re-establishes the channel chain after a structural edit: every block's
// in_channels follows its predecessor, and kinds that require equal channels
// have their out_channels forced to match.
void repair_channels(ArchitectureSpec& arch) {
  int prev = arch.input_channels;
  for (BlockSpec& block : arch.blocks) {
    block.in_channels = prev;
    if (catalog_signature(block.kind).equal_channels) {
      block.out_channels = block.in_channels;
    }
    prev = block.out_channels;
  }
  if (arch.mode == ArchMode::Classification && !arch.blocks.empty() &&
      arch.blocks.back().kind == BlockKind::FC) {
    arch.num_classes = arch.blocks.back().out_channels;
  }
}

void ensure_tap(ArchitectureSpec& arch) {
  if (arch.mode != ArchMode::Detection) return;
  for (const BlockSpec& block : arch.blocks) {
    if (block.tap) return;
  }
  if (!arch.blocks.empty()) arch.blocks.back().tap = "P3";
}

// Body positions are the mutable region: everything except the fixed GAP/FC
// head in classification mode.
int body_size(const ArchitectureSpec& arch) {
  const int n = static_cast<int>(arch.blocks.size());
  return arch.mode == ArchMode::Classification ? std::max(0, n - 2) : n;
}

ArchitectureSpec sample_once(Philox& rng, ArchMode mode, int channel_cap,
                             int max_body) {
  ArchitectureSpec arch;
  arch.mode = mode;
  arch.input_channels = 3;
  arch.input_resolution = mode == ArchMode::Classification
                              ? kDefaultClassificationResolution
                              : kDefaultDetectionResolution;
  int current = 3;
  int stride2_left = 3;

  if (mode == ArchMode::Classification) {
    const int body = 1 + pick(rng, std::max(1, max_body));
    for (int j = 0; j < body; ++j) {
      BlockSpec block;
      block.kind = kBodyKinds[pick(rng, static_cast<int>(kBodyKinds.size()))];
      block.in_channels = current;
      block.out_channels = choose_channels(rng, current, channel_cap);
      block.stride = (stride2_left > 0 && pick(rng, 100) < 35) ? 2 : 1;
      if (block.stride == 2) --stride2_left;
      block.repeats = pick(rng, 3) == 0 ? 2 : 1;
      arch.blocks.push_back(block);
      current = block.out_channels;
    }
    arch.blocks.push_back({BlockKind::GAP, current, current, 1, 1, std::nullopt});
    arch.blocks.push_back({BlockKind::FC, current, 10, 1, 1, std::nullopt});
    arch.num_classes = 10;
    return arch;
  }

  const int body = 2 + pick(rng, std::max(1, max_body - 1));
  for (int j = 0; j < body; ++j) {
    BlockSpec block;
    block.in_channels = current;
    const int roll = pick(rng, 12);
    if (roll < 4) {
      block.kind = kBodyKinds[roll];
    } else if (roll < 8) {
      block.kind = kBodyKinds[roll];
    } else if (roll < 10 && stride2_left > 0) {
      block.kind = BlockKind::SCDown;
    } else if (roll == 10 && current >= kChannelPalette.front()) {
      block.kind = BlockKind::PSA;
    } else if (roll == 11 && current >= kChannelPalette.front()) {
      block.kind = BlockKind::Identity;
    } else {
      block.kind = kBodyKinds[pick(rng, 8)];
    }
    const auto& sig = catalog_signature(block.kind);
    if (sig.equal_channels) {
      block.out_channels = current;
      block.stride = 1;
    } else {
      block.out_channels = choose_channels(rng, current, channel_cap);
      if (block.kind == BlockKind::SCDown) {
        block.stride = 2;
        --stride2_left;
      } else {
        block.stride = (stride2_left > 0 && pick(rng, 100) < 35) ? 2 : 1;
        if (block.stride == 2) --stride2_left;
      }
    }
    block.repeats = pick(rng, 4) == 0 ? 2 : 1;
    arch.blocks.push_back(block);
    current = block.out_channels;
  }

  // Tap the final block plus up to two distinct earlier positions; labels
  // follow block order so they stay unique.
  std::vector<int> tap_positions{body - 1};
  const int extra = pick(rng, 3);
  for (int t = 0; t < extra; ++t) {
    const int pos = pick(rng, body);
    if (std::find(tap_positions.begin(), tap_positions.end(), pos) ==
        tap_positions.end()) {
      tap_positions.push_back(pos);
    }
  }
  std::sort(tap_positions.begin(), tap_positions.end());
  int label = 3;
  for (const int pos : tap_positions) {
    arch.blocks[pos].tap = "P" + std::to_string(label++);
  }
  return arch;
}

bool swap_kind(ArchitectureSpec& arch, Philox& rng) {
  const int body = body_size(arch);
  if (body == 0) return false;
  const int pos = pick(rng, body);
  BlockSpec& block = arch.blocks[pos];
  std::vector<BlockKind> candidates;
  for (const BlockSignature& sig : block_catalog()) {
    if (sig.kind == block.kind || sig.fixed_head) continue;
    const bool admissible = arch.mode == ArchMode::Classification
                                ? sig.classification
                                : sig.detection;
    if (!admissible) continue;
    if (block.stride == 2 && !sig.stride2) continue;
    if (block.stride == 1 && !sig.stride1) continue;
    candidates.push_back(sig.kind);
  }
  if (candidates.empty()) return false;
  block.kind = candidates[pick(rng, static_cast<int>(candidates.size()))];
  return true;
}

bool scale_channels(ArchitectureSpec& arch, Philox& rng) {
  const int body = body_size(arch);
  std::vector<int> positions;
  for (int i = 0; i < body; ++i) {
    if (!catalog_signature(arch.blocks[i].kind).equal_channels) {
      positions.push_back(i);
    }
  }
  if (positions.empty()) return false;
  BlockSpec& block = arch.blocks[positions[pick(
      rng, static_cast<int>(positions.size()))]];
  const bool widen = pick(rng, 2) == 0;
  const int scaled = widen ? std::min(block.out_channels * 2, 256)
                           : std::max(block.out_channels / 2, 8);
  if (scaled == block.out_channels) return false;
  block.out_channels = scaled;
  return true;
}

bool flip_stride(ArchitectureSpec& arch, Philox& rng) {
  const int body = body_size(arch);
  std::vector<int> positions;
  for (int i = 0; i < body; ++i) {
    const auto& sig = catalog_signature(arch.blocks[i].kind);
    if (sig.stride1 && sig.stride2) positions.push_back(i);
  }
  if (positions.empty()) return false;
  BlockSpec& block = arch.blocks[positions[pick(
      rng, static_cast<int>(positions.size()))]];
  block.stride = block.stride == 1 ? 2 : 1;
  return true;
}

bool change_repeats(ArchitectureSpec& arch, Philox& rng) {
  const int body = body_size(arch);
  if (body == 0) return false;
  const int pos = pick(rng, body);
  BlockSpec& block = arch.blocks[pos];
  const int delta = pick(rng, 2) == 0 ? 1 : -1;
  const int updated = std::clamp(block.repeats + delta, 1, 3);
  if (updated == block.repeats) return false;
  block.repeats = updated;
  return true;
}

bool insert_block(ArchitectureSpec& arch, Philox& rng) {
  const int body = body_size(arch);
  const int slot = pick(rng, body + 1);
  const int channels =
      slot == 0 ? arch.input_channels : arch.blocks[slot - 1].out_channels;
  std::vector<BlockKind> candidates(kBodyKinds.begin(), kBodyKinds.end());
  if (arch.mode == ArchMode::Detection && channels >= kChannelPalette.front()) {
    candidates.push_back(BlockKind::PSA);
    candidates.push_back(BlockKind::Identity);
  }
  BlockSpec block;
  block.kind = candidates[pick(rng, static_cast<int>(candidates.size()))];
  block.in_channels = channels;
  block.out_channels = channels;
  block.stride = 1;
  block.repeats = 1;
  arch.blocks.insert(arch.blocks.begin() + slot, block);
  return true;
}

bool remove_block(ArchitectureSpec& arch, Philox& rng) {
  const int body = body_size(arch);
  if (body < 2) return false;
  const int pos = pick(rng, body);
  arch.blocks.erase(arch.blocks.begin() + pos);
  return true;
}

void apply_one_mutation(ArchitectureSpec& arch, Philox& rng) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    bool applied = false;
    switch (pick(rng, 6)) {
      case 0: applied = swap_kind(arch, rng); break;
      case 1: applied = scale_channels(arch, rng); break;
      case 2: applied = flip_stride(arch, rng); break;
      case 3: applied = change_repeats(arch, rng); break;
      case 4: applied = insert_block(arch, rng); break;
      case 5: applied = remove_block(arch, rng); break;
    }
    if (applied) break;
  }
  repair_channels(arch);
  ensure_tap(arch);
}

std::string format_count(std::int64_t value) {
  if (value == std::numeric_limits<std::int64_t>::max()) return "unbounded";
  return std::to_string(value);
}

std::string format_depth(int value) {
  if (value == std::numeric_limits<int>::max()) return "unbounded";
  return std::to_string(value);
}

std::string format_mu(double value) {
  std::ostringstream out;
  out.precision(6);
  out << value;
  return out.str();
}

}  // namespace

ArchitectureSpec sample_random_architecture(std::uint64_t seed, ArchMode mode,
                                            const ConstraintSet& constraints) {
  const int depth_cap = constraints.max_depth;
  const int max_body =
      mode == ArchMode::Classification
          ? std::clamp(depth_cap == std::numeric_limits<int>::max()
                           ? 6
                           : depth_cap - 2,
                       1, 6)
          : std::clamp(depth_cap == std::numeric_limits<int>::max()
                           ? 7
                           : depth_cap,
                       2, 7);
  ArchitectureSpec arch;
  for (int attempt = 0; attempt < 3; ++attempt) {
    Philox rng(seed, mix_seed(kSampleStream, attempt));
    const int cap = attempt == 0 ? 64 : (attempt == 1 ? 32 : 16);
    arch = sample_once(rng, mode, cap, max_body);
    if (check(estimate(arch), constraints).empty()) return arch;
  }
  return arch;
}

ArchitectureSpec mutate_architecture(const ArchitectureSpec& arch,
                                     std::uint64_t seed, int mutations) {
  ArchitectureSpec out = arch;
  Philox rng(seed, kMutateStream);
  for (int i = 0; i < mutations; ++i) {
    apply_one_mutation(out, rng);
  }
  return out;
}

GeneratorResult MockExploreGenerator::generate(const GenerationContext& ctx) {
  Philox rng(ctx.seed, kExploreStream);
  const bool fresh = ctx.pool_summary.empty() || pick(rng, 2) == 0;
  ArchitectureSpec arch;
  if (fresh) {
    arch = sample_random_architecture(draw_seed(rng), ctx.mode, ctx.constraints);
  } else {
    const auto& member =
        ctx.pool_summary[pick(rng, static_cast<int>(ctx.pool_summary.size()))];
    const ArchitectureSpec parent = parse_architecture(member.first, ctx.mode);
    arch = mutate_architecture(parent, draw_seed(rng), 2 + pick(rng, 3));
  }
  const std::string text = serialize(arch);
  return {text, text, GenerationFailure::None, "", 1};
}

GeneratorResult MockRefineGenerator::generate(const GenerationContext& ctx) {
  if (!ctx.base) {
    throw std::invalid_argument("mock refinement requires a base architecture");
  }
  Philox rng(ctx.seed, kRefineStream);
  const ArchitectureSpec base =
      parse_architecture(ctx.base->serialization, ctx.mode);
  const ArchitectureSpec arch = mutate_architecture(base, draw_seed(rng), 1);
  const std::string text = serialize(arch);
  return {text, text, GenerationFailure::None, "", 1};
}

std::string catalog_summary_for(ArchMode mode) {
  std::ostringstream out;
  for (const BlockSignature& sig : block_catalog()) {
    const bool admissible =
        mode == ArchMode::Classification ? sig.classification : sig.detection;
    if (!admissible) continue;
    out << sig.name << "(in,out,stride,repeats)";
    if (sig.kernel_count > 0) {
      out << "  kernels";
      for (int i = 0; i < sig.kernel_count; ++i) out << ' ' << sig.kernels[i];
    }
    out << "  strides {";
    if (sig.stride1) out << '1';
    if (sig.stride1 && sig.stride2) out << ',';
    if (sig.stride2) out << '2';
    out << '}';
    if (sig.equal_channels) out << "  in==out";
    if (sig.fixed_head) out << "  head block, stride=1, repeats=1";
    out << '\n';
  }
  return out.str();
}

std::vector<ChatMessage> build_prompt(const GenerationContext& ctx) {
  std::vector<ChatMessage> messages;
  messages.push_back(
      {"system",
       "You design convolutional network architectures written in a strict "
       "block template language. Always reply with exactly one architecture "
       "inside a fenced code block and nothing else."});

  std::ostringstream user;
  user << "Task: propose one " << to_string(ctx.mode) << " architecture.\n\n";
  user << "Grammar: one block per line, Name(in_channels,out_channels,stride,"
          "repeats); lines may also be separated by ';'; '#' starts a "
          "comment";
  if (ctx.mode == ArchMode::Detection) {
    user << "; a block may carry a feature-tap suffix @P<k>";
  }
  user << ".\nAdjacent blocks must chain channels: out_channels of a block "
          "equals in_channels of the next.\n";
  if (ctx.mode == ArchMode::Classification) {
    user << "The architecture must end with GAP then FC.\n";
  } else {
    user << "At least one block must carry a tap label; labels must be "
            "unique.\n";
  }
  user << "\nAvailable blocks:\n" << ctx.catalog_summary;

  user << "\nConstraints: max_params=" << format_count(ctx.constraints.max_params)
       << ", max_flops=" << format_count(ctx.constraints.max_flops)
       << ", max_depth=" << format_depth(ctx.constraints.max_depth)
       << ", min_params=" << format_count(ctx.constraints.min_params) << "\n";

  if (ctx.mode == ArchMode::Classification) {
    user << "\nExamples:\n```\nConvK3BNRELU(3,8,1,1)\nResK3K3(8,16,2,1)\n"
            "GAP(16,16,1,1)\nFC(16,10,1,1)\n```\n"
            "```\nConvK3BNRELU(3,16,1,1)\nResK5K5(16,32,2,2)\n"
            "ConvK1BNRELU(32,64,1,1)\nGAP(64,64,1,1)\nFC(64,10,1,1)\n```\n";
  } else {
    user << "\nExamples:\n```\nConvK3BNRELU(3,16,2,1)\nResK3K3(16,32,2,1)@P3\n"
            "SCDown(32,64,2,1)@P4\nPSA(64,64,1,1)@P5\n```\n"
            "```\nConvK3BNRELU(3,8,1,1)\nSCDown(8,16,2,1)\n"
            "ResK3K3(16,16,1,2)@P3\n```\n";
  }

  if (ctx.pool_summary.empty()) {
    user << "\nCurrent pool: empty\n";
  } else {
    user << "\nCurrent pool (best first):\n";
    for (const auto& [key, mu] : ctx.pool_summary) {
      user << "  " << key << "  mu=" << format_mu(mu) << "\n";
    }
  }

  if (ctx.phase == PhaseTag::Refinement && ctx.base) {
    user << "\nBase architecture (mu=" << format_mu(ctx.base->mu)
         << ", params=" << ctx.base->profile.params
         << ", flops=" << ctx.base->profile.flops
         << ", depth=" << ctx.base->profile.depth << "):\n```\n"
         << ctx.base->serialization << "```\n";
    if (!ctx.feedback.empty()) {
      user << "Recent feedback:\n";
      for (const std::string& line : ctx.feedback) {
        user << "- " << line << "\n";
      }
    }
    user << "Improve the base architecture while preserving the overall "
            "structure.\n";
  }

  user << "\nRespond with exactly one architecture in a fenced code block.";
  messages.push_back({"user", user.str()});
  return messages;
}

std::optional<std::string> extract_architecture(const std::string& raw,
                                                std::string* error) {
  const auto has_block_line = [](const std::string& text) {
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
      if (looks_like_block_line(line)) return true;
    }
    return false;
  };

  // First strategy: fenced code blocks, first one containing DSL lines.
  std::size_t cursor = 0;
  while (true) {
    const std::size_t open = raw.find("```", cursor);
    if (open == std::string::npos) break;
    std::size_t content_start = raw.find('\n', open + 3);
    if (content_start == std::string::npos) break;
    ++content_start;
    const std::size_t close = raw.find("```", content_start);
    const std::string content =
        close == std::string::npos
            ? raw.substr(content_start)
            : raw.substr(content_start, close - content_start);
    if (has_block_line(content)) return content;
    if (close == std::string::npos) break;
    cursor = close + 3;
  }

  // Fallback: the maximal contiguous run of block-call lines.
  std::vector<std::string> lines;
  {
    std::istringstream stream(raw);
    std::string line;
    while (std::getline(stream, line)) lines.push_back(line);
  }
  std::size_t best_start = 0, best_len = 0;
  std::size_t run_start = 0, run_len = 0;
  for (std::size_t i = 0; i <= lines.size(); ++i) {
    if (i < lines.size() && looks_like_block_line(lines[i])) {
      if (run_len == 0) run_start = i;
      ++run_len;
    } else {
      if (run_len > best_len) {
        best_len = run_len;
        best_start = run_start;
      }
      run_len = 0;
    }
  }
  if (best_len == 0) {
    if (error) *error = "no fenced code block and no block-call lines found";
    return std::nullopt;
  }
  std::string out;
  for (std::size_t i = best_start; i < best_start + best_len; ++i) {
    out += lines[i];
    out += '\n';
  }
  return out;
}

}  // namespace phasenas
