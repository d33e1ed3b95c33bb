#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phasenas/arch.hpp"
#include "phasenas/resource.hpp"

namespace phasenas {

enum class PhaseTag { Exploration, Refinement };

std::string_view to_string(PhaseTag tag);
std::optional<PhaseTag> phase_from_string(std::string_view name);

struct BaseInfo {
  std::string serialization;  // canonical text of the base architecture
  double mu = 0.0;
  ResourceProfile profile;
};

// Everything a generator may condition on for one request. Controllers vary
// `seed` per iteration; generators must be pure functions of this struct.
struct GenerationContext {
  PhaseTag phase = PhaseTag::Exploration;
  ArchMode mode = ArchMode::Classification;
  ConstraintSet constraints;
  std::string catalog_summary;
  std::vector<std::pair<std::string, double>> pool_summary;  // (key, mu)
  std::optional<BaseInfo> base;  // present iff phase == Refinement
  std::vector<std::string> feedback;  // recent rejection reasons
  std::uint64_t seed = 0;
};

enum class GenerationFailure { None, Extraction, Transport };

struct GeneratorResult {
  std::string raw_text;   // full generator output
  std::string extracted;  // DSL source; meaningful when failure == None
  GenerationFailure failure = GenerationFailure::None;
  std::string error;
  int attempts = 1;

  bool ok() const { return failure == GenerationFailure::None; }
};

class ArchitectureGenerator {
 public:
  virtual ~ArchitectureGenerator() = default;
  virtual GeneratorResult generate(const GenerationContext& ctx) = 0;
  virtual std::string name() const = 0;
};

// Seeded sampler standing in for the exploration model: with probability 1/2
// it emits a fresh random architecture within the constraints, otherwise it
// applies 2-4 random mutations to a random pool member. Outputs are
// channel-consistent by construction.
class MockExploreGenerator : public ArchitectureGenerator {
 public:
  GeneratorResult generate(const GenerationContext& ctx) override;
  std::string name() const override { return "mock-explore"; }
};

// Hill-climb stand-in for the refinement model: exactly one mutation applied
// to the base architecture. Requires ctx.base.
class MockRefineGenerator : public ArchitectureGenerator {
 public:
  GeneratorResult generate(const GenerationContext& ctx) override;
  std::string name() const override { return "mock-refine"; }
};

struct ChatMessage {
  std::string role;
  std::string content;
};

// Deterministic prompt construction. Exploration prompts carry the grammar,
// the catalog table, the numeric constraints, two few-shot examples and the
// pool summary; refinement prompts additionally embed the base architecture,
// its score and resource profile, and the recent feedback lines.
std::vector<ChatMessage> build_prompt(const GenerationContext& ctx);

// Human-readable table of the blocks admissible in `mode`; used to fill
// GenerationContext::catalog_summary.
std::string catalog_summary_for(ArchMode mode);

// Pulls the DSL out of raw generator text: the first fenced code block, or
// failing that the maximal contiguous run of block-call lines. Returns
// nullopt (with a reason in *error) when neither yields at least one line.
std::optional<std::string> extract_architecture(const std::string& raw,
                                                std::string* error = nullptr);

// Test-only helpers live alongside the mocks: a fresh constraint-aware
// random architecture, and n random structure-preserving mutations.
ArchitectureSpec sample_random_architecture(std::uint64_t seed, ArchMode mode,
                                            const ConstraintSet& constraints);
ArchitectureSpec mutate_architecture(const ArchitectureSpec& arch,
                                     std::uint64_t seed, int mutations);

}  // namespace phasenas
