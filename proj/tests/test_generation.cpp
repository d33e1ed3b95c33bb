#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "phasenas/dsl.hpp"
#include "phasenas/generation.hpp"
#include "phasenas/rng.hpp"

using namespace phasenas;

namespace {

GenerationContext explore_context(std::uint64_t seed, ArchMode mode) {
  GenerationContext ctx;
  ctx.phase = PhaseTag::Exploration;
  ctx.mode = mode;
  ctx.catalog_summary = catalog_summary_for(mode);
  ctx.seed = seed;
  return ctx;
}

GenerationContext refine_context(std::uint64_t seed, const ArchitectureSpec& base) {
  GenerationContext ctx;
  ctx.phase = PhaseTag::Refinement;
  ctx.mode = base.mode;
  ctx.catalog_summary = catalog_summary_for(base.mode);
  ctx.seed = seed;
  BaseInfo info;
  info.serialization = serialize(base);
  info.mu = 4.2;
  info.profile = estimate(base);
  ctx.base = info;
  return ctx;
}

// Structural distance: number of positions whose (kind, stride, repeats)
// differ, ignoring the channel repair cascade.
int structural_diff(const ArchitectureSpec& a, const ArchitectureSpec& b) {
  int diff = 0;
  for (std::size_t i = 0; i < std::min(a.blocks.size(), b.blocks.size()); ++i) {
    const BlockSpec& x = a.blocks[i];
    const BlockSpec& y = b.blocks[i];
    if (x.kind != y.kind || x.stride != y.stride || x.repeats != y.repeats) {
      ++diff;
    }
  }
  return diff;
}

}  // namespace

TEST_CASE("explorer falls back to fresh sampling on an empty pool") {
  MockExploreGenerator gen;
  const GeneratorResult result = gen.generate(explore_context(1, ArchMode::Classification));
  REQUIRE(result.ok());
  const auto arch = parse_architecture(result.extracted, ArchMode::Classification);
  CHECK(validate(arch, ConstraintSet{}).empty());
}

TEST_CASE("mocks are pure functions of the context") {
  MockExploreGenerator gen;
  const auto ctx = explore_context(99, ArchMode::Detection);
  CHECK(gen.generate(ctx).extracted == gen.generate(ctx).extracted);

  const auto other = explore_context(100, ArchMode::Detection);
  CHECK(gen.generate(ctx).extracted != gen.generate(other).extracted);
}

TEST_CASE("explorer output is always parseable and channel-valid") {
  MockExploreGenerator gen;
  int pool_mutations = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const ArchMode mode =
        seed % 2 == 0 ? ArchMode::Classification : ArchMode::Detection;
    GenerationContext ctx = explore_context(mix_seed(31, seed), mode);
    if (seed % 3 == 0) {
      // Non-empty pool exercises the mutation branch.
      const auto member =
          sample_random_architecture(mix_seed(32, seed), mode, ConstraintSet{});
      ctx.pool_summary.emplace_back(serialize_compact(member), 1.0);
      ++pool_mutations;
    }
    const GeneratorResult result = gen.generate(ctx);
    REQUIRE(result.ok());
    const auto arch = parse_architecture(result.extracted, mode);  // must parse
    CHECK(validate(arch, ConstraintSet{}).empty());                // channel-valid
  }
  CHECK(pool_mutations > 0);
}

TEST_CASE("refiner applies a single structural mutation") {
  MockRefineGenerator gen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const ArchMode mode =
        seed % 2 == 0 ? ArchMode::Classification : ArchMode::Detection;
    const auto base =
        sample_random_architecture(mix_seed(41, seed), mode, ConstraintSet{});
    const GeneratorResult result =
        gen.generate(refine_context(mix_seed(42, seed), base));
    REQUIRE(result.ok());
    const auto refined = parse_architecture(result.extracted, mode);
    CHECK(validate(refined, ConstraintSet{}).empty());
    CHECK(refined != base);

    const auto size_delta = static_cast<long>(refined.blocks.size()) -
                            static_cast<long>(base.blocks.size());
    if (size_delta == 0) {
      CHECK(structural_diff(base, refined) <= 1);
    } else {
      CHECK(std::abs(size_delta) == 1);
    }
  }
}

TEST_CASE("refiner requires a base") {
  MockRefineGenerator gen;
  CHECK_THROWS_AS(gen.generate(explore_context(1, ArchMode::Classification)),
                  std::invalid_argument);
}

TEST_CASE("prompts embed constraints, examples and the pool") {
  GenerationContext ctx = explore_context(5, ArchMode::Classification);
  ctx.constraints.max_params = 123456;
  ctx.constraints.max_flops = 777888;
  ctx.constraints.max_depth = 14;
  ctx.pool_summary.emplace_back("ConvK3BNRELU(3,8,1,1);GAP(8,8,1,1);FC(8,10,1,1)", 3.5);

  const auto messages = build_prompt(ctx);
  REQUIRE(messages.size() == 2);
  CHECK(messages[0].role == "system");
  CHECK(messages[1].role == "user");
  const std::string& user = messages[1].content;
  CHECK(user.find("123456") != std::string::npos);
  CHECK(user.find("777888") != std::string::npos);
  CHECK(user.find("max_depth=14") != std::string::npos);
  CHECK(user.find("ConvK3BNRELU(3,8,1,1)") != std::string::npos);
  CHECK(user.find("fenced code block") != std::string::npos);
  // Two few-shot examples arrive as two fences.
  std::size_t fences = 0, pos = 0;
  while ((pos = user.find("```", pos)) != std::string::npos) {
    ++fences;
    pos += 3;
  }
  CHECK(fences == 4);
}

TEST_CASE("refinement prompts embed the base verbatim with feedback") {
  const auto base = parse_architecture(
      "ConvK3BNRELU(3,8,1,1)\nGAP(8,8,1,1)\nFC(8,10,1,1)",
      ArchMode::Classification);
  GenerationContext ctx = refine_context(9, base);
  ctx.feedback = {"ValidationError: ChannelMismatch at block 1"};
  const auto messages = build_prompt(ctx);
  const std::string& user = messages[1].content;
  CHECK(user.find(serialize(base)) != std::string::npos);
  CHECK(user.find("ChannelMismatch at block 1") != std::string::npos);
  CHECK(user.find("preserving the overall structure") != std::string::npos);
}

TEST_CASE("prompt construction is deterministic") {
  const auto base = parse_architecture(
      "ConvK3BNRELU(3,8,1,1)\nGAP(8,8,1,1)\nFC(8,10,1,1)",
      ArchMode::Classification);
  const auto a = build_prompt(refine_context(7, base));
  const auto b = build_prompt(refine_context(7, base));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].role == b[i].role);
    CHECK(a[i].content == b[i].content);
  }
}

TEST_CASE("extraction takes the first fenced block") {
  const std::string raw =
      "Here is my proposal:\n```\nConvK3BNRELU(3,8,1,1)\nGAP(8,8,1,1)\n"
      "FC(8,10,1,1)\n```\nHope it helps!";
  const auto extracted = extract_architecture(raw);
  REQUIRE(extracted.has_value());
  CHECK(extracted->find("ConvK3BNRELU(3,8,1,1)") != std::string::npos);
  CHECK(extracted->find("Hope") == std::string::npos);
  CHECK_NOTHROW(parse_architecture(*extracted, ArchMode::Classification));
}

TEST_CASE("extraction falls back to bare block lines") {
  const std::string raw =
      "The best layout is simple.\nConvK3BNRELU(3,8,1,1)\nGAP(8,8,1,1)\n"
      "FC(8,10,1,1)\nLet me know what you think.";
  const auto extracted = extract_architecture(raw);
  REQUIRE(extracted.has_value());
  const auto arch = parse_architecture(*extracted, ArchMode::Classification);
  CHECK(arch.blocks.size() == 3);
}

TEST_CASE("pure prose is an extraction error") {
  std::string error;
  CHECK_FALSE(extract_architecture("No architecture here, sorry.", &error));
  CHECK_FALSE(error.empty());
}

TEST_CASE("extraction is idempotent under re-fencing") {
  const std::string raw =
      "```\nConvK3BNRELU(3,8,1,1)\nGAP(8,8,1,1)\nFC(8,10,1,1)\n```";
  const auto once = extract_architecture(raw);
  REQUIRE(once.has_value());
  const auto twice = extract_architecture("```\n" + *once + "```");
  REQUIRE(twice.has_value());
  CHECK(*once == *twice);
}

TEST_CASE("language-tagged fences extract the same") {
  const std::string raw =
      "```text\nConvK3BNRELU(3,8,1,1)\nGAP(8,8,1,1)\nFC(8,10,1,1)\n```";
  const auto extracted = extract_architecture(raw);
  REQUIRE(extracted.has_value());
  CHECK_NOTHROW(parse_architecture(*extracted, ArchMode::Classification));
}
