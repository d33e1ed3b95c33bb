#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "phasenas/dsl.hpp"
#include "phasenas/generation.hpp"
#include "phasenas/network.hpp"
#include "phasenas/resource.hpp"
#include "phasenas/rng.hpp"

using namespace phasenas;

namespace {

ArchitectureSpec parse_det(const std::string& text) {
  return parse_architecture(text, ArchMode::Detection);
}

}  // namespace

TEST_CASE("worked single-conv fixture") {
  ArchitectureSpec arch = parse_det("ConvK3BNRELU(3,8,1,1)@P3");
  arch.input_resolution = 32;
  const ResourceProfile profile = estimate(arch);

  // Hand formula: params = 3*8*9 + 2*8; conv flops = 2*(3*8*9*32*32).
  CHECK(profile.params == 3 * 8 * 9 + 2 * 8);
  const std::int64_t conv_flops = 2LL * 3 * 8 * 9 * 32 * 32;
  CHECK(conv_flops == 442368);
  const std::int64_t bn_flops = 2LL * 8 * 32 * 32;
  const std::int64_t relu_flops = 1LL * 8 * 32 * 32;
  CHECK(profile.flops == conv_flops + bn_flops + relu_flops);
  CHECK(profile.depth == 1);
}

TEST_CASE("identity blocks cost nothing") {
  ArchitectureSpec arch = parse_det("Identity(3,3,1,1)@P3");
  const ResourceProfile profile = estimate(arch);
  CHECK(profile.params == 0);
  CHECK(profile.flops == 0);
  CHECK(profile.depth == 1);
}

TEST_CASE("repeats scale shape-preserving residual params linearly") {
  ArchitectureSpec once = parse_det("ConvK3BNRELU(3,16,1,1)\nResK3K3(16,16,1,1)@P3");
  ArchitectureSpec twice = parse_det("ConvK3BNRELU(3,16,1,1)\nResK3K3(16,16,1,2)@P3");
  const std::int64_t stem =
      estimate(parse_det("ConvK3BNRELU(3,16,1,1)@P3")).params;
  const std::int64_t unit = estimate(once).params - stem;
  CHECK(estimate(twice).params - stem == 2 * unit);
}

TEST_CASE("estimate equals allocated scalars across random architectures") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const ArchMode mode =
        seed % 2 == 0 ? ArchMode::Classification : ArchMode::Detection;
    const ArchitectureSpec arch =
        sample_random_architecture(mix_seed(1234, seed), mode, ConstraintSet{});
    const ResourceProfile profile = estimate(arch);
    const NetworkInstance net = build_network(arch, seed);
    CHECK(profile.params == static_cast<std::int64_t>(net.parameter_count()));
  }
}

TEST_CASE("widening a channel pair never lowers cost") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ArchitectureSpec arch = sample_random_architecture(
        mix_seed(77, seed), ArchMode::Classification, ConstraintSet{});
    const ResourceProfile before = estimate(arch);

    // Widen the first block and re-chain everything behind it.
    arch.blocks[0].out_channels *= 2;
    int prev = arch.blocks[0].out_channels;
    for (std::size_t i = 1; i < arch.blocks.size(); ++i) {
      arch.blocks[i].in_channels = prev;
      if (catalog_signature(arch.blocks[i].kind).equal_channels) {
        arch.blocks[i].out_channels = prev;
      }
      prev = arch.blocks[i].out_channels;
    }
    const ResourceProfile after = estimate(arch);
    CHECK(after.params >= before.params);
    CHECK(after.flops >= before.flops);
  }
}

TEST_CASE("flops scale by 4x when the resolution doubles (stride-1 conv nets)") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    // Conv-only stride-1 detection bodies; no pooling/head terms.
    Philox rng(seed, 404);
    ArchitectureSpec arch;
    arch.mode = ArchMode::Detection;
    arch.input_channels = 3;
    arch.input_resolution = 16;
    int channels = 3;
    const int depth = 1 + static_cast<int>(rng.next_u32() % 4);
    for (int i = 0; i < depth; ++i) {
      const int out = 8 << (rng.next_u32() % 3);
      arch.blocks.push_back({BlockKind::ConvK3BNRELU, channels, out, 1, 1,
                             std::nullopt});
      channels = out;
    }
    arch.blocks.back().tap = "P3";

    const std::int64_t base = estimate(arch).flops;
    arch.input_resolution = 32;
    CHECK(estimate(arch).flops == 4 * base);
  }
}

TEST_CASE("constraint bounds are inclusive") {
  ArchitectureSpec arch = parse_det("ConvK3BNRELU(3,8,1,1)@P3");
  arch.input_resolution = 32;
  const ResourceProfile profile = estimate(arch);

  ConstraintSet limits;
  limits.max_params = 1000000;
  CHECK(check(profile, limits).empty());

  limits.max_params = profile.params;  // boundary passes
  CHECK(check(profile, limits).empty());

  limits.max_params = profile.params - 1;
  {
    const auto violations = check(profile, limits);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].bound == ResourceBound::Params);
    CHECK(format_violation(violations[0]).find("ParamsExceeded") == 0);
  }

  limits = ConstraintSet{};
  limits.max_flops = profile.flops - 1;  // exceeded by one
  {
    const auto violations = check(profile, limits);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].bound == ResourceBound::Flops);
  }

  limits = ConstraintSet{};
  limits.max_depth = profile.depth;  // depth == max passes
  CHECK(check(profile, limits).empty());

  limits.min_params = profile.params + 1;
  {
    const auto violations = check(profile, limits);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].bound == ResourceBound::MinParams);
  }
}

TEST_CASE("estimate rejects invalid architectures") {
  const auto broken = parse_architecture("ConvK3BNRELU(3,8,1,1)",
                                         ArchMode::Classification);
  CHECK_THROWS_AS(estimate(broken), std::invalid_argument);
}
