#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <set>

#include "phasenas/dsl.hpp"
#include "phasenas/micro_bench.hpp"
#include "phasenas/rng.hpp"

using namespace phasenas;

namespace {

ScoreConfig tiny_table_config() {
  ScoreConfig cfg;
  cfg.gamma_mix = 0.01;
  cfg.epsilon = 1e-5;
  cfg.repeats = 1;
  cfg.batch_size = 2;
  cfg.resolution = 8;
  cfg.seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("the space enumerates 729 distinct valid members") {
  const auto members = enumerate_micro_space();
  REQUIRE(members.size() == 729);

  std::set<std::string> keys;
  for (const auto& arch : members) {
    CHECK(validate(arch, ConstraintSet{}).empty());
    keys.insert(serialize_compact(arch));
  }
  CHECK(keys.size() == 729);  // exhaustive, no duplicates
}

TEST_CASE("the all-skip member is the bare head") {
  const auto arch = MicroSpace::from_choices(MicroSpace::choices_at(0));
  REQUIRE(arch.blocks.size() == 2);
  CHECK(arch.blocks[0].kind == BlockKind::GAP);
  CHECK(arch.blocks[1].kind == BlockKind::FC);
  CHECK(arch.blocks[0].in_channels == 3);
  CHECK(validate(arch, ConstraintSet{}).empty());
}

TEST_CASE("skipped slots defer channel bridging to the next active block") {
  // Slot 0 skipped, slot 1 active: the slot-1 block bridges 3 -> 16.
  MicroSpace::ChoiceVector choices{};
  choices.fill(MicroSpace::Choice::Skip);
  choices[1] = MicroSpace::Choice::Conv;
  const auto arch = MicroSpace::from_choices(choices);
  REQUIRE(arch.blocks.size() == 3);
  CHECK(arch.blocks[0].kind == BlockKind::ConvK3BNRELU);
  CHECK(arch.blocks[0].in_channels == 3);
  CHECK(arch.blocks[0].out_channels == 16);
  CHECK(arch.blocks[0].stride == 2);
}

TEST_CASE("index round-trips through keys") {
  const MicroSpace space;
  for (int i = 0; i < 729; i += 37) {
    const auto key = serialize_compact(space.members()[i]);
    CHECK(space.index_of(key) == i);
  }
  CHECK_FALSE(space.index_of("ConvK7BNRELU(3,8,1,1)").has_value());
}

TEST_CASE("tabulation assigns consistent ranks") {
  const OracleTable table = tabulate_micro_space(tiny_table_config());
  REQUIRE(table.entries.size() == 729);

  // argmax has rank 1
  CHECK(table.best().rank == 1);

  // rank consistency: mu_a > mu_b implies rank_a < rank_b (spot pairs)
  for (std::size_t i = 0; i < table.entries.size(); i += 31) {
    for (std::size_t j = i + 17; j < table.entries.size(); j += 97) {
      const auto& a = table.entries[i];
      const auto& b = table.entries[j];
      if (a.mu > b.mu) CHECK(a.rank < b.rank);
      if (b.mu > a.mu) CHECK(b.rank < a.rank);
      if (a.mu == b.mu) CHECK(a.rank == b.rank);
    }
  }

  // ranks are within 1..729 and rank == 1 + count of strictly greater
  const auto& probe = table.entries[123];
  int greater = 0;
  for (const auto& e : table.entries) {
    if (e.mu > probe.mu) ++greater;
  }
  CHECK(probe.rank == greater + 1);
}

TEST_CASE("re-tabulation is bitwise identical") {
  const OracleTable a = tabulate_micro_space(tiny_table_config());
  const OracleTable b = tabulate_micro_space(tiny_table_config());
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].mu == b.entries[i].mu);
    CHECK(a.entries[i].rank == b.entries[i].rank);
  }
}

TEST_CASE("tables round-trip through disk") {
  const OracleTable table = tabulate_micro_space(tiny_table_config());
  const std::string path = "oracle_roundtrip_test.tsv";
  save_oracle_table(table, path);
  const OracleTable loaded = load_oracle_table(path);
  std::remove(path.c_str());

  CHECK(loaded.config == table.config);
  REQUIRE(loaded.entries.size() == table.entries.size());
  for (std::size_t i = 0; i < table.entries.size(); ++i) {
    CHECK(loaded.entries[i].key == table.entries[i].key);
    CHECK(loaded.entries[i].mu == table.entries[i].mu);  // %.17g round-trip
    CHECK(loaded.entries[i].rank == table.entries[i].rank);
  }
}

TEST_CASE("rank lookups reject strangers") {
  const OracleTable table = tabulate_micro_space(tiny_table_config());
  const auto outside = parse_architecture(
      "ConvK7BNRELU(3,8,1,1)\nGAP(8,8,1,1)\nFC(8,10,1,1)",
      ArchMode::Classification);
  CHECK_FALSE(table.rank_of(outside).has_value());
  CHECK(table.rank_of(table.entries[5].key) == table.entries[5].rank);
}

TEST_CASE("config hash separates configs") {
  ScoreConfig a = tiny_table_config();
  ScoreConfig b = a;
  b.seed += 1;
  CHECK(score_config_hash(a) == score_config_hash(a));
  CHECK(score_config_hash(a) != score_config_hash(b));
}

TEST_CASE("micro generators stay inside the space") {
  const MicroSpace space;
  MicroExploreGenerator explorer;
  MicroRefineGenerator refiner;

  GenerationContext ctx;
  ctx.mode = ArchMode::Classification;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    ctx.seed = mix_seed(1, seed);
    ctx.pool_summary.clear();
    if (seed % 2 == 0) {
      ctx.pool_summary.emplace_back(
          serialize_compact(space.members()[seed % 729]), 1.0);
    }
    const GeneratorResult result = explorer.generate(ctx);
    REQUIRE(result.ok());
    const auto arch = parse_architecture(result.extracted, ArchMode::Classification);
    CHECK(space.index_of(serialize_compact(arch)).has_value());
  }

  GenerationContext rctx;
  rctx.phase = PhaseTag::Refinement;
  rctx.mode = ArchMode::Classification;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    rctx.seed = mix_seed(2, seed);
    BaseInfo base;
    const auto& member = space.members()[(seed * 13) % 729];
    base.serialization = serialize(member);
    base.mu = 0.0;
    base.profile = estimate(member);
    rctx.base = base;
    const GeneratorResult result = refiner.generate(rctx);
    REQUIRE(result.ok());
    const auto arch = parse_architecture(result.extracted, ArchMode::Classification);
    const auto idx = space.index_of(serialize_compact(arch));
    REQUIRE(idx.has_value());
    // exactly one slot changed
    const auto before = space.choices_of(serialize_compact(member));
    const auto after = MicroSpace::choices_at(*idx);
    REQUIRE(before.has_value());
    int changed = 0;
    for (int s = 0; s < MicroSpace::kSlots; ++s) {
      if ((*before)[s] != after[s]) ++changed;
    }
    CHECK(changed == 1);
  }
}
