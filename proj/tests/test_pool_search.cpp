#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "phasenas/dsl.hpp"
#include "phasenas/log_io.hpp"
#include "phasenas/pool.hpp"
#include "phasenas/search.hpp"

using namespace phasenas;

namespace {

ArchitectureSpec arch_with_width(int width) {
  const std::string w = std::to_string(width);
  return parse_architecture("ConvK3BNRELU(3," + w + ",1,1)\nGAP(" + w + "," +
                                w + ",1,1)\nFC(" + w + ",10,1,1)",
                            ArchMode::Classification);
}

class ScriptedGenerator : public ArchitectureGenerator {
 public:
  explicit ScriptedGenerator(std::vector<GeneratorResult> script)
      : script_(std::move(script)) {}

  GeneratorResult generate(const GenerationContext&) override {
    const std::size_t i = std::min(next_, script_.size() - 1);
    ++next_;
    return script_[i];
  }
  std::string name() const override { return "scripted"; }

 private:
  std::vector<GeneratorResult> script_;
  std::size_t next_ = 0;
};

GeneratorResult dsl_result(const std::string& text) {
  return {text, text, GenerationFailure::None, "", 1};
}

ScoreConfig tiny_score(std::uint64_t seed) {
  ScoreConfig cfg;
  cfg.repeats = 1;
  cfg.batch_size = 2;
  cfg.resolution = 8;
  cfg.seed = seed;
  return cfg;
}

SearchConfig tiny_search(std::uint64_t seed) {
  SearchConfig cfg;
  cfg.gamma_trans = 1e18;
  cfg.gamma_stop = 1e18;
  cfg.pool_size = 3;
  cfg.max_iterations = 10;
  cfg.score = tiny_score(seed);
  cfg.constraints.max_depth = 10;
  cfg.seed = seed;
  return cfg;
}

double score_of(const ArchitectureSpec& arch, const ScoreConfig& cfg) {
  return classification_score(build_network(arch, cfg.seed), cfg).mean;
}

}  // namespace

TEST_CASE("pool admission follows the strict-minimum rule") {
  CandidatePool pool(2);
  CHECK(pool.insert(arch_with_width(8), 5.0));
  CHECK_FALSE(pool.insert(arch_with_width(8), 9.0));  // duplicate key
  CHECK(pool.insert(arch_with_width(16), 4.0));
  CHECK(pool.size() == 2);

  CHECK_FALSE(pool.insert(arch_with_width(24), 3.9));  // below min
  CHECK_FALSE(pool.insert(arch_with_width(24), 4.0));  // equal min: strict
  CHECK(pool.insert(arch_with_width(24), 4.1));        // evicts the 4.0 entry
  CHECK(pool.size() == 2);
  CHECK(pool.best().mu == 5.0);
  CHECK(pool.worst().mu == 4.1);
}

TEST_CASE("equal scores rank by insertion order") {
  CandidatePool pool(2);
  CHECK(pool.insert(arch_with_width(8), 5.0));
  CHECK(pool.insert(arch_with_width(16), 5.0));
  CHECK(pool.best().key == serialize_compact(arch_with_width(8)));
  CHECK(pool.worst().key == serialize_compact(arch_with_width(16)));
}

TEST_CASE("threshold predicates are inclusive") {
  SearchConfig cfg;
  cfg.gamma_trans = 5.0;
  cfg.gamma_stop = 7.0;
  cfg.pool_size = 4;

  CandidatePool pool(4);
  CHECK_FALSE(should_transition(pool, cfg));  // empty pool

  pool.insert(arch_with_width(8), 5.0);
  CHECK(should_transition(pool, cfg));  // max == gamma_trans

  CandidatePool below(4);
  below.insert(arch_with_width(8), 5.0 - 1e-9);
  CHECK_FALSE(should_transition(below, cfg));

  CHECK_FALSE(should_stop(pool, cfg, 0));
  pool.insert(arch_with_width(16), 7.0);
  CHECK(should_stop(pool, cfg, 0));  // max == gamma_stop

  CandidatePool low(4);
  low.insert(arch_with_width(8), 0.0);
  cfg.max_iterations = 3;
  CHECK_FALSE(should_stop(low, cfg, 2));
  CHECK(should_stop(low, cfg, 3));  // budget guard
}

TEST_CASE("gamma_stop below the initial score returns init untouched") {
  const ArchitectureSpec init = arch_with_width(8);
  SearchConfig cfg = tiny_search(3);
  const double init_mu = score_of(init, cfg.score);
  cfg.gamma_stop = init_mu - 1.0;
  cfg.gamma_trans = cfg.gamma_stop;

  MockExploreGenerator explorer;
  MockRefineGenerator refiner;
  const SearchResult result = run_search(init, cfg, explorer, refiner);
  CHECK(result.summary.iterations == 0);
  CHECK(result.records.empty());
  CHECK(result.summary.best == init);
  CHECK(result.summary.best_mu == init_mu);
}

TEST_CASE("fixed seeds reproduce identical logs") {
  const ArchitectureSpec init = arch_with_width(8);
  SearchConfig cfg = tiny_search(17);
  cfg.max_iterations = 8;

  MockExploreGenerator explorer;
  MockRefineGenerator refiner;
  const SearchResult a = run_search(init, cfg, explorer, refiner);
  const SearchResult b = run_search(init, cfg, explorer, refiner);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(record_to_json_line(a.records[i]) == record_to_json_line(b.records[i]));
  }
}

TEST_CASE("unparsable generator output is a rejection, not a crash") {
  const ArchitectureSpec init = arch_with_width(8);
  SearchConfig cfg = tiny_search(5);
  cfg.max_iterations = 2;

  ScriptedGenerator bad({dsl_result("this is not DSL ((")});
  ScriptedGenerator unused({dsl_result("x")});
  const SearchResult result = run_search(init, cfg, bad, unused);
  REQUIRE(result.records.size() == 2);
  CHECK_FALSE(result.records[0].valid);
  CHECK(result.records[0].rejection.find("ParseError") == 0);
  CHECK(result.summary.best == init);
}

TEST_CASE("extraction failures are recorded and the loop continues") {
  const ArchitectureSpec init = arch_with_width(8);
  SearchConfig cfg = tiny_search(6);
  cfg.max_iterations = 2;

  GeneratorResult failed;
  failed.raw_text = "chatter with no architecture";
  failed.failure = GenerationFailure::Extraction;
  failed.error = "no block lines";
  ScriptedGenerator gen({failed});
  ScriptedGenerator unused({dsl_result("x")});
  const SearchResult result = run_search(init, cfg, gen, unused);
  REQUIRE(result.records.size() == 2);
  CHECK(result.records[0].rejection.find("ExtractionError") == 0);
  CHECK(result.records[1].rejection.find("ExtractionError") == 0);
}

TEST_CASE("invalid candidates and resource violations are rejections") {
  const ArchitectureSpec init = arch_with_width(8);
  SearchConfig cfg = tiny_search(7);
  cfg.max_iterations = 2;

  SUBCASE("channel mismatch") {
    ScriptedGenerator gen({dsl_result(
        "ConvK3BNRELU(3,8,1,1)\nResK3K3(16,16,1,1)\nGAP(16,16,1,1)\nFC(16,10,1,1)")});
    ScriptedGenerator unused({dsl_result("x")});
    const SearchResult result = run_search(init, cfg, gen, unused);
    CHECK(result.records[0].rejection.find("ValidationError") == 0);
  }
  SUBCASE("parameter budget") {
    cfg.constraints.max_params = 400;  // init (322 params) passes, wide nets fail
    ScriptedGenerator gen({dsl_result(
        "ConvK7BNRELU(3,64,1,1)\nGAP(64,64,1,1)\nFC(64,10,1,1)")});
    ScriptedGenerator unused({dsl_result("x")});
    const SearchResult result = run_search(init, cfg, gen, unused);
    CHECK(result.records[0].rejection.find("ResourceViolation") == 0);
  }
}

TEST_CASE("duplicates and below-minimum candidates are rejected") {
  const ArchitectureSpec init = arch_with_width(8);
  SearchConfig cfg = tiny_search(8);
  cfg.max_iterations = 2;
  cfg.pool_size = 1;

  // The same architecture twice: the first repeat duplicates the pool entry.
  ScriptedGenerator gen({dsl_result(serialize(init))});
  ScriptedGenerator unused({dsl_result("x")});
  const SearchResult result = run_search(init, cfg, gen, unused);
  CHECK(result.records[0].rejection.find("Duplicate") == 0);
}

TEST_CASE("persistent transport failure aborts with a partial log") {
  const ArchitectureSpec init = arch_with_width(8);
  SearchConfig cfg = tiny_search(9);
  cfg.max_iterations = 50;

  GeneratorResult dead;
  dead.failure = GenerationFailure::Transport;
  dead.error = "connection refused";
  ScriptedGenerator gen({dead});
  ScriptedGenerator unused({dsl_result("x")});

  std::vector<IterationRecord> seen;
  const RecordSink sink = [&seen](const IterationRecord& r) { seen.push_back(r); };
  CHECK_THROWS_AS(run_search(init, cfg, gen, unused, sink), SearchAborted);
  CHECK(seen.size() == 3);  // three consecutive failures, then abort
  for (const auto& r : seen) {
    CHECK(r.rejection.find("TransportError") == 0);
  }
}

TEST_CASE("a candidate reaching gamma_trans flips the phase") {
  const ArchitectureSpec init = arch_with_width(8);
  SearchConfig cfg = tiny_search(10);
  cfg.gamma_trans = -1e18;  // first post-insert check fires
  cfg.gamma_stop = 1e18;
  cfg.max_iterations = 3;

  MockExploreGenerator explorer;
  MockRefineGenerator refiner;
  const SearchResult result = run_search(init, cfg, explorer, refiner);
  REQUIRE(result.summary.transition_iteration.has_value());
  CHECK(*result.summary.transition_iteration == 1);
  REQUIRE(result.records.size() == 3);
  CHECK(result.records[0].phase == PhaseTag::Exploration);
  CHECK(result.records[1].phase == PhaseTag::Refinement);
  CHECK(result.records[2].phase == PhaseTag::Refinement);
}

TEST_CASE("algorithm invariants hold over seeded mock runs") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ArchitectureSpec init = arch_with_width(8);
    SearchConfig cfg = tiny_search(seed);
    cfg.max_iterations = 20;
    cfg.pool_size = 3;
    const double init_mu = score_of(init, cfg.score);
    cfg.gamma_trans = init_mu + 0.4;
    cfg.gamma_stop = 1e18;

    MockExploreGenerator explorer;
    MockRefineGenerator refiner;
    const SearchResult result = run_search(init, cfg, explorer, refiner);
    CHECK(result.summary.iterations <= cfg.max_iterations);

    double last_best = -1e300;
    bool seen_refinement = false;
    std::optional<double> base_mu;
    std::optional<int> first_reaching;
    for (const auto& record : result.records) {
      CHECK(record.pool_size <= cfg.pool_size);
      CHECK(record.pool_best >= last_best);
      last_best = record.pool_best;

      if (record.phase == PhaseTag::Refinement) {
        if (!seen_refinement) {
          seen_refinement = true;
          base_mu = result.records[record.iteration - 2].pool_best;
        }
        if (record.admitted) {
          REQUIRE(record.mu.has_value());
          CHECK(*record.mu > *base_mu);
          base_mu = *record.mu;
        }
      } else {
        CHECK_FALSE(seen_refinement);  // no reverse transition
      }
      if (!first_reaching && record.pool_best >= cfg.gamma_trans) {
        first_reaching = record.iteration;
      }
    }
    if (first_reaching) {
      REQUIRE(result.summary.transition_iteration.has_value());
      CHECK(*result.summary.transition_iteration == *first_reaching);
    } else {
      CHECK_FALSE(result.summary.transition_iteration.has_value());
    }
  }
}

TEST_CASE("search config validation") {
  SearchConfig cfg = tiny_search(1);
  CHECK(validate_search_config(cfg).empty());
  cfg.gamma_stop = 5.0;
  cfg.gamma_trans = 6.0;
  CHECK_FALSE(validate_search_config(cfg).empty());
}
