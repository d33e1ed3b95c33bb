#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "phasenas/arch.hpp"
#include "phasenas/generation.hpp"
#include "phasenas/pool.hpp"
#include "phasenas/resource.hpp"
#include "phasenas/score.hpp"

namespace phasenas {

struct SearchConfig {
  double gamma_trans = 0.0;  // phase-transition threshold (inclusive >=)
  double gamma_stop = 0.0;   // stopping threshold (inclusive >=)
  int pool_size = 5;         // K
  int max_iterations = 100;  // budget guard on top of the threshold loop
  ScoreConfig score;
  ConstraintSet constraints;
  std::uint64_t seed = 0;
};

// Non-empty means the configuration is unusable.
std::vector<std::string> validate_search_config(const SearchConfig& cfg);

struct PhaseState {
  PhaseTag tag = PhaseTag::Exploration;
  std::optional<ArchitectureSpec> base;  // present iff Refinement
  std::optional<double> base_mu;
};

// One line of the search log. duration_ms is measured wall-clock time and is
// deliberately left out of the persisted form so logs of equal-seed runs are
// byte-identical.
struct IterationRecord {
  int iteration = 0;
  PhaseTag phase = PhaseTag::Exploration;
  std::string generator;
  std::string candidate;  // compact DSL, or raw text when extraction failed
  bool valid = false;
  bool admitted = false;
  std::optional<double> mu;
  std::optional<double> sigma;
  std::string rejection;  // empty when admitted
  double pool_best = 0.0;
  double pool_worst = 0.0;
  int pool_size = 0;
  double duration_ms = 0.0;
};

struct SearchSummary {
  ArchitectureSpec best;
  double best_mu = 0.0;
  ResourceProfile best_profile;
  int iterations = 0;
  std::optional<int> transition_iteration;
};

struct SearchResult {
  SearchSummary summary;
  std::vector<IterationRecord> records;
};

// Raised when the generator transport keeps failing after its own retry
// policy; the records emitted so far remain valid (partial log).
class SearchAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inclusive threshold tests over the pool maximum.
bool should_transition(const CandidatePool& pool, const SearchConfig& cfg);
bool should_stop(const CandidatePool& pool, const SearchConfig& cfg,
                 int completed_iterations);

using RecordSink = std::function<void(const IterationRecord&)>;

// The phase-aware controller: starts from {init} in exploration, requests
// candidates, validates them against the grammar and the resource budget,
// scores admissible ones, and drives the pool until the stopping rule fires.
// A candidate reaching gamma_trans flips the run into refinement, where only
// strict improvements over the base are accepted. Fully deterministic when
// both generators are.
SearchResult run_search(const ArchitectureSpec& init, const SearchConfig& cfg,
                        ArchitectureGenerator& explorer,
                        ArchitectureGenerator& refiner,
                        const RecordSink& sink = {});

}  // namespace phasenas
