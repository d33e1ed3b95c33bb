#include "phasenas/search.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <sstream>
#include <unordered_map>

#include "phasenas/dsl.hpp"
#include "phasenas/rng.hpp"

namespace phasenas {

namespace {

constexpr int kFeedbackWindow = 3;
constexpr int kPoolSummaryLimit = 5;
constexpr int kMaxConsecutiveTransportFailures = 3;
constexpr std::size_t kRawSnippetLimit = 500;

std::string_view failure_prefix(GenerationFailure failure) {
  return failure == GenerationFailure::Transport ? "TransportError"
                                                 : "ExtractionError";
}

std::string snippet(const std::string& text) {
  if (text.size() <= kRawSnippetLimit) return text;
  return text.substr(0, kRawSnippetLimit) + "...";
}

std::string format_number(double value) {
  std::ostringstream out;
  out.precision(6);
  out << value;
  return out.str();
}

struct Controller {
  const SearchConfig& cfg;
  ArchitectureGenerator& explorer;
  ArchitectureGenerator& refiner;
  const RecordSink& sink;
  ArchMode mode;

  CandidatePool pool;
  PhaseState phase;
  std::vector<IterationRecord> records;
  std::deque<std::string> feedback;
  std::string catalog_summary;
  // Scores are deterministic per (arch, config), so each candidate is scored
  // at most once per run. nullopt marks a non-finite score.
  using MemoEntry = std::optional<std::pair<double, double>>;  // (mu, sigma)
  std::unordered_map<std::string, MemoEntry> score_memo;
  std::optional<int> transition_iteration;
  int consecutive_transport_failures = 0;

  Controller(const SearchConfig& c, ArchMode m, ArchitectureGenerator& e,
             ArchitectureGenerator& r, const RecordSink& s)
      : cfg(c), explorer(e), refiner(r), sink(s), mode(m),
        pool(static_cast<std::size_t>(c.pool_size)),
        catalog_summary(catalog_summary_for(m)) {}

  MemoEntry score_candidate(const ArchitectureSpec& arch,
                            const std::string& key) {
    const auto memo = score_memo.find(key);
    if (memo != score_memo.end()) return memo->second;
    MemoEntry entry;
    try {
      const NetworkInstance net = build_network(arch, cfg.score.seed);
      const ScoreReport report = mode == ArchMode::Classification
                                     ? classification_score(net, cfg.score)
                                     : detection_score(net, cfg.score);
      entry = {report.mean, report.stddev};
    } catch (const NonFiniteScoreError&) {
      entry = std::nullopt;
    }
    score_memo.emplace(key, entry);
    return entry;
  }

  GenerationContext make_context(int iteration) {
    GenerationContext ctx;
    ctx.phase = phase.tag;
    ctx.mode = mode;
    ctx.constraints = cfg.constraints;
    ctx.catalog_summary = catalog_summary;
    const auto entries = pool.entries();
    const std::size_t limit =
        std::min<std::size_t>(entries.size(), kPoolSummaryLimit);
    for (std::size_t i = 0; i < limit; ++i) {
      ctx.pool_summary.emplace_back(entries[i].key, entries[i].mu);
    }
    if (phase.tag == PhaseTag::Refinement) {
      BaseInfo base;
      base.serialization = serialize(*phase.base);
      base.mu = *phase.base_mu;
      base.profile = estimate(*phase.base);
      ctx.base = std::move(base);
    }
    ctx.feedback.assign(feedback.begin(), feedback.end());
    ctx.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(iteration));
    return ctx;
  }

  void note_rejection(IterationRecord& rec, std::string reason) {
    rec.rejection = std::move(reason);
    feedback.push_back(rec.rejection);
    while (feedback.size() > kFeedbackWindow) feedback.pop_front();
  }

  void step(int iteration) {
    const auto started = std::chrono::steady_clock::now();
    const bool exploring = phase.tag == PhaseTag::Exploration;
    ArchitectureGenerator& gen = exploring ? explorer : refiner;

    IterationRecord rec;
    rec.iteration = iteration;
    rec.phase = phase.tag;
    rec.generator = gen.name();

    const GenerationResultOutcome outcome = evaluate(gen, iteration, rec);
    if (outcome == GenerationResultOutcome::TransportFailure) {
      ++consecutive_transport_failures;
    } else {
      consecutive_transport_failures = 0;
    }

    rec.pool_best = pool.best().mu;
    rec.pool_worst = pool.worst().mu;
    rec.pool_size = static_cast<int>(pool.size());
    rec.duration_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - started)
                          .count();
    records.push_back(rec);
    if (sink) sink(rec);

    if (consecutive_transport_failures >= kMaxConsecutiveTransportFailures) {
      throw SearchAborted("generator transport failed " +
                          std::to_string(consecutive_transport_failures) +
                          " times in a row");
    }

    if (exploring && should_transition(pool, cfg)) {
      phase.tag = PhaseTag::Refinement;
      phase.base = pool.best().arch;
      phase.base_mu = pool.best().mu;
      transition_iteration = iteration;
    }
  }

  enum class GenerationResultOutcome { Ok, TransportFailure, OtherFailure };

  GenerationResultOutcome evaluate(ArchitectureGenerator& gen, int iteration,
                                   IterationRecord& rec) {
    const GenerationContext ctx = make_context(iteration);
    const GeneratorResult result = gen.generate(ctx);

    if (!result.ok()) {
      rec.candidate = snippet(result.raw_text);
      note_rejection(rec, std::string(failure_prefix(result.failure)) + ": " +
                              result.error);
      return result.failure == GenerationFailure::Transport
                 ? GenerationResultOutcome::TransportFailure
                 : GenerationResultOutcome::OtherFailure;
    }

    ArchitectureSpec candidate;
    try {
      candidate = parse_architecture(result.extracted, mode);
    } catch (const ParseError& err) {
      rec.candidate = snippet(result.extracted);
      note_rejection(rec, std::string("ParseError: ") + err.what());
      return GenerationResultOutcome::OtherFailure;
    }
    const std::string key = serialize_compact(candidate);
    rec.candidate = key;

    const std::vector<ValidationError> errors =
        validate(candidate, cfg.constraints);
    if (!errors.empty()) {
      note_rejection(rec, "ValidationError: " + format_error(errors.front()));
      return GenerationResultOutcome::OtherFailure;
    }
    const std::vector<ConstraintViolation> violations =
        check(estimate(candidate), cfg.constraints);
    if (!violations.empty()) {
      note_rejection(rec,
                     "ResourceViolation: " + format_violation(violations.front()));
      return GenerationResultOutcome::OtherFailure;
    }

    const MemoEntry scored = score_candidate(candidate, key);
    if (!scored) {
      note_rejection(rec, "NonFiniteScore: treated as -infinity");
      return GenerationResultOutcome::OtherFailure;
    }
    const double mu = scored->first;
    rec.valid = true;
    rec.mu = mu;
    rec.sigma = scored->second;

    if (phase.tag == PhaseTag::Exploration) {
      if (pool.contains(key)) {
        note_rejection(rec, "Duplicate: already in pool");
        return GenerationResultOutcome::Ok;
      }
      if (pool.insert(candidate, mu)) {
        rec.admitted = true;
      } else {
        note_rejection(rec, "BelowPoolMinimum: mu " + format_number(mu) +
                                " <= pool min " +
                                format_number(pool.worst().mu));
      }
      return GenerationResultOutcome::Ok;
    }

    // Refinement: strict improvement over the base, per the acceptance rule.
    if (mu > *phase.base_mu) {
      phase.base = candidate;
      phase.base_mu = mu;
      pool.insert(candidate, mu);
      rec.admitted = true;
    } else {
      note_rejection(rec, "NotImproving: mu " + format_number(mu) +
                              " <= base mu " + format_number(*phase.base_mu));
    }
    return GenerationResultOutcome::Ok;
  }
};

}  // namespace

std::string_view to_string(PhaseTag tag) {
  return tag == PhaseTag::Exploration ? "exploration" : "refinement";
}

std::optional<PhaseTag> phase_from_string(std::string_view name) {
  if (name == "exploration") return PhaseTag::Exploration;
  if (name == "refinement") return PhaseTag::Refinement;
  return std::nullopt;
}

std::vector<std::string> validate_search_config(const SearchConfig& cfg) {
  std::vector<std::string> problems = validate_config(cfg.score);
  if (cfg.gamma_trans > cfg.gamma_stop) {
    problems.push_back("gamma_trans must not exceed gamma_stop");
  }
  if (cfg.pool_size < 1) problems.push_back("pool_size must be at least 1");
  if (cfg.max_iterations < 1) {
    problems.push_back("max_iterations must be at least 1");
  }
  return problems;
}

bool should_transition(const CandidatePool& pool, const SearchConfig& cfg) {
  return !pool.empty() && pool.best().mu >= cfg.gamma_trans;
}

bool should_stop(const CandidatePool& pool, const SearchConfig& cfg,
                 int completed_iterations) {
  if (completed_iterations >= cfg.max_iterations) return true;
  return !pool.empty() && pool.best().mu >= cfg.gamma_stop;
}

SearchResult run_search(const ArchitectureSpec& init, const SearchConfig& cfg,
                        ArchitectureGenerator& explorer,
                        ArchitectureGenerator& refiner, const RecordSink& sink) {
  const std::vector<std::string> problems = validate_search_config(cfg);
  if (!problems.empty()) {
    throw std::invalid_argument("invalid search config: " + problems.front());
  }

  const std::vector<ValidationError> init_errors =
      validate(init, cfg.constraints);
  if (!init_errors.empty()) {
    throw std::invalid_argument("invalid initial architecture: " +
                                format_error(init_errors.front()));
  }
  const std::vector<ConstraintViolation> init_violations =
      check(estimate(init), cfg.constraints);
  if (!init_violations.empty()) {
    throw std::invalid_argument("initial architecture violates constraints: " +
                                format_violation(init_violations.front()));
  }

  Controller controller(cfg, init.mode, explorer, refiner, sink);
  const std::string init_key = serialize_compact(init);
  const auto init_score = controller.score_candidate(init, init_key);
  if (!init_score) {
    throw std::invalid_argument(
        "initial architecture has a non-finite score");
  }
  controller.pool.insert(init, init_score->first);

  int iteration = 0;
  while (!should_stop(controller.pool, cfg, iteration)) {
    controller.step(++iteration);
  }

  SearchResult result;
  result.summary.best = controller.pool.best().arch;
  result.summary.best_mu = controller.pool.best().mu;
  result.summary.best_profile = estimate(result.summary.best);
  result.summary.iterations = iteration;
  result.summary.transition_iteration = controller.transition_iteration;
  result.records = std::move(controller.records);
  return result;
}

}  // namespace phasenas
