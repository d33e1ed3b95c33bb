#pragma once

#include "phasenas/network.hpp"
#include "phasenas/score.hpp"

namespace phasenas::testing {

// Straight-line reference computation of the perturbation score, written
// directly from the defining equations and kept independent of the library's
// scoring path. It shares only the network forward pass (the model M and
// feature extractor F are inputs to the score, not part of it) and the
// deterministic input draws.
struct OracleResult {
  std::vector<double> per_repeat;
  double mean = 0.0;
  double stddev = 0.0;
};

OracleResult oracle_score(const NetworkInstance& net, const ScoreConfig& cfg);

}  // namespace phasenas::testing
