#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "phasenas/network.hpp"
#include "phasenas/tensor.hpp"

namespace phasenas {

struct ScoreConfig {
  double gamma_mix = 0.01;  // perturbation mixing coefficient
  double epsilon = 1e-5;    // stabilizer inside the logs
  int repeats = 8;
  int batch_size = 16;
  int resolution = 32;  // square input side
  std::uint64_t seed = 0;

  bool operator==(const ScoreConfig&) const = default;
};

// Non-empty means the configuration is unusable.
std::vector<std::string> validate_config(const ScoreConfig& cfg);

struct ScoreReport {
  std::vector<double> per_repeat;  // s_i
  double mean = 0.0;               // mu, the ranking value
  double stddev = 0.0;             // sigma, population formula
  ScoreConfig config;
};

// A degenerate architecture produced a NaN or infinite repeat score; callers
// rank it as -infinity.
class NonFiniteScoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Population mean and standard deviation (divide by R, not R-1). Throws
// std::invalid_argument on an empty list.
std::pair<double, double> aggregate(std::span<const double> per_repeat);

// The standard-normal input drawn for repeat `repeat`; `which` selects the
// base tensor (0) or the perturbation tensor (1). Exposed so that external
// reimplementations of the score can consume identical draws.
Tensor score_input(const ScoreConfig& cfg, int channels, int repeat, int which);

// Multi-scale perturbation score over the tapped feature maps: per repeat,
// delta = sum_l ||f_1^(l) - f_mix^(l)||_1 with x_mix = x_1 + gamma * x_2,
// B = sum over BN layers of log(sqrt(mean-channel variance + epsilon))
// recorded during the x_1 pass, and s_i = log(delta + epsilon) + B.
// Requires a detection-mode network with at least one tap.
ScoreReport detection_score(const NetworkInstance& net, const ScoreConfig& cfg);

// Same pipeline with L = 1 and the tap fixed at the final pre-GAP feature
// map; requires a classification-mode network.
ScoreReport classification_score(const NetworkInstance& net,
                                 const ScoreConfig& cfg);

// Low-level entry: scores `net` on caller-supplied (x_1, x_2) pairs, one per
// repeat. The high-level functions pass score_input draws; tests can feed
// degenerate tensors.
ScoreReport score_on_inputs(const NetworkInstance& net, const ScoreConfig& cfg,
                            std::span<const std::pair<Tensor, Tensor>> inputs);

}  // namespace phasenas
