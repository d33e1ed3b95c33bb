#include "phasenas/score.hpp"

#include <cmath>

#include "phasenas/rng.hpp"

namespace phasenas {

namespace {

constexpr std::uint64_t kInputStreamTag = 0x494E505554ull;

double l1_distance(const Tensor& a, const Tensor& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    sum += std::abs(static_cast<double>(a.data[i]) -
                    static_cast<double>(b.data[i]));
  }
  return sum;
}

// One term per BN layer: the per-channel variances are averaged before the
// square root, so the term is insensitive to channel count at a fixed
// variance scale.
double bn_scaling_term(const ForwardTrace& trace, double epsilon) {
  double total = 0.0;
  for (const std::vector<double>& vars : trace.bn_variances) {
    double avg = 0.0;
    for (const double v : vars) avg += v;
    avg /= static_cast<double>(vars.size());
    total += std::log(std::sqrt(avg + epsilon));
  }
  return total;
}

}  // namespace

std::vector<std::string> validate_config(const ScoreConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.gamma_mix < 0.0 || cfg.gamma_mix > 1.0) {
    problems.push_back("gamma_mix must lie in [0, 1]");
  }
  if (cfg.epsilon <= 0.0) problems.push_back("epsilon must be positive");
  if (cfg.repeats < 1) problems.push_back("repeats must be at least 1");
  if (cfg.batch_size < 1) problems.push_back("batch_size must be at least 1");
  if (cfg.resolution < 1) problems.push_back("resolution must be at least 1");
  return problems;
}

std::pair<double, double> aggregate(std::span<const double> per_repeat) {
  if (per_repeat.empty()) {
    throw std::invalid_argument("aggregate over an empty repeat list");
  }
  const double r = static_cast<double>(per_repeat.size());
  double mean = 0.0;
  for (const double s : per_repeat) mean += s;
  mean /= r;
  double var = 0.0;
  for (const double s : per_repeat) var += (s - mean) * (s - mean);
  var /= r;
  return {mean, std::sqrt(var)};
}

Tensor score_input(const ScoreConfig& cfg, int channels, int repeat, int which) {
  Tensor t(cfg.batch_size, channels, cfg.resolution, cfg.resolution);
  const std::uint64_t stream = mix_seed(
      kInputStreamTag, (static_cast<std::uint64_t>(repeat) << 1) |
                           static_cast<std::uint64_t>(which & 1));
  Philox rng(cfg.seed, stream);
  rng.fill_normal(t.data);
  return t;
}

ScoreReport score_on_inputs(const NetworkInstance& net, const ScoreConfig& cfg,
                            std::span<const std::pair<Tensor, Tensor>> inputs) {
  ScoreReport report;
  report.config = cfg;
  const float gamma = static_cast<float>(cfg.gamma_mix);

  for (const auto& [x1, x2] : inputs) {
    Tensor x_mix = x1;
    for (std::size_t i = 0; i < x_mix.data.size(); ++i) {
      x_mix.data[i] = x1.data[i] + gamma * x2.data[i];
    }

    const ForwardTrace trace1 = forward_with_stats(net, x1);
    const ForwardTrace trace_mix = forward_with_stats(net, x_mix);

    double delta = 0.0;
    for (std::size_t l = 0; l < trace1.taps.size(); ++l) {
      delta += l1_distance(trace1.taps[l], trace_mix.taps[l]);
    }

    const double s = std::log(delta + cfg.epsilon) +
                     bn_scaling_term(trace1, cfg.epsilon);
    if (!std::isfinite(s)) {
      throw NonFiniteScoreError("repeat score is not finite");
    }
    report.per_repeat.push_back(s);
  }

  const auto [mean, stddev] = aggregate(report.per_repeat);
  report.mean = mean;
  report.stddev = stddev;
  return report;
}

namespace {

ScoreReport score_network(const NetworkInstance& net, const ScoreConfig& cfg) {
  std::vector<std::pair<Tensor, Tensor>> inputs;
  inputs.reserve(cfg.repeats);
  const int channels = net.architecture().input_channels;
  for (int repeat = 0; repeat < cfg.repeats; ++repeat) {
    inputs.emplace_back(score_input(cfg, channels, repeat, 0),
                        score_input(cfg, channels, repeat, 1));
  }
  return score_on_inputs(net, cfg, inputs);
}

}  // namespace

ScoreReport detection_score(const NetworkInstance& net, const ScoreConfig& cfg) {
  if (net.architecture().mode != ArchMode::Detection) {
    throw std::invalid_argument("detection_score requires a detection network");
  }
  return score_network(net, cfg);
}

ScoreReport classification_score(const NetworkInstance& net,
                                 const ScoreConfig& cfg) {
  if (net.architecture().mode != ArchMode::Classification) {
    throw std::invalid_argument(
        "classification_score requires a classification network");
  }
  return score_network(net, cfg);
}

}  // namespace phasenas
