#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "phasenas/arch.hpp"
#include "phasenas/tensor.hpp"

namespace phasenas {

// Everything captured from one forward pass that the scores consume: the
// tapped feature maps f^(l) in order, and the per-channel batch variances
// recorded by every BatchNorm layer (in execution order).
struct ForwardTrace {
  std::vector<Tensor> taps;
  std::vector<std::vector<double>> bn_variances;
};

namespace detail {

struct ConvParams {
  int k = 1;
  int cin = 0, cout = 0;
  int stride = 1;
  bool depthwise = false;
  std::vector<float> weights;  // [cout][cin][k][k], or [c][k][k] depthwise
};

struct BnParams {
  int channels = 0;
  std::vector<float> gamma, beta;
};

struct FcParams {
  int cin = 0, cout = 0;
  std::vector<float> weights;  // [cout][cin]
  std::vector<float> bias;     // [cout]
};

// Channel-attention unit: pool -> 1x1 conv (mid) -> ReLU -> 1x1 conv ->
// softmax over channels -> rescale, plus a residual add.
struct PsaParams {
  int channels = 0, mid = 0;
  std::vector<float> w1;  // [mid][channels]
  std::vector<float> w2;  // [channels][mid]
};

enum class OpType {
  Conv,
  Bn,
  Relu,
  SaveShortcut,
  AddShortcut,  // pops the saved tensor, optionally projecting it first
  Gap,
  Fc,
  Psa,
};

struct Op {
  OpType type;
  int conv = -1;
  int bn = -1;
  int fc = -1;
  int psa = -1;
  int proj_conv = -1;  // AddShortcut only
  int proj_bn = -1;
};

}  // namespace detail

// A randomly initialized, immutable realization of an architecture. Weights
// are Kaiming-normal (fan-in, gain sqrt(2)) drawn from a counter-based RNG
// keyed by (seed, layer index), so equal (arch, seed) pairs are bitwise
// identical and distinct layers never share a stream.
class NetworkInstance {
 public:
  const ArchitectureSpec& architecture() const { return arch_; }
  std::uint64_t seed() const { return seed_; }

  // Total scalars allocated across conv/FC weights, FC bias and BN affine
  // parameters; resource::estimate must agree with this exactly.
  std::size_t parameter_count() const { return parameter_count_; }

  // FNV-1a over the bit patterns of every allocated scalar.
  std::uint64_t weight_checksum() const;

  // Read-only weight introspection (reference computations in tests).
  std::size_t conv_layer_count() const { return convs_.size(); }
  std::span<const float> conv_weights(std::size_t index) const {
    return convs_[index].weights;
  }

 private:
  friend NetworkInstance build_network(const ArchitectureSpec&, std::uint64_t);
  friend ForwardTrace forward_with_stats(const NetworkInstance&, const Tensor&);

  ArchitectureSpec arch_;
  std::uint64_t seed_ = 0;
  std::size_t parameter_count_ = 0;
  std::vector<std::vector<detail::Op>> block_programs_;  // one per BlockSpec
  std::vector<detail::ConvParams> convs_;
  std::vector<detail::BnParams> bns_;
  std::vector<detail::FcParams> fcs_;
  std::vector<detail::PsaParams> psas_;
  int pre_head_block_ = -1;  // classification: tap point before the GAP block
};

// Throws std::invalid_argument when the architecture fails structural
// validation.
NetworkInstance build_network(const ArchitectureSpec& arch, std::uint64_t seed);

// Runs the blocks in order. Every BN layer normalizes with the one-shot
// batch statistics of its input (variance over batch x height x width per
// channel) and records that variance in the trace. Taps capture post-block
// activations at tap labels (detection) or the single pre-GAP feature map
// (classification).
ForwardTrace forward_with_stats(const NetworkInstance& net, const Tensor& input);

// Plain "same"-padded convolution (pad = k/2, no bias); exposed for direct
// numeric tests. Weight layout matches detail::ConvParams.
Tensor conv2d(const Tensor& input, std::span<const float> weights, int k,
              int cout, int stride, bool depthwise = false);

}  // namespace phasenas
