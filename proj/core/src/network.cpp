#include "phasenas/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "phasenas/dsl.hpp"
#include "phasenas/rng.hpp"

namespace phasenas {

namespace {

using detail::BnParams;
using detail::ConvParams;
using detail::FcParams;
using detail::Op;
using detail::OpType;
using detail::PsaParams;

// BatchNorm's internal stabilizer; independent of the score epsilon.
constexpr double kBnEpsilon = 1e-5;

// Stream-id tags keep weight streams disjoint from the score input streams
// even when the two seeds coincide.
constexpr std::uint64_t kWeightStreamTag = 0x57454947485453ull;

struct Builder {
  std::vector<ConvParams>& convs;
  std::vector<BnParams>& bns;
  std::vector<FcParams>& fcs;
  std::vector<PsaParams>& psas;
  std::size_t& parameter_count;
  std::uint64_t seed;
  int next_layer = 0;

  int add_conv(int k, int cin, int cout, int stride, bool depthwise) {
    ConvParams conv;
    conv.k = k;
    conv.cin = cin;
    conv.cout = cout;
    conv.stride = stride;
    conv.depthwise = depthwise;
    const std::size_t count = depthwise
                                  ? static_cast<std::size_t>(cout) * k * k
                                  : static_cast<std::size_t>(cout) * cin * k * k;
    conv.weights.resize(count);
    const int fan_in = depthwise ? k * k : cin * k * k;
    const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
    Philox rng(seed, mix_seed(kWeightStreamTag, next_layer++));
    rng.fill_normal(conv.weights, stddev);
    parameter_count += conv.weights.size();
    convs.push_back(std::move(conv));
    return static_cast<int>(convs.size()) - 1;
  }

  int add_bn(int channels) {
    BnParams bn;
    bn.channels = channels;
    bn.gamma.assign(channels, 1.0f);
    bn.beta.assign(channels, 0.0f);
    parameter_count += 2 * static_cast<std::size_t>(channels);
    bns.push_back(std::move(bn));
    return static_cast<int>(bns.size()) - 1;
  }

  int add_fc(int cin, int cout) {
    FcParams fc;
    fc.cin = cin;
    fc.cout = cout;
    fc.weights.resize(static_cast<std::size_t>(cout) * cin);
    fc.bias.assign(cout, 0.0f);
    const float stddev = std::sqrt(2.0f / static_cast<float>(cin));
    Philox rng(seed, mix_seed(kWeightStreamTag, next_layer++));
    rng.fill_normal(fc.weights, stddev);
    parameter_count += fc.weights.size() + fc.bias.size();
    fcs.push_back(std::move(fc));
    return static_cast<int>(fcs.size()) - 1;
  }

  int add_psa(int channels) {
    PsaParams psa;
    psa.channels = channels;
    psa.mid = std::max(1, channels / 2);
    psa.w1.resize(static_cast<std::size_t>(psa.mid) * channels);
    psa.w2.resize(static_cast<std::size_t>(channels) * psa.mid);
    Philox rng1(seed, mix_seed(kWeightStreamTag, next_layer++));
    rng1.fill_normal(psa.w1, std::sqrt(2.0f / static_cast<float>(channels)));
    Philox rng2(seed, mix_seed(kWeightStreamTag, next_layer++));
    rng2.fill_normal(psa.w2, std::sqrt(2.0f / static_cast<float>(psa.mid)));
    parameter_count += psa.w1.size() + psa.w2.size();
    psas.push_back(std::move(psa));
    return static_cast<int>(psas.size()) - 1;
  }
};

void emit_conv_bn_relu(Builder& b, std::vector<Op>& ops, int k, int cin,
                       int cout, int stride) {
  ops.push_back({.type = OpType::Conv, .conv = b.add_conv(k, cin, cout, stride, false)});
  ops.push_back({.type = OpType::Bn, .bn = b.add_bn(cout)});
  ops.push_back({.type = OpType::Relu});
}

// One residual unit with two same-kernel convolutions; stride and channel
// change live in the first convolution, the shortcut is a projected 1x1
// conv + BN whenever the unit is not shape-preserving.
void emit_res_unit(Builder& b, std::vector<Op>& ops, int k, int cin, int cout,
                   int stride) {
  ops.push_back({.type = OpType::SaveShortcut});
  emit_conv_bn_relu(b, ops, k, cin, cout, stride);
  ops.push_back({.type = OpType::Conv, .conv = b.add_conv(k, cout, cout, 1, false)});
  ops.push_back({.type = OpType::Bn, .bn = b.add_bn(cout)});
  Op add{.type = OpType::AddShortcut};
  if (cin != cout || stride != 1) {
    add.proj_conv = b.add_conv(1, cin, cout, stride, false);
    add.proj_bn = b.add_bn(cout);
  }
  ops.push_back(add);
  ops.push_back({.type = OpType::Relu});
}

// Bottleneck unit 1x1 -> 3x3 (stride) -> 1x1 with mid = ceil(out / 2).
void emit_bottleneck_unit(Builder& b, std::vector<Op>& ops, int cin, int cout,
                          int stride) {
  const int mid = (cout + 1) / 2;
  ops.push_back({.type = OpType::SaveShortcut});
  emit_conv_bn_relu(b, ops, 1, cin, mid, 1);
  emit_conv_bn_relu(b, ops, 3, mid, mid, stride);
  ops.push_back({.type = OpType::Conv, .conv = b.add_conv(1, mid, cout, 1, false)});
  ops.push_back({.type = OpType::Bn, .bn = b.add_bn(cout)});
  Op add{.type = OpType::AddShortcut};
  if (cin != cout || stride != 1) {
    add.proj_conv = b.add_conv(1, cin, cout, stride, false);
    add.proj_bn = b.add_bn(cout);
  }
  ops.push_back(add);
  ops.push_back({.type = OpType::Relu});
}

// 1x1 channel change followed by a stride-2 depthwise 3x3, each with BN.
void emit_scdown_unit(Builder& b, std::vector<Op>& ops, int cin, int cout) {
  ops.push_back({.type = OpType::Conv, .conv = b.add_conv(1, cin, cout, 1, false)});
  ops.push_back({.type = OpType::Bn, .bn = b.add_bn(cout)});
  ops.push_back({.type = OpType::Conv, .conv = b.add_conv(3, cout, cout, 2, true)});
  ops.push_back({.type = OpType::Bn, .bn = b.add_bn(cout)});
}

std::vector<Op> compile_block(Builder& b, const BlockSpec& block) {
  std::vector<Op> ops;
  const auto& sig = catalog_signature(block.kind);
  for (int unit = 0; unit < block.repeats; ++unit) {
    const int cin = unit == 0 ? block.in_channels : block.out_channels;
    const int stride = unit == 0 ? block.stride : 1;
    switch (block.kind) {
      case BlockKind::ConvK1BNRELU:
      case BlockKind::ConvK3BNRELU:
      case BlockKind::ConvK5BNRELU:
      case BlockKind::ConvK7BNRELU:
        emit_conv_bn_relu(b, ops, sig.kernels[0], cin, block.out_channels, stride);
        break;
      case BlockKind::ResK3K3:
      case BlockKind::ResK5K5:
      case BlockKind::ResK7K7:
        emit_res_unit(b, ops, sig.kernels[0], cin, block.out_channels, stride);
        break;
      case BlockKind::ResK1K3K1:
        emit_bottleneck_unit(b, ops, cin, block.out_channels, stride);
        break;
      case BlockKind::SCDown:
        emit_scdown_unit(b, ops, cin, block.out_channels);
        break;
      case BlockKind::PSA:
        ops.push_back({.type = OpType::Psa, .psa = b.add_psa(block.out_channels)});
        break;
      case BlockKind::GAP:
        ops.push_back({.type = OpType::Gap});
        break;
      case BlockKind::FC:
        ops.push_back({.type = OpType::Fc,
                       .fc = b.add_fc(block.in_channels, block.out_channels)});
        break;
      case BlockKind::Identity:
        break;
    }
  }
  return ops;
}

void apply_bn(Tensor& t, const BnParams& bn,
              std::vector<std::vector<double>>& variances_out) {
  const int spatial = t.h * t.w;
  const double count = static_cast<double>(t.n) * spatial;
  std::vector<double> variances(t.c, 0.0);
  for (int ci = 0; ci < t.c; ++ci) {
    double sum = 0.0;
    for (int in = 0; in < t.n; ++in) {
      const float* p = t.plane(in, ci);
      for (int i = 0; i < spatial; ++i) sum += p[i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (int in = 0; in < t.n; ++in) {
      const float* p = t.plane(in, ci);
      for (int i = 0; i < spatial; ++i) {
        const double d = p[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / count;
    variances[ci] = var;
    const double inv = 1.0 / std::sqrt(var + kBnEpsilon);
    const float scale = bn.gamma[ci] * static_cast<float>(inv);
    const float shift =
        bn.beta[ci] - static_cast<float>(mean) * scale;
    for (int in = 0; in < t.n; ++in) {
      float* p = t.plane(in, ci);
      for (int i = 0; i < spatial; ++i) p[i] = p[i] * scale + shift;
    }
  }
  variances_out.push_back(std::move(variances));
}

void apply_relu(Tensor& t) {
  for (float& v : t.data) v = v > 0.0f ? v : 0.0f;
}

Tensor apply_gap(const Tensor& t) {
  Tensor out(t.n, t.c, 1, 1);
  const int spatial = t.h * t.w;
  const double inv = 1.0 / spatial;
  for (int in = 0; in < t.n; ++in) {
    for (int ci = 0; ci < t.c; ++ci) {
      const float* p = t.plane(in, ci);
      double sum = 0.0;
      for (int i = 0; i < spatial; ++i) sum += p[i];
      out.at(in, ci, 0, 0) = static_cast<float>(sum * inv);
    }
  }
  return out;
}

Tensor apply_fc(const Tensor& t, const FcParams& fc) {
  if (t.h != 1 || t.w != 1) {
    throw std::logic_error("FC block expects a pooled 1x1 input");
  }
  Tensor out(t.n, fc.cout, 1, 1);
  for (int in = 0; in < t.n; ++in) {
    const float* p = t.plane(in, 0);
    for (int o = 0; o < fc.cout; ++o) {
      float acc = fc.bias[o];
      const float* w = &fc.weights[static_cast<std::size_t>(o) * fc.cin];
      for (int ci = 0; ci < fc.cin; ++ci) acc += w[ci] * p[ci];
      out.at(in, o, 0, 0) = acc;
    }
  }
  return out;
}

void apply_psa(Tensor& t, const PsaParams& psa) {
  const int spatial = t.h * t.w;
  const double inv = 1.0 / spatial;
  std::vector<float> pooled(t.c), hidden(psa.mid), logits(t.c), gate(t.c);
  for (int in = 0; in < t.n; ++in) {
    for (int ci = 0; ci < t.c; ++ci) {
      const float* p = t.plane(in, ci);
      double sum = 0.0;
      for (int i = 0; i < spatial; ++i) sum += p[i];
      pooled[ci] = static_cast<float>(sum * inv);
    }
    for (int m = 0; m < psa.mid; ++m) {
      float acc = 0.0f;
      const float* w = &psa.w1[static_cast<std::size_t>(m) * t.c];
      for (int ci = 0; ci < t.c; ++ci) acc += w[ci] * pooled[ci];
      hidden[m] = acc > 0.0f ? acc : 0.0f;
    }
    float max_logit = -std::numeric_limits<float>::infinity();
    for (int ci = 0; ci < t.c; ++ci) {
      float acc = 0.0f;
      const float* w = &psa.w2[static_cast<std::size_t>(ci) * psa.mid];
      for (int m = 0; m < psa.mid; ++m) acc += w[m] * hidden[m];
      logits[ci] = acc;
      max_logit = std::max(max_logit, acc);
    }
    float denom = 0.0f;
    for (int ci = 0; ci < t.c; ++ci) {
      gate[ci] = std::exp(logits[ci] - max_logit);
      denom += gate[ci];
    }
    for (int ci = 0; ci < t.c; ++ci) {
      const float g = gate[ci] / denom;
      float* p = t.plane(in, ci);
      for (int i = 0; i < spatial; ++i) p[i] = p[i] + p[i] * g;
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, std::span<const float> weights, int k,
              int cout, int stride, bool depthwise) {
  const int pad = k / 2;
  const int out_h = (input.h + 2 * pad - k) / stride + 1;
  const int out_w = (input.w + 2 * pad - k) / stride + 1;
  Tensor out(input.n, cout, out_h, out_w);
  const std::size_t kk = static_cast<std::size_t>(k) * k;

  for (int in = 0; in < input.n; ++in) {
    for (int co = 0; co < cout; ++co) {
      const int ci_begin = depthwise ? co : 0;
      const int ci_end = depthwise ? co + 1 : input.c;
      for (int ci = ci_begin; ci < ci_end; ++ci) {
        const float* in_plane = input.plane(in, ci);
        const float* w_base =
            depthwise ? &weights[co * kk]
                      : &weights[(static_cast<std::size_t>(co) * input.c + ci) * kk];
        float* out_plane = out.plane(in, co);
        for (int ky = 0; ky < k; ++ky) {
          const int y_shift = ky - pad;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride + y_shift;
            if (iy < 0 || iy >= input.h) continue;
            const float* in_row = in_plane + static_cast<std::size_t>(iy) * input.w;
            float* out_row = out_plane + static_cast<std::size_t>(oy) * out_w;
            for (int kx = 0; kx < k; ++kx) {
              const float wv = w_base[ky * k + kx];
              const int x_shift = kx - pad;
              int lo = 0;
              if (x_shift < 0) lo = (-x_shift + stride - 1) / stride;
              int hi = (input.w - 1 - x_shift) / stride;
              if (hi > out_w - 1) hi = out_w - 1;
              const float* in_shift = in_row + x_shift;
              if (stride == 1) {
                for (int ox = lo; ox <= hi; ++ox) out_row[ox] += wv * in_shift[ox];
              } else {
                for (int ox = lo; ox <= hi; ++ox) {
                  out_row[ox] += wv * in_row[ox * stride + x_shift];
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

NetworkInstance build_network(const ArchitectureSpec& arch, std::uint64_t seed) {
  const std::vector<ValidationError> errors = validate(arch, ConstraintSet{});
  if (!errors.empty()) {
    throw std::invalid_argument("invalid architecture: " +
                                format_error(errors.front()));
  }

  NetworkInstance net;
  net.arch_ = arch;
  net.seed_ = seed;
  Builder builder{net.convs_, net.bns_, net.fcs_, net.psas_,
                  net.parameter_count_, seed};
  for (const BlockSpec& block : arch.blocks) {
    net.block_programs_.push_back(compile_block(builder, block));
  }
  if (arch.mode == ArchMode::Classification) {
    for (std::size_t i = 0; i < arch.blocks.size(); ++i) {
      if (arch.blocks[i].kind == BlockKind::GAP) {
        net.pre_head_block_ = static_cast<int>(i);
        break;
      }
    }
  }
  return net;
}

ForwardTrace forward_with_stats(const NetworkInstance& net, const Tensor& input) {
  const ArchitectureSpec& arch = net.architecture();
  if (input.c != arch.input_channels) {
    throw std::invalid_argument("input has " + std::to_string(input.c) +
                                " channels, architecture expects " +
                                std::to_string(arch.input_channels));
  }

  ForwardTrace trace;
  Tensor cur = input;
  std::vector<Tensor> shortcuts;

  for (std::size_t i = 0; i < arch.blocks.size(); ++i) {
    if (static_cast<int>(i) == net.pre_head_block_) {
      trace.taps.push_back(cur);
    }
    for (const Op& op : net.block_programs_[i]) {
      switch (op.type) {
        case OpType::Conv: {
          const ConvParams& conv = net.convs_[op.conv];
          cur = conv2d(cur, conv.weights, conv.k, conv.cout, conv.stride,
                       conv.depthwise);
          break;
        }
        case OpType::Bn:
          apply_bn(cur, net.bns_[op.bn], trace.bn_variances);
          break;
        case OpType::Relu:
          apply_relu(cur);
          break;
        case OpType::SaveShortcut:
          shortcuts.push_back(cur);
          break;
        case OpType::AddShortcut: {
          Tensor saved = std::move(shortcuts.back());
          shortcuts.pop_back();
          if (op.proj_conv >= 0) {
            const ConvParams& conv = net.convs_[op.proj_conv];
            saved = conv2d(saved, conv.weights, conv.k, conv.cout, conv.stride,
                           conv.depthwise);
            apply_bn(saved, net.bns_[op.proj_bn], trace.bn_variances);
          }
          for (std::size_t j = 0; j < cur.data.size(); ++j) {
            cur.data[j] += saved.data[j];
          }
          break;
        }
        case OpType::Gap:
          cur = apply_gap(cur);
          break;
        case OpType::Fc:
          cur = apply_fc(cur, net.fcs_[op.fc]);
          break;
        case OpType::Psa:
          apply_psa(cur, net.psas_[op.psa]);
          break;
      }
    }
    if (arch.mode == ArchMode::Detection && arch.blocks[i].tap) {
      trace.taps.push_back(cur);
    }
  }
  return trace;
}

std::uint64_t NetworkInstance::weight_checksum() const {
  std::uint64_t hash = 0xCBF29CE484222325ull;
  const auto mix = [&hash](float v) {
    std::uint32_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    __builtin_memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 4; ++i) {
      hash ^= (bits >> (8 * i)) & 0xFFu;
      hash *= 0x100000001B3ull;
    }
  };
  for (const auto& conv : convs_) {
    for (float v : conv.weights) mix(v);
  }
  for (const auto& bn : bns_) {
    for (float v : bn.gamma) mix(v);
    for (float v : bn.beta) mix(v);
  }
  for (const auto& fc : fcs_) {
    for (float v : fc.weights) mix(v);
    for (float v : fc.bias) mix(v);
  }
  for (const auto& psa : psas_) {
    for (float v : psa.w1) mix(v);
    for (float v : psa.w2) mix(v);
  }
  return hash;
}

}  // namespace phasenas
