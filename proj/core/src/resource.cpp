#include "phasenas/resource.hpp"

#include <sstream>
#include <stdexcept>

#include "phasenas/dsl.hpp"

namespace phasenas {

namespace {

// FLOPs convention: a conv or FC layer costs 2 x MACs (multiplies and adds
// counted separately), BatchNorm 2 FLOPs per element, ReLU 1 per element,
// elementwise residual adds 1 per element. Pooling costs 1 FLOP per pooled
// element plus one divide per channel; softmax costs 3 FLOPs per channel
// (exp, sum, divide). These formulas mirror exactly what build_network
// allocates, so estimated parameter counts equal allocated scalar counts.
struct Walker {
  std::int64_t params = 0;
  std::int64_t flops = 0;
  int h = 0, w = 0;

  static int conv_out(int extent, int k, int stride) {
    return (extent + 2 * (k / 2) - k) / stride + 1;
  }

  void conv(int k, int cin, int cout, int stride) {
    h = conv_out(h, k, stride);
    w = conv_out(w, k, stride);
    const std::int64_t macs = static_cast<std::int64_t>(k) * k * cin * cout * h * w;
    params += static_cast<std::int64_t>(k) * k * cin * cout;
    flops += 2 * macs;
  }

  void depthwise_conv(int k, int channels, int stride) {
    h = conv_out(h, k, stride);
    w = conv_out(w, k, stride);
    const std::int64_t macs =
        static_cast<std::int64_t>(k) * k * channels * h * w;
    params += static_cast<std::int64_t>(k) * k * channels;
    flops += 2 * macs;
  }

  void bn(int channels) {
    params += 2 * static_cast<std::int64_t>(channels);
    flops += 2 * static_cast<std::int64_t>(channels) * h * w;
  }

  void relu(int channels) {
    flops += static_cast<std::int64_t>(channels) * h * w;
  }

  void elementwise_add(int channels) {
    flops += static_cast<std::int64_t>(channels) * h * w;
  }
};

void walk_conv_block(Walker& wk, int k, int cin, int cout, int stride) {
  wk.conv(k, cin, cout, stride);
  wk.bn(cout);
  wk.relu(cout);
}

void walk_res_unit(Walker& wk, int k, int cin, int cout, int stride) {
  wk.conv(k, cin, cout, stride);
  wk.bn(cout);
  wk.relu(cout);
  wk.conv(k, cout, cout, 1);
  wk.bn(cout);
  if (cin != cout || stride != 1) {
    // Projection shortcut runs on the unit input but lands on the unit
    // output grid; spatial state is already there.
    wk.params += static_cast<std::int64_t>(cin) * cout;
    wk.flops += 2 * static_cast<std::int64_t>(cin) * cout * wk.h * wk.w;
    wk.bn(cout);
  }
  wk.elementwise_add(cout);
  wk.relu(cout);
}

void walk_bottleneck_unit(Walker& wk, int cin, int cout, int stride) {
  const int mid = (cout + 1) / 2;
  wk.conv(1, cin, mid, 1);
  wk.bn(mid);
  wk.relu(mid);
  wk.conv(3, mid, mid, stride);
  wk.bn(mid);
  wk.relu(mid);
  wk.conv(1, mid, cout, 1);
  wk.bn(cout);
  if (cin != cout || stride != 1) {
    wk.params += static_cast<std::int64_t>(cin) * cout;
    wk.flops += 2 * static_cast<std::int64_t>(cin) * cout * wk.h * wk.w;
    wk.bn(cout);
  }
  wk.elementwise_add(cout);
  wk.relu(cout);
}

void walk_scdown_unit(Walker& wk, int cin, int cout) {
  wk.conv(1, cin, cout, 1);
  wk.bn(cout);
  wk.depthwise_conv(3, cout, 2);
  wk.bn(cout);
}

// PSA: pool + two 1x1 convs with a mid width of max(1, c/2) + softmax +
// rescale with residual add.
void walk_psa_unit(Walker& wk, int channels) {
  const int mid = channels > 1 ? channels / 2 : 1;
  wk.flops += static_cast<std::int64_t>(channels) * wk.h * wk.w + channels;
  wk.params += 2 * static_cast<std::int64_t>(mid) * channels;
  wk.flops += 2 * static_cast<std::int64_t>(mid) * channels;  // conv1
  wk.flops += mid;                                            // relu
  wk.flops += 2 * static_cast<std::int64_t>(channels) * mid;  // conv2
  wk.flops += 3 * static_cast<std::int64_t>(channels);        // softmax
  wk.flops += 2 * static_cast<std::int64_t>(channels) * wk.h * wk.w;
}

}  // namespace

std::string format_violation(const ConstraintViolation& violation) {
  std::ostringstream out;
  switch (violation.bound) {
    case ResourceBound::Params:
      out << "ParamsExceeded: " << violation.actual << " > " << violation.limit;
      break;
    case ResourceBound::Flops:
      out << "FlopsExceeded: " << violation.actual << " > " << violation.limit;
      break;
    case ResourceBound::Depth:
      out << "DepthExceeded: " << violation.actual << " > " << violation.limit;
      break;
    case ResourceBound::MinParams:
      out << "ParamsBelowMinimum: " << violation.actual << " < "
          << violation.limit;
      break;
  }
  return out.str();
}

ResourceProfile estimate(const ArchitectureSpec& arch) {
  const std::vector<ValidationError> errors = validate(arch, ConstraintSet{});
  if (!errors.empty()) {
    throw std::invalid_argument("estimate on invalid architecture: " +
                                format_error(errors.front()));
  }

  Walker wk;
  wk.h = arch.input_resolution;
  wk.w = arch.input_resolution;
  int depth = 0;

  for (const BlockSpec& block : arch.blocks) {
    depth += block.repeats;
    const auto& sig = catalog_signature(block.kind);
    for (int unit = 0; unit < block.repeats; ++unit) {
      const int cin = unit == 0 ? block.in_channels : block.out_channels;
      const int stride = unit == 0 ? block.stride : 1;
      switch (block.kind) {
        case BlockKind::ConvK1BNRELU:
        case BlockKind::ConvK3BNRELU:
        case BlockKind::ConvK5BNRELU:
        case BlockKind::ConvK7BNRELU:
          walk_conv_block(wk, sig.kernels[0], cin, block.out_channels, stride);
          break;
        case BlockKind::ResK3K3:
        case BlockKind::ResK5K5:
        case BlockKind::ResK7K7:
          walk_res_unit(wk, sig.kernels[0], cin, block.out_channels, stride);
          break;
        case BlockKind::ResK1K3K1:
          walk_bottleneck_unit(wk, cin, block.out_channels, stride);
          break;
        case BlockKind::SCDown:
          walk_scdown_unit(wk, cin, block.out_channels);
          break;
        case BlockKind::PSA:
          walk_psa_unit(wk, block.out_channels);
          break;
        case BlockKind::GAP:
          wk.flops +=
              static_cast<std::int64_t>(block.out_channels) * wk.h * wk.w +
              block.out_channels;
          wk.h = 1;
          wk.w = 1;
          break;
        case BlockKind::FC:
          wk.params += static_cast<std::int64_t>(block.in_channels) *
                           block.out_channels +
                       block.out_channels;
          wk.flops += 2 * static_cast<std::int64_t>(block.in_channels) *
                          block.out_channels +
                      block.out_channels;
          break;
        case BlockKind::Identity:
          break;
      }
    }
  }

  ResourceProfile profile;
  profile.params = wk.params;
  profile.flops = wk.flops;
  profile.depth = depth;
  profile.resolution = arch.input_resolution;
  return profile;
}

std::vector<ConstraintViolation> check(const ResourceProfile& profile,
                                       const ConstraintSet& limits) {
  std::vector<ConstraintViolation> violations;
  if (profile.params > limits.max_params) {
    violations.push_back(
        {ResourceBound::Params, profile.params, limits.max_params});
  }
  if (profile.flops > limits.max_flops) {
    violations.push_back(
        {ResourceBound::Flops, profile.flops, limits.max_flops});
  }
  if (profile.depth > limits.max_depth) {
    violations.push_back(
        {ResourceBound::Depth, profile.depth, limits.max_depth});
  }
  if (profile.params < limits.min_params) {
    violations.push_back(
        {ResourceBound::MinParams, profile.params, limits.min_params});
  }
  return violations;
}

}  // namespace phasenas
