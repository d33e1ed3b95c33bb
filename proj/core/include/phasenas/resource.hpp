#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "phasenas/arch.hpp"

namespace phasenas {

// Analytic cost profile of one architecture. FLOPs count multiplies and adds
// separately (2 x MACs for conv/FC, 2 per element for BN, 1 per element for
// ReLU) at the architecture's input resolution; depth expands repeats.
struct ResourceProfile {
  std::int64_t params = 0;
  std::int64_t flops = 0;
  int depth = 0;
  int resolution = 0;
};

struct ConstraintSet {
  std::int64_t max_params = std::numeric_limits<std::int64_t>::max();
  std::int64_t max_flops = std::numeric_limits<std::int64_t>::max();
  int max_depth = std::numeric_limits<int>::max();
  std::int64_t min_params = 0;  // optional floor
};

enum class ResourceBound { Params, Flops, Depth, MinParams };

struct ConstraintViolation {
  ResourceBound bound;
  std::int64_t actual = 0;
  std::int64_t limit = 0;
};

std::string format_violation(const ConstraintViolation& violation);

// Precondition: the architecture is structurally valid (validate() empty at
// unbounded depth); throws std::invalid_argument otherwise.
ResourceProfile estimate(const ArchitectureSpec& arch);

// All bounds are inclusive: actual == limit passes.
std::vector<ConstraintViolation> check(const ResourceProfile& profile,
                                       const ConstraintSet& limits);

}  // namespace phasenas
