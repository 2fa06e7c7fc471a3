#pragma once

// Finite-difference checks of every layer type, a small full backbone and the
// LBAP, each on freshly drawn random instances.

#include <string>
#include <vector>

#include "beacon/nn/gradcheck.hpp"

namespace beacon::eval {

struct GradcheckCase {
  std::string name;
  std::size_t instances = 0;
  std::size_t checked = 0;
  std::size_t kinks_skipped = 0;
  /// Every instance under tolerance and kinks below 1% of checked entries.
  bool passed = true;
  /// Report of the instance with the largest relative error.
  nn::GradcheckReport worst;
};

/// Runs every case `instances` times, each instance on its own seed stream.
std::vector<GradcheckCase> run_gradcheck_suite(std::uint64_t seed, std::size_t instances,
                                               double tolerance = 1e-3);

}  // namespace beacon::eval
