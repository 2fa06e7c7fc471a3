#pragma once

#include <functional>
#include <span>
#include <string>

#include "beacon/nn/optim.hpp"

namespace beacon::nn {

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_entry;
  std::size_t checked = 0;
  /// Entries left out because the one-sided slopes disagree (a ReLU kink
  /// within one step of the current point).
  std::size_t kinks_skipped = 0;
  bool passed = true;
};

/// Compares each slot's analytic gradient against the central difference
/// (L(p + h) - L(p - h)) / 2h of `loss`. Relative error per entry is
/// |a - n| / max(|a|, |n|, f), where the floor f = max(1e-8, 1e4 eps max(1, |L|) / h)
/// keeps gradients below the difference quotient's rounding noise from
/// counting as relative failures. With `skip_kinks`, a failing entry whose
/// forward and backward one-sided slopes also disagree is counted in
/// kinks_skipped instead of checked.
GradcheckReport gradcheck(std::span<const ParamSlot> slots, const std::function<double()>& loss,
                          double step = 1e-4, double tolerance = 1e-3, bool skip_kinks = false);

}  // namespace beacon::nn
