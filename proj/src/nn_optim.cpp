#include <cmath>
#include <limits>

#include "beacon/common.hpp"
#include "beacon/nn/checkpoint.hpp"
#include "beacon/nn/gradcheck.hpp"
#include "beacon/nn/optim.hpp"

namespace beacon::nn {

std::string_view optimizer_name(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw UsageError("unknown optimizer: " + std::string(name));
}

void TrainHyper::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw PreconditionError("learning rate must be positive");
  if (epochs == 0) throw PreconditionError("epochs must be positive");
  if (batch_size == 0) throw PreconditionError("batch size must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw PreconditionError("dropout rate must be in [0, 1)");
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) throw DimensionError("sgd: parameter/gradient size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

void adam_step(std::span<double> params, std::span<const double> grads, const AdamConfig& cfg,
               AdamMoments& state, std::uint64_t step) {
  if (params.size() != grads.size()) throw DimensionError("adam: parameter/gradient size mismatch");
  if (step == 0) throw PreconditionError("adam: step count is 1-based");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw DimensionError("adam: moment size mismatch");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind) {
  adam_.lr = learning_rate;
}

void Optimizer::step(std::span<const ParamSlot> slots) {
  if (moments_.empty()) moments_.resize(slots.size());
  if (moments_.size() != slots.size()) throw DimensionError("optimizer: parameter list changed");
  ++steps_;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    if (!s.value->same_shape(*s.grad)) throw DimensionError("optimizer: shape mismatch for " + s.name);
    if (kind_ == OptimizerKind::sgd) {
      sgd_step(s.value->data(), s.grad->data(), adam_.lr);
    } else {
      adam_step(s.value->data(), s.grad->data(), adam_, moments_[i], steps_);
    }
  }
}

GradcheckReport gradcheck(std::span<const ParamSlot> slots, const std::function<double()>& loss,
                          double step, double tolerance, bool skip_kinks) {
  GradcheckReport report;
  const double base = loss();
  // Below this magnitude the central difference is dominated by rounding of the loss.
  const double floor =
      std::max(1e-8, 1e4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(base)) / step);
  for (const auto& s : slots) {
    if (!s.value->same_shape(*s.grad)) throw DimensionError("gradcheck: shape mismatch for " + s.name);
    auto values = s.value->data();
    const auto analytic = s.grad->data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss();
      values[i] = saved - step;
      const double down = loss();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      if (skip_kinks && rel > tolerance) {
        const double fwd = (up - base) / step;
        const double bwd = (base - down) / step;
        if (std::abs(fwd - bwd) > tolerance * std::max({std::abs(fwd), std::abs(bwd), 1e-8})) {
          ++report.kinks_skipped;
          continue;
        }
      }
      ++report.checked;
      if (rel > report.max_rel_error || !std::isfinite(rel)) {
        report.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
        report.worst_entry = s.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace beacon::nn
