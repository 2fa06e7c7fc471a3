#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "beacon/nn/tensor.hpp"

namespace beacon::nn {

enum class OptimizerKind { sgd, adam };

std::string_view optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainHyper {
  double learning_rate = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::adam;
  double dropout_rate = 0.0;
  std::uint64_t seed = 1;
  /// Early-stopping patience in epochs; 0 disables early stopping.
  std::size_t patience = 0;

  void validate() const;
};

/// A parameter tensor paired with its gradient accumulator.
struct ParamSlot {
  std::string name;
  Tensor* value = nullptr;
  const Tensor* grad = nullptr;
};

/// p <- p - lr * g
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update; `step` is the 1-based update count.
void adam_step(std::span<double> params, std::span<const double> grads, const AdamConfig& cfg,
               AdamMoments& state, std::uint64_t step);

/// Applies sgd or adam across a fixed list of parameter slots. The slot list
/// must keep the same order and shapes between calls.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate);

  void step(std::span<const ParamSlot> slots);
  std::uint64_t steps() const { return steps_; }

 private:
  OptimizerKind kind_;
  AdamConfig adam_;
  std::vector<AdamMoments> moments_;
  std::uint64_t steps_ = 0;
};

}  // namespace beacon::nn
