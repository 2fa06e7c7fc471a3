#pragma once

// Lightweight benefit-aware predictor: a 10 -> 64 -> 32 -> 1 MLP on the
// early-exit probability vector whose sigmoid output estimates the
// probability that deeper inference turns a wrong early prediction into a
// correct final one.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "beacon/common.hpp"
#include "beacon/nn/checkpoint.hpp"
#include "beacon/nn/layers.hpp"
#include "beacon/nn/optim.hpp"

namespace beacon::lbap {

inline constexpr std::size_t kHidden1 = 64;
inline constexpr std::size_t kHidden2 = 32;
inline constexpr std::uint64_t kCanonicalMacs = 2720;
inline constexpr std::uint64_t kCanonicalParams = 2817;
inline constexpr double kDefaultDropout = 0.2;

struct LbapModel {
  nn::DenseLayer dense1;
  nn::DenseLayer dense2;
  nn::DenseLayer dense3;
  double dropout_rate = kDefaultDropout;
  bool trained = false;

  static LbapModel create(std::uint64_t seed, double dropout_rate = kDefaultDropout,
                          std::size_t in = kNumClasses, std::size_t h1 = kHidden1,
                          std::size_t h2 = kHidden2);
  static LbapModel zeros(double dropout_rate = kDefaultDropout);

  std::vector<std::pair<std::string, nn::Tensor*>> named();
  std::vector<std::pair<std::string, const nn::Tensor*>> named() const;
  LbapModel zeros_like() const;

  /// Blocks lbap.dense{1,2,3}.{weight,bias}.
  std::vector<nn::NamedTensor> export_blocks() const;
  /// Loads weights and marks the model trained.
  void import_blocks(std::span<const nn::NamedTensor> blocks);
  std::uint32_t checksum() const;
};

/// 1 iff the early prediction is wrong and the final prediction is right.
int recoverability_label(std::size_t yhat_e, std::size_t yhat_f, std::size_t y);

/// Activations kept for backprop.
struct LbapTrace {
  std::vector<double> input;
  std::vector<double> h1;
  std::vector<double> h2;
  std::vector<double> mask1;
  std::vector<double> mask2;
  double logit = 0.0;
  double score = 0.0;
};

/// dense -> ReLU -> dropout -> dense -> ReLU -> dropout -> dense -> sigmoid.
/// Dropout applies only when `training` is set; `rng` is then required.
double lbap_forward(const LbapModel& model, std::span<const double> p_e, bool training = false,
                    Rng* rng = nullptr);
LbapTrace lbap_forward_trace(const LbapModel& model, std::span<const double> p_e, bool training, Rng* rng);
/// Accumulates parameter gradients for dL/dlogit = grad_logit into `grads`.
void lbap_backward(const LbapModel& model, const LbapTrace& trace, double grad_logit, LbapModel& grads);

struct LbapSample {
  ProbVector p_e{};
  int label = 0;
};

struct LbapEpoch {
  std::size_t epoch = 0;
  double train_bce = 0.0;
  double val_bce = 0.0;
};

struct LbapTrainResult {
  LbapModel model;
  std::vector<LbapEpoch> log;
  std::size_t best_epoch = 0;
  double best_val_bce = 0.0;
  /// All training labels equal; training still ran.
  bool degenerate_labels = false;
};

/// Mean-BCE training with early stopping on validation BCE (hyper.patience).
/// The best-validation parameters are returned, rounded to f32.
LbapTrainResult train_lbap(std::span<const LbapSample> train, std::span<const LbapSample> val,
                           const nn::TrainHyper& hyper);

double mean_bce(const LbapModel& model, std::span<const LbapSample> samples);

struct Overhead {
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
  /// False when the layer shapes differ from 10 -> 64 -> 32 -> 1.
  bool canonical = true;
};

Overhead lbap_overhead(const LbapModel& model);

struct Calibration {
  double avg_predicted = 0.0;
  double true_ratio = 0.0;
  double abs_gap = 0.0;
};

Calibration calibration_report(std::span<const double> scores, std::span<const int> labels);

}  // namespace beacon::lbap
