#pragma once

// Compact early-exit AMC classifier: stem conv, three residual stages of two
// basic blocks each, an early-exit head after a configurable stage and a
// final-exit head after stage 3. All convolutions are temporal-only and the
// only down-sampling is the stride-2 first block of stages 2 and 3.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "beacon/iqgen.hpp"
#include "beacon/nn/checkpoint.hpp"
#include "beacon/nn/layers.hpp"
#include "beacon/nn/optim.hpp"

namespace beacon::backbone {

inline constexpr int kNumStages = 3;

struct ArchConfig {
  int exit_point = 1;
  std::array<std::size_t, kNumStages> widths{16, 32, 64};
  std::size_t stem_kernel = 7;
  std::size_t stage_kernel = 3;

  void validate() const;
  bool operator==(const ArchConfig&) const = default;
};

struct ResidualBlock {
  nn::ConvLayer conv1;
  nn::ConvLayer conv2;
  /// 1-wide projection, present when the block changes width or stride.
  std::optional<nn::ConvLayer> shortcut;
};

struct Stage {
  std::array<ResidualBlock, 2> blocks;
};

/// Parameter groups, combinable as a bitmask.
enum ParamGroup : unsigned {
  kStem = 1u,
  kStages = 2u,
  kFeHead = 4u,
  kEeHead = 8u,
  kBackbone = kStem | kStages | kFeHead,
  kAllParams = kBackbone | kEeHead,
};

/// Raw layer set. A zeroed copy doubles as the gradient accumulator.
struct Parameters {
  nn::ConvLayer stem;
  std::array<Stage, kNumStages> stages;
  nn::DenseLayer ee_head;
  nn::DenseLayer fe_head;

  Parameters zeros_like() const;
  std::vector<std::pair<std::string, nn::Tensor*>> named(unsigned groups);
  std::vector<std::pair<std::string, const nn::Tensor*>> named(unsigned groups) const;
};

class AmcModel {
 public:
  /// He-initialized model. Stream derive_seed(seed, 0) initializes the
  /// backbone and derive_seed(seed, 1) the early-exit head.
  static AmcModel create(const ArchConfig& arch, std::uint64_t seed);

  const ArchConfig& arch() const { return arch_; }
  int exit_point() const { return arch_.exit_point; }
  const Parameters& params() const { return params_; }

  /// Every call counts as a parameter write: the write counter increments and
  /// the model receives a fresh process-unique stamp, which invalidates any
  /// ExitCache taken earlier.
  Parameters& mutable_params();

  std::uint64_t version() const { return version_; }
  std::uint64_t stamp() const { return stamp_; }

  /// Copy with a different attachment point and a freshly initialized
  /// early-exit head.
  AmcModel with_exit_point(int exit_point, std::uint64_t seed) const;

  std::uint32_t checksum(unsigned groups) const;
  std::size_t parameter_count(unsigned groups) const;

  std::vector<nn::NamedTensor> export_blocks(unsigned groups) const;
  void import_blocks(std::span<const nn::NamedTensor> blocks, unsigned groups);
  void round_to_f32();

 private:
  ArchConfig arch_;
  Parameters params_;
  std::uint64_t version_ = 0;
  std::uint64_t stamp_ = 0;
};

struct ExitPair {
  ProbVector p_e{};
  std::optional<ProbVector> p_f;
  std::size_t yhat_e = 0;
  std::optional<std::size_t> yhat_f;
};

/// Activation at the attachment point, tied to the model that produced it.
struct ExitCache {
  std::uint64_t stamp = 0;
  int exit_point = 0;
  nn::Tensor features;
};

struct ExitForward {
  ExitPair pair;
  ExitCache cache;
};

/// Stem -> stages up to the exit point -> early-exit head.
ExitForward forward_to_exit(const AmcModel& model, const iq::IqMatrix& iq);
/// Continues a cached forward through the remaining stages and the final head.
/// Throws StaleCacheError when the model was written after the cache was taken.
ProbVector forward_final(const AmcModel& model, const ExitCache& cache);
/// Both exits in one pass.
ExitPair forward_full(const AmcModel& model, const iq::IqMatrix& iq);

/// Pooled attachment-point features for the early-exit head.
std::vector<double> exit_features(const AmcModel& model, const iq::IqMatrix& iq);

class StaleCacheError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class FreezeViolation : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct TrainOptions {
  bool augment = true;
  /// Keep the parameters of the epoch with the best validation accuracy.
  bool keep_best = true;
  std::function<void(const EpochLog&)> on_epoch;
};

struct BackboneTrainResult {
  AmcModel model;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

/// Trains stem, stages and the final head with cross-entropy. Parameters are
/// rounded to f32 on return so the result matches its checkpoint.
BackboneTrainResult train_backbone(std::span<const iq::LabeledFrame> train,
                                   std::span<const iq::LabeledFrame> val, const ArchConfig& arch,
                                   const nn::TrainHyper& hyper, const TrainOptions& options = {});
BackboneTrainResult train_backbone(const iq::Dataset& data, const ArchConfig& arch,
                                   const nn::TrainHyper& hyper, const TrainOptions& options = {});

struct ExitTrainResult {
  AmcModel model;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

/// Trains only the early-exit head of `model` (at model.exit_point()) on
/// pooled features of the un-augmented train split. Throws FreezeViolation if
/// any other parameter changed.
ExitTrainResult train_exit_branch(const AmcModel& model, const iq::Dataset& data,
                                  const nn::TrainHyper& hyper);

/// Final-exit cross-entropy of one frame through the whole network; gradients
/// for stem, stages and final head are accumulated into `grad`.
double fe_loss_backward(const Parameters& params, Parameters& grad, const iq::IqMatrix& iq, std::size_t label);
/// Same loss without gradients.
double fe_loss(const Parameters& params, const iq::IqMatrix& iq, std::size_t label);

double accuracy_fe(const AmcModel& model, std::span<const iq::LabeledFrame> frames);
double accuracy_ee(const AmcModel& model, std::span<const iq::LabeledFrame> frames);

std::vector<iq::LabeledFrame> gather(const iq::Dataset& data, iq::Split split);

/// MAC counts of each inference segment. Conv: out*in*k*L_out; dense:
/// out*in; biases, activations, pooling and normalization are free.
struct CostProfile {
  std::uint64_t macs_prefix = 0;
  std::uint64_t macs_ee_head = 0;
  std::uint64_t macs_suffix = 0;
  std::uint64_t macs_fe_head = 0;
  std::uint64_t macs_lbap = 0;

  /// Stem, all stages and the final head.
  std::uint64_t full_path() const { return macs_prefix + macs_suffix + macs_fe_head; }
  /// Cost paid by every sample: prefix, early head and (optionally) LBAP.
  std::uint64_t exit_path(bool uses_lbap) const {
    return macs_prefix + macs_ee_head + (uses_lbap ? macs_lbap : 0);
  }
  /// Extra cost of a forwarded sample.
  std::uint64_t continuation() const { return macs_suffix + macs_fe_head; }
};

CostProfile count_macs(const AmcModel& model, std::uint64_t lbap_macs);
std::uint64_t stage_macs(const AmcModel& model, int stage);
std::uint64_t stem_macs(const AmcModel& model);

/// exit_path + forward_fraction * continuation.
double avg_macs(const CostProfile& profile, double forward_fraction, bool uses_lbap);
/// Same quantity from integer counts: (n * exit_path + forwarded * continuation) / n,
/// a single rounding of the exact total.
double avg_macs(const CostProfile& profile, std::size_t forwarded, std::size_t total, bool uses_lbap);

/// Plain-text key=value manifest: exit point, widths, kernels, write count,
/// parameter checksums.
std::string model_manifest(const AmcModel& model);
ArchConfig parse_manifest(const std::string& text);

}  // namespace beacon::backbone
