#pragma once

// Run configuration, on-disk workspace layout and the end-to-end steps shared
// by the command-line tool and the acceptance suite.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "beacon/backbone.hpp"
#include "beacon/evalrun.hpp"
#include "beacon/iqgen.hpp"
#include "beacon/lbap.hpp"

namespace beacon::eval {

struct RunConfig {
  std::uint64_t seed = 1;
  iq::GenConfig dataset;
  backbone::ArchConfig arch;
  nn::TrainHyper backbone_train = default_backbone_hyper();
  bool augment = true;
  nn::TrainHyper exit_train = default_exit_hyper();
  nn::TrainHyper lbap_train = default_lbap_hyper();
  /// Table IV budgets in MACs; empty means fractions 0.4/0.6/0.8/1.0 of the full path.
  std::vector<double> budgets;
  std::vector<double> accuracy_targets{0.3, 0.4, 0.5};

  static nn::TrainHyper default_backbone_hyper();
  static nn::TrainHyper default_exit_hyper();
  static nn::TrainHyper default_lbap_hyper();

  /// Sets the master seed and every component seed.
  void apply_seed(std::uint64_t s);
  void validate() const;
};

std::string config_to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
/// CRC-32 of the canonical JSON dump.
std::uint32_t config_hash(const RunConfig& cfg);

class Workspace {
 public:
  explicit Workspace(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path dataset() const { return dir_ / "dataset.bin"; }
  std::filesystem::path backbone() const { return dir_ / "backbone.ckpt"; }
  std::filesystem::path exit_head(int exit_point) const;
  std::filesystem::path lbap(int exit_point) const;
  std::filesystem::path file(std::string_view name) const { return dir_ / std::string(name); }

 private:
  std::filesystem::path dir_;
};

iq::Dataset run_gen_data(const RunConfig& cfg);
backbone::BackboneTrainResult run_train_backbone(const RunConfig& cfg, const iq::Dataset& data,
                                                 std::function<void(const backbone::EpochLog&)> on_epoch = {});
backbone::ExitTrainResult run_train_exit(const RunConfig& cfg, const backbone::AmcModel& trained,
                                         const iq::Dataset& data, int exit_point);

std::vector<lbap::LbapSample> lbap_samples(std::span<const ExitRecord> records);
/// LBAP on train-split early-exit probabilities, early-stopped on validation BCE.
lbap::LbapTrainResult run_train_lbap(const RunConfig& cfg, const backbone::AmcModel& model,
                                     const iq::Dataset& data);

void save_backbone(const Workspace& ws, const backbone::AmcModel& model);
void save_exit_head(const Workspace& ws, const backbone::AmcModel& model);
void save_lbap(const Workspace& ws, int exit_point, const lbap::LbapModel& model);
/// Backbone plus the early-exit head trained for `exit_point`.
backbone::AmcModel load_model(const Workspace& ws, const RunConfig& cfg, int exit_point);
backbone::AmcModel load_backbone(const Workspace& ws, const RunConfig& cfg);
lbap::LbapModel load_lbap(const Workspace& ws, int exit_point);

/// Records for both evaluation splits of one exit configuration.
struct Evaluation {
  int exit_point = 1;
  backbone::CostProfile profile;
  std::vector<ExitRecord> val;
  std::vector<ExitRecord> test;
  std::optional<lbap::LbapModel> lbap;

  std::vector<double> val_scores(criteria::ScoreKind kind) const;
  std::vector<double> test_scores(criteria::ScoreKind kind) const;
  TradeoffCurve curve(criteria::ScoreKind kind) const;
  /// Criteria that can be evaluated (beacon only with an LBAP).
  std::vector<criteria::ScoreKind> kinds() const;
};

Evaluation evaluate(const backbone::AmcModel& model, const lbap::LbapModel* lbap, const iq::Dataset& data);

}  // namespace beacon::eval
