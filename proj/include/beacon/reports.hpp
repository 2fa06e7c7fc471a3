#pragma once

// CSV emitters for every analysis and the JSON run manifest. All tables start
// with '#' comment lines naming the calibration/evaluation splits, the config
// hash and the seed.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beacon/evalrun.hpp"
#include "beacon/lbap.hpp"

namespace beacon::eval {

struct ReportHeader {
  std::uint32_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> notes;
};

/// Fixed-precision decimal; infinities print as inf / -inf.
std::string fmt_num(double v, int precision = 6);

struct ModelStats {
  int exit_point = 1;
  double ee_accuracy = 0.0;
  double fe_accuracy = 0.0;
  RecoveryStats recovery;
};

ModelStats model_stats(int exit_point, std::span<const ExitRecord> records);

std::string table1_csv(std::span<const ModelStats> rows, const ReportHeader& h);
std::string table2_csv(std::span<const BinRow> rows, const ReportHeader& h);
std::string tradeoff_csv(std::span<const TradeoffCurve> curves, const ReportHeader& h);
std::string table4_csv(std::span<const TradeoffCurve> curves, std::span<const double> budgets,
                       const ReportHeader& h);
std::string table5_csv(std::span<const TradeoffCurve> curves, std::span<const double> targets,
                       const ReportHeader& h);

struct CalibrationRow {
  int exit_point = 1;
  lbap::Calibration calibration;
};

std::string table7_csv(std::span<const CalibrationRow> rows, const ReportHeader& h);

struct InvocationSeries {
  criteria::ScoreKind kind = criteria::ScoreKind::entropy;
  std::vector<InvocationPoint> points;
};

std::string invocation_csv(std::span<const InvocationSeries> series, double p_recov, const ReportHeader& h);
std::string snr_csv(std::span<const BandCurve> bands, const ReportHeader& h);
std::string score_dump_csv(std::span<const ExitRecord> records, criteria::ScoreKind kind,
                           std::span<const double> scores, const ReportHeader& h);

/// Column name used for a criterion in the wide tables.
std::string column_name(criteria::ScoreKind kind);

}  // namespace beacon::eval
