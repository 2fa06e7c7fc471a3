#pragma once

// Evaluation engine: four-case taxonomy, entropy bins, trade-off sweeps,
// budget queries, invocation analysis and SNR-band curves. Everything works
// on ExitRecords (both exits evaluated for every sample) plus a per-sample
// score vector, so the criteria are interchangeable.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "beacon/backbone.hpp"
#include "beacon/criteria.hpp"
#include "beacon/iqgen.hpp"
#include "beacon/lbap.hpp"

namespace beacon::eval {

enum class CaseLabel : std::uint8_t { c11, c01, c00, c10 };

std::string_view case_name(CaseLabel c);
/// First digit: early exit correct; second digit: final exit correct.
CaseLabel classify_case(std::size_t yhat_e, std::size_t yhat_f, std::size_t y);

struct ExitRecord {
  std::size_t sample_id = 0;
  iq::Split split = iq::Split::test;
  int snr_db = 0;
  std::size_t label = 0;
  ProbVector p_e{};
  std::size_t yhat_e = 0;
  std::size_t yhat_f = 0;
  CaseLabel case_label = CaseLabel::c11;

  bool ee_correct() const { return yhat_e == label; }
  bool fe_correct() const { return yhat_f == label; }
};

/// Record built from already-known predictions; yhat_e is argmax(p_e).
ExitRecord make_record(std::size_t sample_id, int snr_db, std::size_t label, const ProbVector& p_e,
                       std::size_t yhat_f, iq::Split split = iq::Split::test);

/// Full forward over every frame of `split`, in canonical order. sample_id is
/// the frame index in the dataset.
std::vector<ExitRecord> collect_records(const backbone::AmcModel& model, const iq::Dataset& data,
                                        iq::Split split);

std::vector<ProbVector> early_probs(std::span<const ExitRecord> records);

struct CaseCounts {
  std::size_t c11 = 0;
  std::size_t c01 = 0;
  std::size_t c00 = 0;
  std::size_t c10 = 0;

  std::size_t total() const { return c11 + c01 + c00 + c10; }
  std::size_t ee_correct() const { return c11 + c10; }
  std::size_t fe_correct() const { return c11 + c01; }
};

CaseCounts count_cases(std::span<const ExitRecord> records);

struct BinRow {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double samples_pct = 0.0;
  double c11_pct = 0.0;
  double c01_pct = 0.0;
  double c00_pct = 0.0;
  double c10_pct = 0.0;
};

inline constexpr std::size_t kEntropyBins = 10;

/// Ten entropy bins of width 0.1, the last one closed. Case percentages are
/// relative to the bin, samples_pct to the whole set; empty bins report zeros.
std::vector<BinRow> entropy_bin_table(std::span<const ExitRecord> records);
std::size_t entropy_bin(double entropy);

struct RecoveryStats {
  double p_recov = 0.0;
  /// |C01| / (|C01| + |C00|); absent when there are no early errors of either kind.
  std::optional<double> cond_recov;
};

RecoveryStats recovery_stats(std::span<const ExitRecord> records);

struct TradeoffPoint {
  double percentile = 0.0;
  double threshold = 0.0;
  std::size_t forwarded = 0;
  std::size_t total = 0;
  std::size_t correct = 0;
  double forward_fraction = 0.0;
  double avg_macs = 0.0;
  double accuracy = 0.0;
};

struct TradeoffCurve {
  criteria::ScoreKind kind = criteria::ScoreKind::entropy;
  bool uses_lbap = false;
  std::vector<TradeoffPoint> points;
};

/// q = 0, 5, ..., 100.
std::vector<double> sweep_percentiles();

std::vector<criteria::Decision> decide_all(std::span<const double> scores, const criteria::Threshold& t);

/// Hybrid outcome: early prediction for exited samples, final prediction for
/// forwarded ones. percentile and threshold are left at zero.
TradeoffPoint evaluate_decisions(std::span<const ExitRecord> records,
                                 std::span<const criteria::Decision> decisions,
                                 const backbone::CostProfile& profile, bool uses_lbap);

/// Thresholds come from `val_scores`; decisions are applied to `eval` with
/// `eval_scores`. LBAP MACs are charged only for the beacon criterion.
TradeoffCurve sweep_tradeoff(criteria::ScoreKind kind, std::span<const double> val_scores,
                             std::span<const ExitRecord> eval, std::span<const double> eval_scores,
                             const backbone::CostProfile& profile);

/// Scores both splits with `kind` and sweeps. Throws PreconditionError for
/// beacon without a trained LBAP.
TradeoffCurve sweep_tradeoff(criteria::ScoreKind kind, const lbap::LbapModel* lbap,
                             std::span<const ExitRecord> val, std::span<const ExitRecord> eval,
                             const backbone::CostProfile& profile);

/// Every sample's MACs, obtained by walking the executed segments.
std::vector<std::uint64_t> simulate_path_macs(std::span<const criteria::Decision> decisions,
                                              const backbone::CostProfile& profile, bool uses_lbap);
double mean_macs(std::span<const std::uint64_t> per_sample);

/// Best accuracy among points with avg_macs < budget (ties: cheaper point).
std::optional<TradeoffPoint> max_acc_under_budget(const TradeoffCurve& curve, double budget);
/// Cheapest point with accuracy >= required (ties: more accurate point).
std::optional<TradeoffPoint> min_macs_for_accuracy(const TradeoffCurve& curve, double required);

/// Indices ordered by descending score, ties by ascending sample id.
std::vector<std::size_t> forward_order(std::span<const ExitRecord> records, std::span<const double> scores);

struct InvocationPoint {
  double rate = 0.0;
  std::size_t forwarded = 0;
  double recoverable_rate = 0.0;
  double accuracy = 0.0;
  double avg_macs = 0.0;
};

/// Forwards exactly ceil(rate n / 100) samples chosen by forward_order.
InvocationPoint invoke_top(std::span<const ExitRecord> records, std::span<const double> scores,
                           double rate, const backbone::CostProfile& profile, bool uses_lbap);
/// Rates 5, 10, ..., 100 unless given.
std::vector<InvocationPoint> invocation_analysis(std::span<const ExitRecord> records,
                                                 std::span<const double> scores,
                                                 const backbone::CostProfile& profile, bool uses_lbap,
                                                 std::span<const double> rates = {});
std::vector<double> invocation_rates();

/// 1 for C01, else 0.
std::vector<double> oracle_scores(std::span<const ExitRecord> records);
/// +1 for C01, -1 for C10, 0 otherwise. Forwarding in this order maximizes
/// accuracy for every forwarded count.
std::vector<double> signed_benefit_scores(std::span<const ExitRecord> records);
/// Best achievable accuracy when exactly `forwarded` samples reach the final exit.
double oracle_accuracy(std::span<const ExitRecord> records, std::size_t forwarded);

enum class SnrBand : std::uint8_t { high, medium, low, very_low };

inline constexpr std::array<SnrBand, 4> kAllBands = {SnrBand::high, SnrBand::medium, SnrBand::low,
                                                     SnrBand::very_low};

std::string_view band_name(SnrBand b);
/// high [10,20], medium [0,10), low [-10,0), very_low [-20,-10); absent otherwise.
std::optional<SnrBand> band_of(int snr_db);

struct BandCurve {
  SnrBand band = SnrBand::high;
  std::size_t samples = 0;
  TradeoffCurve curve;
};

/// Global validation thresholds, per-band metrics. Throws PreconditionError
/// for an empty band or a sample outside every band.
std::vector<BandCurve> snr_grouped_tradeoff(criteria::ScoreKind kind, std::span<const double> val_scores,
                                            std::span<const ExitRecord> eval,
                                            std::span<const double> eval_scores,
                                            const backbone::CostProfile& profile,
                                            std::span<const SnrBand> bands = kAllBands);

}  // namespace beacon::eval
