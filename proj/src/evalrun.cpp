#include "beacon/evalrun.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace beacon::eval {
namespace {

double pct(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

void check_aligned(std::span<const ExitRecord> records, std::size_t n, const char* what) {
  if (records.size() != n) throw DimensionError(std::string(what) + ": records and scores differ in length");
}

// ceil(rate * n / 100), exact for integral rates.
std::size_t count_for_rate(double rate, std::size_t n) {
  if (!(rate >= 0.0 && rate <= 100.0)) throw PreconditionError("rate outside [0,100]");
  if (rate == std::floor(rate)) return (static_cast<std::size_t>(rate) * n + 99) / 100;
  return std::min(n, static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n) / 100.0)));
}

}  // namespace

std::string_view case_name(CaseLabel c) {
  switch (c) {
    case CaseLabel::c11: return "C11";
    case CaseLabel::c01: return "C01";
    case CaseLabel::c00: return "C00";
    case CaseLabel::c10: return "C10";
  }
  return "?";
}

CaseLabel classify_case(std::size_t yhat_e, std::size_t yhat_f, std::size_t y) {
  const bool e = yhat_e == y;
  const bool f = yhat_f == y;
  if (e) return f ? CaseLabel::c11 : CaseLabel::c10;
  return f ? CaseLabel::c01 : CaseLabel::c00;
}

ExitRecord make_record(std::size_t sample_id, int snr_db, std::size_t label, const ProbVector& p_e,
                       std::size_t yhat_f, iq::Split split) {
  ExitRecord r;
  r.sample_id = sample_id;
  r.split = split;
  r.snr_db = snr_db;
  r.label = label;
  r.p_e = p_e;
  r.yhat_e = argmax(p_e);
  r.yhat_f = yhat_f;
  r.case_label = classify_case(r.yhat_e, r.yhat_f, label);
  return r;
}

std::vector<ExitRecord> collect_records(const backbone::AmcModel& model, const iq::Dataset& data,
                                        iq::Split split) {
  std::vector<ExitRecord> out;
  for (std::size_t i : data.indices(split)) {
    const auto& f = data.frames[i];
    const auto pair = backbone::forward_full(model, f.iq);
    out.push_back(make_record(i, f.snr_db, iq::class_index(f.label), pair.p_e, *pair.yhat_f, split));
  }
  return out;
}

std::vector<ProbVector> early_probs(std::span<const ExitRecord> records) {
  std::vector<ProbVector> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.p_e);
  return out;
}

CaseCounts count_cases(std::span<const ExitRecord> records) {
  CaseCounts c;
  for (const auto& r : records) {
    switch (r.case_label) {
      case CaseLabel::c11: ++c.c11; break;
      case CaseLabel::c01: ++c.c01; break;
      case CaseLabel::c00: ++c.c00; break;
      case CaseLabel::c10: ++c.c10; break;
    }
  }
  return c;
}

std::size_t entropy_bin(double entropy) {
  if (!(entropy >= 0.0)) return 0;
  return std::min(kEntropyBins - 1, static_cast<std::size_t>(entropy * static_cast<double>(kEntropyBins)));
}

std::vector<BinRow> entropy_bin_table(std::span<const ExitRecord> records) {
  if (records.empty()) throw PreconditionError("entropy_bin_table: empty evaluation set");
  std::array<CaseCounts, kEntropyBins> bins{};
  for (const auto& r : records) {
    auto& b = bins[entropy_bin(criteria::score_entropy(r.p_e))];
    switch (r.case_label) {
      case CaseLabel::c11: ++b.c11; break;
      case CaseLabel::c01: ++b.c01; break;
      case CaseLabel::c00: ++b.c00; break;
      case CaseLabel::c10: ++b.c10; break;
    }
  }
  std::vector<BinRow> rows;
  for (std::size_t i = 0; i < kEntropyBins; ++i) {
    const auto& b = bins[i];
    BinRow row;
    row.lo = static_cast<double>(i) / kEntropyBins;
    row.hi = static_cast<double>(i + 1) / kEntropyBins;
    row.count = b.total();
    row.samples_pct = pct(row.count, records.size());
    row.c11_pct = pct(b.c11, row.count);
    row.c01_pct = pct(b.c01, row.count);
    row.c00_pct = pct(b.c00, row.count);
    row.c10_pct = pct(b.c10, row.count);
    rows.push_back(row);
  }
  return rows;
}

RecoveryStats recovery_stats(std::span<const ExitRecord> records) {
  if (records.empty()) throw PreconditionError("recovery_stats: empty evaluation set");
  const auto c = count_cases(records);
  RecoveryStats s;
  s.p_recov = static_cast<double>(c.c01) / static_cast<double>(c.total());
  if (c.c01 + c.c00 > 0) s.cond_recov = static_cast<double>(c.c01) / static_cast<double>(c.c01 + c.c00);
  return s;
}

std::vector<double> sweep_percentiles() {
  std::vector<double> q;
  for (int i = 0; i <= 100; i += 5) q.push_back(i);
  return q;
}

TradeoffPoint evaluate_decisions(std::span<const ExitRecord> records, std::span<const criteria::Decision> decisions,
                                 const backbone::CostProfile& profile, bool uses_lbap) {
  check_aligned(records, decisions.size(), "evaluate_decisions");
  if (records.empty()) throw PreconditionError("evaluate_decisions: empty evaluation set");
  TradeoffPoint p;
  p.total = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (decisions[i] == criteria::Decision::forward) {
      ++p.forwarded;
      p.correct += records[i].fe_correct();
    } else {
      p.correct += records[i].ee_correct();
    }
  }
  p.forward_fraction = static_cast<double>(p.forwarded) / static_cast<double>(p.total);
  p.accuracy = static_cast<double>(p.correct) / static_cast<double>(p.total);
  p.avg_macs = backbone::avg_macs(profile, p.forwarded, p.total, uses_lbap);
  return p;
}

TradeoffCurve sweep_tradeoff(criteria::ScoreKind kind, std::span<const double> val_scores,
                             std::span<const ExitRecord> eval, std::span<const double> eval_scores,
                             const backbone::CostProfile& profile) {
  check_aligned(eval, eval_scores.size(), "sweep_tradeoff");
  TradeoffCurve curve;
  curve.kind = kind;
  curve.uses_lbap = kind == criteria::ScoreKind::beacon;
  for (double q : sweep_percentiles()) {
    const auto t = criteria::percentile_threshold(val_scores, q, kind);
    auto p = evaluate_decisions(eval, decide_all(eval_scores, t), profile, curve.uses_lbap);
    p.percentile = q;
    p.threshold = t.value;
    curve.points.push_back(p);
  }
  return curve;
}

TradeoffCurve sweep_tradeoff(criteria::ScoreKind kind, const lbap::LbapModel* lbap,
                             std::span<const ExitRecord> val, std::span<const ExitRecord> eval,
                             const backbone::CostProfile& profile) {
  if (kind == criteria::ScoreKind::beacon && (lbap == nullptr || !lbap->trained))
    throw PreconditionError("beacon sweep needs a trained LBAP");
  const auto vs = criteria::score_all(kind, early_probs(val), lbap);
  const auto es = criteria::score_all(kind, early_probs(eval), lbap);
  return sweep_tradeoff(kind, vs, eval, es, profile);
}

std::vector<criteria::Decision> decide_all(std::span<const double> scores, const criteria::Threshold& t) {
  std::vector<criteria::Decision> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(criteria::decide(s, t));
  return out;
}

std::vector<std::uint64_t> simulate_path_macs(std::span<const criteria::Decision> decisions,
                                              const backbone::CostProfile& profile, bool uses_lbap) {
  std::vector<std::uint64_t> out;
  out.reserve(decisions.size());
  for (auto d : decisions) {
    std::uint64_t m = profile.macs_prefix;
    m += profile.macs_ee_head;
    if (uses_lbap) m += profile.macs_lbap;
    if (d == criteria::Decision::forward) {
      m += profile.macs_suffix;
      m += profile.macs_fe_head;
    }
    out.push_back(m);
  }
  return out;
}

double mean_macs(std::span<const std::uint64_t> per_sample) {
  if (per_sample.empty()) throw PreconditionError("mean_macs: empty trace");
  const std::uint64_t sum = std::accumulate(per_sample.begin(), per_sample.end(), std::uint64_t{0});
  return static_cast<double>(sum) / static_cast<double>(per_sample.size());
}

std::optional<TradeoffPoint> max_acc_under_budget(const TradeoffCurve& curve, double budget) {
  std::optional<TradeoffPoint> best;
  for (const auto& p : curve.points) {
    if (!(p.avg_macs < budget)) continue;
    if (!best || p.accuracy > best->accuracy || (p.accuracy == best->accuracy && p.avg_macs < best->avg_macs))
      best = p;
  }
  return best;
}

std::optional<TradeoffPoint> min_macs_for_accuracy(const TradeoffCurve& curve, double required) {
  std::optional<TradeoffPoint> best;
  for (const auto& p : curve.points) {
    if (!(p.accuracy >= required)) continue;
    if (!best || p.avg_macs < best->avg_macs || (p.avg_macs == best->avg_macs && p.accuracy > best->accuracy))
      best = p;
  }
  return best;
}

std::vector<std::size_t> forward_order(std::span<const ExitRecord> records, std::span<const double> scores) {
  check_aligned(records, scores.size(), "forward_order");
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return records[a].sample_id < records[b].sample_id;
  });
  return idx;
}

InvocationPoint invoke_top(std::span<const ExitRecord> records, std::span<const double> scores, double rate,
                           const backbone::CostProfile& profile, bool uses_lbap) {
  if (records.empty()) throw PreconditionError("invocation analysis: empty evaluation set");
  const auto order = forward_order(records, scores);
  const std::size_t m = count_for_rate(rate, records.size());
  std::vector<criteria::Decision> decisions(records.size(), criteria::Decision::exit);
  std::size_t recoverable = 0;
  for (std::size_t j = 0; j < m; ++j) {
    decisions[order[j]] = criteria::Decision::forward;
    recoverable += records[order[j]].case_label == CaseLabel::c01;
  }
  const auto p = evaluate_decisions(records, decisions, profile, uses_lbap);
  InvocationPoint out;
  out.rate = rate;
  out.forwarded = m;
  out.recoverable_rate = m == 0 ? 0.0 : static_cast<double>(recoverable) / static_cast<double>(m);
  out.accuracy = p.accuracy;
  out.avg_macs = p.avg_macs;
  return out;
}

std::vector<double> invocation_rates() {
  std::vector<double> r;
  for (int i = 5; i <= 100; i += 5) r.push_back(i);
  return r;
}

std::vector<InvocationPoint> invocation_analysis(std::span<const ExitRecord> records,
                                                 std::span<const double> scores,
                                                 const backbone::CostProfile& profile, bool uses_lbap,
                                                 std::span<const double> rates) {
  const auto defaults = invocation_rates();
  if (rates.empty()) rates = defaults;
  std::vector<InvocationPoint> out;
  for (double r : rates) out.push_back(invoke_top(records, scores, r, profile, uses_lbap));
  return out;
}

std::vector<double> oracle_scores(std::span<const ExitRecord> records) {
  std::vector<double> s;
  for (const auto& r : records) s.push_back(r.case_label == CaseLabel::c01 ? 1.0 : 0.0);
  return s;
}

std::vector<double> signed_benefit_scores(std::span<const ExitRecord> records) {
  std::vector<double> s;
  for (const auto& r : records) {
    s.push_back(r.case_label == CaseLabel::c01 ? 1.0 : r.case_label == CaseLabel::c10 ? -1.0 : 0.0);
  }
  return s;
}

double oracle_accuracy(std::span<const ExitRecord> records, std::size_t forwarded) {
  if (records.empty()) throw PreconditionError("oracle_accuracy: empty evaluation set");
  if (forwarded > records.size()) throw PreconditionError("oracle_accuracy: forwarded count exceeds set");
  const auto c = count_cases(records);
  // Forward every C01 first, then the neutral cases, and C10 only when forced.
  const std::size_t gain = std::min(forwarded, c.c01);
  const std::size_t neutral = c.c11 + c.c00;
  const std::size_t loss = forwarded > c.c01 + neutral ? forwarded - c.c01 - neutral : 0;
  return static_cast<double>(c.ee_correct() + gain - loss) / static_cast<double>(records.size());
}

std::string_view band_name(SnrBand b) {
  switch (b) {
    case SnrBand::high: return "high";
    case SnrBand::medium: return "medium";
    case SnrBand::low: return "low";
    case SnrBand::very_low: return "very_low";
  }
  return "?";
}

std::optional<SnrBand> band_of(int snr_db) {
  if (snr_db >= 10 && snr_db <= 20) return SnrBand::high;
  if (snr_db >= 0 && snr_db < 10) return SnrBand::medium;
  if (snr_db >= -10 && snr_db < 0) return SnrBand::low;
  if (snr_db >= -20 && snr_db < -10) return SnrBand::very_low;
  return std::nullopt;
}

std::vector<BandCurve> snr_grouped_tradeoff(criteria::ScoreKind kind, std::span<const double> val_scores,
                                            std::span<const ExitRecord> eval,
                                            std::span<const double> eval_scores,
                                            const backbone::CostProfile& profile,
                                            std::span<const SnrBand> bands) {
  check_aligned(eval, eval_scores.size(), "snr_grouped_tradeoff");
  for (const auto& r : eval)
    if (!band_of(r.snr_db))
      throw PreconditionError("snr_grouped_tradeoff: SNR " + std::to_string(r.snr_db) + " dB lies outside every band");

  std::vector<criteria::Threshold> thresholds;
  for (double q : sweep_percentiles()) thresholds.push_back(criteria::percentile_threshold(val_scores, q, kind));

  std::vector<BandCurve> out;
  for (SnrBand band : bands) {
    std::vector<ExitRecord> sub;
    std::vector<double> sub_scores;
    for (std::size_t i = 0; i < eval.size(); ++i) {
      if (band_of(eval[i].snr_db) == band) {
        sub.push_back(eval[i]);
        sub_scores.push_back(eval_scores[i]);
      }
    }
    if (sub.empty()) throw PreconditionError("snr_grouped_tradeoff: empty band " + std::string(band_name(band)));
    BandCurve bc;
    bc.band = band;
    bc.samples = sub.size();
    bc.curve.kind = kind;
    bc.curve.uses_lbap = kind == criteria::ScoreKind::beacon;
    for (const auto& t : thresholds) {
      auto p = evaluate_decisions(sub, decide_all(sub_scores, t), profile, bc.curve.uses_lbap);
      p.percentile = t.percentile;
      p.threshold = t.value;
      bc.curve.points.push_back(p);
    }
    out.push_back(std::move(bc));
  }
  return out;
}

}  // namespace beacon::eval
