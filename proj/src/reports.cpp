#include "beacon/reports.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace beacon::eval {
namespace {

std::string header_text(const ReportHeader& h) {
  std::ostringstream os;
  os << "# thresholds calibrated on the validation split; metrics on the test split\n";
  os << "# config_hash=" << hex32(h.config_hash) << " seed=" << h.seed << "\n";
  for (const auto& n : h.notes) os << "# " << n << "\n";
  return os.str();
}

std::string pct(double fraction) { return fmt_num(100.0 * fraction, 4); }

}  // namespace

std::string fmt_num(double v, int precision) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string column_name(criteria::ScoreKind kind) { return std::string(criteria::kind_name(kind)); }

ModelStats model_stats(int exit_point, std::span<const ExitRecord> records) {
  const auto c = count_cases(records);
  ModelStats s;
  s.exit_point = exit_point;
  s.ee_accuracy = static_cast<double>(c.ee_correct()) / static_cast<double>(c.total());
  s.fe_accuracy = static_cast<double>(c.fe_correct()) / static_cast<double>(c.total());
  s.recovery = recovery_stats(records);
  return s;
}

std::string table1_csv(std::span<const ModelStats> rows, const ReportHeader& h) {
  std::ostringstream os;
  os << header_text(h);
  os << "model,ee_acc_pct,fe_acc_pct,p_recov_pct,p_c01_given_c01_or_c00_pct\n";
  for (const auto& r : rows) {
    os << "EE-" << r.exit_point << "," << pct(r.ee_accuracy) << "," << pct(r.fe_accuracy) << ","
       << pct(r.recovery.p_recov) << "," << (r.recovery.cond_recov ? pct(*r.recovery.cond_recov) : "NA") << "\n";
  }
  return os.str();
}

std::string table2_csv(std::span<const BinRow> rows, const ReportHeader& h) {
  std::ostringstream os;
  os << header_text(h);
  os << "entropy_bin,count,samples_pct,c11_pct,c01_pct,c00_pct,c10_pct\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const bool last = i + 1 == rows.size();
    os << "\"[" << fmt_num(r.lo, 1) << "," << fmt_num(r.hi, 1) << (last ? "]" : ")") << "\"," << r.count << ","
       << fmt_num(r.samples_pct, 4) << "," << fmt_num(r.c11_pct, 4) << "," << fmt_num(r.c01_pct, 4) << ","
       << fmt_num(r.c00_pct, 4) << "," << fmt_num(r.c10_pct, 4) << "\n";
  }
  return os.str();
}

std::string tradeoff_csv(std::span<const TradeoffCurve> curves, const ReportHeader& h) {
  std::ostringstream os;
  os << header_text(h);
  os << "criterion,percentile,threshold,forwarded,total,forward_fraction,avg_macs,accuracy\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      os << criteria::kind_name(c.kind) << "," << fmt_num(p.percentile, 1) << "," << fmt_num(p.threshold, 9)
         << "," << p.forwarded << "," << p.total << "," << fmt_num(p.forward_fraction) << ","
         << fmt_num(p.avg_macs, 2) << "," << fmt_num(p.accuracy) << "\n";
    }
  }
  return os.str();
}

std::string table4_csv(std::span<const TradeoffCurve> curves, std::span<const double> budgets,
                       const ReportHeader& h) {
  std::ostringstream os;
  os << header_text(h);
  os << "# cells: maximum overall accuracy (%) over sweep points with avg MACs < B\n";
  os << "budget_macs";
  for (const auto& c : curves) os << "," << column_name(c.kind);
  os << "\n";
  for (double b : budgets) {
    os << fmt_num(b, 0);
    for (const auto& c : curves) {
      const auto p = max_acc_under_budget(c, b);
      os << "," << (p ? pct(p->accuracy) : "NA");
    }
    os << "\n";
  }
  return os.str();
}

std::string table5_csv(std::span<const TradeoffCurve> curves, std::span<const double> targets,
                       const ReportHeader& h) {
  std::ostringstream os;
  os << header_text(h);
  os << "# cells: minimum avg MACs over sweep points with accuracy >= target; ratio relative to beacon\n";
  const TradeoffCurve* ref = nullptr;
  for (const auto& c : curves)
    if (c.kind == criteria::ScoreKind::beacon) ref = &c;
  os << "accuracy_target";
  for (const auto& c : curves) os << "," << column_name(c.kind) << "_macs," << column_name(c.kind) << "_ratio";
  os << "\n";
  for (double t : targets) {
    os << fmt_num(t, 4);
    const auto base = ref ? min_macs_for_accuracy(*ref, t) : std::nullopt;
    for (const auto& c : curves) {
      const auto p = min_macs_for_accuracy(c, t);
      os << "," << (p ? fmt_num(p->avg_macs, 2) : "NA") << ",";
      os << (p && base ? fmt_num(p->avg_macs / base->avg_macs, 2) : "NA");
    }
    os << "\n";
  }
  return os.str();
}

std::string table7_csv(std::span<const CalibrationRow> rows, const ReportHeader& h) {
  std::ostringstream os;
  os << header_text(h);
  os << "model,avg_predicted_prob,true_recoverable_ratio,abs_gap\n";
  for (const auto& r : rows) {
    os << "EE-" << r.exit_point << "," << fmt_num(r.calibration.avg_predicted, 4) << ","
       << fmt_num(r.calibration.true_ratio, 4) << "," << fmt_num(r.calibration.abs_gap, 4) << "\n";
  }
  return os.str();
}

std::string invocation_csv(std::span<const InvocationSeries> series, double p_recov, const ReportHeader& h) {
  std::ostringstream os;
  os << header_text(h);
  os << "# random-selection baseline: p_recov=" << fmt_num(p_recov) << "\n";
  os << "criterion,invocation_rate,forwarded,recoverable_rate,accuracy,avg_macs\n";
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      os << criteria::kind_name(s.kind) << "," << fmt_num(p.rate, 1) << "," << p.forwarded << ","
         << fmt_num(p.recoverable_rate) << "," << fmt_num(p.accuracy) << "," << fmt_num(p.avg_macs, 2) << "\n";
    }
  }
  return os.str();
}

std::string snr_csv(std::span<const BandCurve> bands, const ReportHeader& h) {
  std::ostringstream os;
  os << header_text(h);
  os << "criterion,band,samples,percentile,threshold,forward_fraction,avg_macs,accuracy\n";
  for (const auto& b : bands) {
    for (const auto& p : b.curve.points) {
      os << criteria::kind_name(b.curve.kind) << "," << band_name(b.band) << "," << b.samples << ","
         << fmt_num(p.percentile, 1) << "," << fmt_num(p.threshold, 9) << "," << fmt_num(p.forward_fraction) << ","
         << fmt_num(p.avg_macs, 2) << "," << fmt_num(p.accuracy) << "\n";
    }
  }
  return os.str();
}

std::string score_dump_csv(std::span<const ExitRecord> records, criteria::ScoreKind kind,
                           std::span<const double> scores, const ReportHeader& h) {
  if (records.size() != scores.size()) throw DimensionError("score dump: records and scores differ in length");
  std::ostringstream os;
  os << header_text(h);
  os << "sample_id,split,snr_db,label,yhat_e,yhat_f,score_kind,score\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    os << r.sample_id << "," << iq::split_name(r.split) << "," << r.snr_db << "," << r.label << "," << r.yhat_e
       << "," << r.yhat_f << "," << criteria::kind_name(kind) << "," << fmt_num(scores[i], 9) << "\n";
  }
  return os.str();
}

}  // namespace beacon::eval
