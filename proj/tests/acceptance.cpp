// Acceptance run: criteria 1-12 on the desk-scale configuration. Prints one
// PASS/FAIL line per criterion and exits nonzero if any fails. An optional
// argument names a directory that receives the desk-run reports.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "beacon/binary_io.hpp"
#include "beacon/gradcheck_suite.hpp"
#include "beacon/pipeline.hpp"
#include "beacon/reports.hpp"

using namespace beacon;
using namespace beacon::eval;
using criteria::ScoreKind;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::map<int, Outcome> results;
const auto t_start = std::chrono::steady_clock::now();

double elapsed() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
}

void report(int n, const char* title) {
  auto& o = results[n];
  std::printf("criterion %2d: %s  %s: %s  (t=%.0fs)\n", n, o.pass ? "PASS" : "FAIL", title, o.detail.str().c_str(),
              elapsed());
  std::fflush(stdout);
}

ProbVector dirichlet(Rng& rng, double alpha) {
  std::gamma_distribution<double> g(alpha, 1.0);
  ProbVector p{};
  double s = 0.0;
  for (auto& v : p) s += (v = g(rng));
  if (!(s > 0.0)) {
    p.fill(0.0);
    p[uniform_index(rng, kNumClasses)] = 1.0;
    return p;
  }
  for (auto& v : p) v /= s;
  return p;
}

void criterion_1() {
  auto& o = results[1];
  const auto ov = lbap::lbap_overhead(lbap::LbapModel::create(1));
  o.detail << "macs=" << ov.macs << " params=" << ov.params;
  o.require(ov.macs == 2720 && ov.params == 2817 && ov.canonical, "overhead (2720, 2817)");
  report(1, "LBAP overhead exactness");
}

void criterion_2() {
  auto& o = results[2];
  Rng rng(derive_seed(2024, 2));
  auto lb = lbap::LbapModel::create(7);
  lb.trained = true;
  const std::array<double, 4> alphas = {0.05, 0.3, 1.0, 5.0};
  std::size_t out_of_range = 0;
  for (std::size_t i = 0; i < 100000; ++i) {
    const auto p = dirichlet(rng, alphas[i % alphas.size()]);
    for (auto k : criteria::kAllKinds) {
      const double s = criteria::score(k, p, &lb);
      const auto r = criteria::score_range(k);
      const bool ok = k == ScoreKind::beacon ? (s > 0.0 && s < 1.0) : (s >= r.lo - 1e-12 && s <= r.hi + 1e-12);
      out_of_range += !ok;
    }
  }
  ProbVector one{};
  one[3] = 1.0;
  ProbVector uni{};
  uni.fill(0.1);
  const std::map<ScoreKind, std::pair<double, double>> extremes = {
      {ScoreKind::entropy, {0.0, 1.0}}, {ScoreKind::msp, {0.0, 0.9}}, {ScoreKind::margin, {0.0, 1.0}},
      {ScoreKind::top3, {0.0, 0.7}},    {ScoreKind::gini, {0.0, 0.9}}};
  double worst = 0.0;
  for (const auto& [k, v] : extremes) {
    worst = std::max(worst, std::abs(criteria::score(k, one) - v.first));
    worst = std::max(worst, std::abs(criteria::score(k, uni) - v.second));
  }
  o.detail << "1e5 simplex points, out_of_range=" << out_of_range << " max_extreme_error=" << worst;
  o.require(out_of_range == 0, "ranges");
  o.require(worst <= 1e-9, "closed forms");
  report(2, "Score-function analytic suite");
}

void criterion_3() {
  auto& o = results[3];
  const auto cases = run_gradcheck_suite(2024, 20);
  double worst = 0.0;
  std::string worst_case;
  for (const auto& c : cases) {
    o.require(c.passed && c.instances >= 20, c.name);
    if (c.worst.max_rel_error >= worst) {
      worst = c.worst.max_rel_error;
      worst_case = c.name;
    }
  }
  o.detail << cases.size() << " cases x 20 instances, max_rel_error=" << worst << " (" << worst_case << ")";
  o.require(worst < 1e-3, "max relative error < 1e-3");
  report(3, "Gradient checks");
}

void criterion_4(const backbone::AmcModel& trained, const iq::Dataset& data) {
  auto& o = results[4];
  Rng rng(derive_seed(2024, 4));
  std::vector<iq::IqMatrix> frames;
  for (int i = 0; i < 1000; ++i) {
    if (i % 2 == 0) {
      frames.push_back(data.frames[uniform_index(rng, data.frames.size())].iq);
    } else {
      iq::IqMatrix m{};
      for (auto& v : m) v = static_cast<float>(gaussian(rng));
      frames.push_back(m);
    }
  }
  std::size_t mismatches = 0;
  for (int k = 1; k <= backbone::kNumStages; ++k) {
    const auto model = trained.with_exit_point(k, 77);
    for (const auto& x : frames) {
      const auto split = backbone::forward_to_exit(model, x);
      const auto pf = backbone::forward_final(model, split.cache);
      const auto full = backbone::forward_full(model, x);
      mismatches += !(pf == *full.p_f && split.pair.p_e == full.p_e);
    }
  }
  o.detail << "3 exit points x 1000 frames, mismatches=" << mismatches;
  o.require(mismatches == 0, "bitwise equality");
  report(4, "Split-forward equivalence");
}

struct ExitRun {
  int k = 1;
  backbone::AmcModel model;
  lbap::LbapTrainResult lbap;
  std::optional<Evaluation> eval;
};

void criterion_5_6_7(const std::vector<ExitRun>& runs) {
  auto& o5 = results[5];
  auto& o6 = results[6];
  auto& o7 = results[7];
  std::size_t curves = 0;
  std::size_t points = 0;
  for (const auto& run : runs) {
    const auto& e = *run.eval;
    for (const auto* split : {&e.val, &e.test}) {
      const auto c = count_cases(*split);
      std::size_t ee = 0;
      std::size_t fe = 0;
      for (const auto& r : *split) {
        ee += r.ee_correct();
        fe += r.fe_correct();
      }
      o6.require(c.total() == split->size(), "four-case partition");
      o6.require(c.fe_correct() == fe && c.ee_correct() == ee, "C11+C01=FE, C11+C10=EE");
      const auto bins = entropy_bin_table(*split);
      double total = 0.0;
      for (const auto& b : bins) {
        total += b.samples_pct;
        if (b.count > 0)
          o6.require(std::abs(b.c11_pct + b.c01_pct + b.c00_pct + b.c10_pct - 100.0) <= 0.01, "bin row sum");
      }
      o6.require(std::abs(total - 100.0) <= 0.01, "bin samples sum");
    }

    const auto c = count_cases(e.test);
    const double n = static_cast<double>(e.test.size());
    const double ee_ref = static_cast<double>(c.ee_correct()) / n;
    const double fe_ref = static_cast<double>(c.fe_correct()) / n;
    for (auto kind : e.kinds()) {
      const auto curve = e.curve(kind);
      ++curves;
      const bool lb = kind == ScoreKind::beacon;
      const auto& q0 = curve.points.front();
      const auto& q100 = curve.points.back();
      o5.require(curve.points.size() == 21, "21 points");
      o5.require(q100.accuracy == ee_ref && q0.accuracy == fe_ref, "endpoint accuracy");
      o5.require(q100.avg_macs == static_cast<double>(e.profile.exit_path(lb)) &&
                     q0.avg_macs == static_cast<double>(e.profile.exit_path(lb) + e.profile.continuation()),
                 "endpoint MACs");
      o5.require(q100.avg_macs == backbone::avg_macs(e.profile, 0.0, lb) &&
                     q0.avg_macs == backbone::avg_macs(e.profile, 1.0, lb),
                 "closed-form endpoint cost");
      const auto scores = e.test_scores(kind);
      for (const auto& p : curve.points) {
        ++points;
        const auto d = decide_all(scores, {kind, p.percentile, p.threshold});
        o7.require(mean_macs(simulate_path_macs(d, e.profile, lb)) == p.avg_macs, "simulated == closed form");
      }
    }
  }
  o5.detail << curves << " curves (3 exit points x 6 criteria)";
  o6.detail << "val and test splits of 3 exit points";
  o7.detail << points << " sweep points";
  report(5, "Sweep endpoint exactness");
  report(6, "Taxonomy partition identities");
  report(7, "Accounting equivalence");
}

void criterion_9(const std::vector<ExitRun>& runs, std::vector<CalibrationRow>& calib) {
  auto& o = results[9];
  for (const auto& run : runs) {
    const auto& e = *run.eval;
    const auto val = lbap_samples(e.val);
    double pos = 0.0;
    for (const auto& s : val) pos += s.label;
    const double r = pos / static_cast<double>(val.size());
    const double base = (r > 0.0 && r < 1.0) ? -r * std::log(r) - (1 - r) * std::log(1 - r) : 0.0;
    const double bce = lbap::mean_bce(*e.lbap, val);
    std::vector<int> labels;
    for (const auto& x : e.test) labels.push_back(lbap::recoverability_label(x.yhat_e, x.yhat_f, x.label));
    const auto cal = lbap::calibration_report(e.test_scores(ScoreKind::beacon), labels);
    calib.push_back({run.k, cal});
    o.detail << " EE-" << run.k << ": val_bce=" << fmt_num(bce, 4) << " base=" << fmt_num(base, 4)
             << " gap=" << fmt_num(cal.abs_gap, 4);
    o.require(bce < base, "EE-" + std::to_string(run.k) + " BCE below base rate");
    o.require(cal.abs_gap < 0.05, "EE-" + std::to_string(run.k) + " calibration gap < 0.05");
  }
  report(9, "LBAP learning signal");
}

std::vector<InvocationSeries> criterion_10(const Evaluation& e) {
  auto& o = results[10];
  std::vector<double> rates;
  for (int r = 5; r <= 95; r += 5) rates.push_back(r);
  const auto p_recov = recovery_stats(e.test).p_recov;
  const auto beacon = invocation_analysis(e.test, e.test_scores(ScoreKind::beacon), e.profile, true, rates);
  const auto entropy = invocation_analysis(e.test, e.test_scores(ScoreKind::entropy), e.profile, false, rates);
  std::size_t wins = 0;
  std::size_t recov_ok = 0;
  std::size_t recov_needed = 0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    wins += beacon[i].accuracy >= entropy[i].accuracy;
    if (rates[i] <= 50) {
      ++recov_needed;
      recov_ok += beacon[i].recoverable_rate > p_recov;
    }
  }
  o.detail << "beacon>=entropy at " << wins << "/" << rates.size() << " rates; recoverable>p_recov("
           << fmt_num(p_recov, 4) << ") at " << recov_ok << "/" << recov_needed << " rates<=50";
  o.require(static_cast<double>(wins) >= 0.6 * static_cast<double>(rates.size()), "accuracy trend");
  o.require(recov_ok == recov_needed, "recoverable rate above p_recov");
  report(10, "Benefit-aware trend at exit point 1");
  return {{ScoreKind::beacon, beacon}, {ScoreKind::entropy, entropy}};
}

void criterion_11(const std::vector<ExitRun>& runs) {
  auto& o = results[11];
  std::size_t compared = 0;
  std::size_t violations = 0;
  std::size_t envelope_mismatch = 0;
  for (const auto& run : runs) {
    const auto& e = *run.eval;
    const auto signed_scores = signed_benefit_scores(e.test);
    for (auto kind : e.kinds()) {
      const bool lb = kind == ScoreKind::beacon;
      for (const auto& p : e.curve(kind).points) {
        ++compared;
        violations += oracle_accuracy(e.test, p.forwarded) + 1e-12 < p.accuracy;
      }
      for (const auto& p : invocation_analysis(e.test, e.test_scores(kind), e.profile, lb)) {
        ++compared;
        violations += oracle_accuracy(e.test, p.forwarded) + 1e-12 < p.accuracy;
      }
    }
    // The signed-benefit ordering realizes the oracle envelope.
    for (const auto& p : invocation_analysis(e.test, signed_scores, e.profile, false))
      envelope_mismatch += std::abs(oracle_accuracy(e.test, p.forwarded) - p.accuracy) > 1e-12;
  }
  o.detail << compared << " operating points, violations=" << violations << ", oracle realization mismatches="
           << envelope_mismatch;
  o.require(violations == 0, "dominance");
  o.require(envelope_mismatch == 0, "oracle realizable");
  report(11, "Oracle dominance");
}

// Every artifact of a small end-to-end run, keyed by file name.
std::map<std::string, std::vector<std::uint8_t>> small_run(const std::filesystem::path& dir) {
  std::filesystem::remove_all(dir);
  const Workspace ws(dir);
  RunConfig cfg;
  cfg.dataset.frames_per_cell = 10;
  cfg.dataset.snr_grid = {-16, -6, 4, 14};
  cfg.arch.widths = {8, 12, 16};
  cfg.backbone_train.epochs = 2;
  cfg.exit_train.epochs = 5;
  cfg.lbap_train.epochs = 10;
  const ReportHeader h{config_hash(cfg), cfg.seed, {}};
  const auto data = run_gen_data(cfg);
  iq::save_dataset(data, ws.dataset());
  const auto bb = run_train_backbone(cfg, data);
  save_backbone(ws, bb.model);
  std::vector<CalibrationRow> calib;
  for (int k = 1; k <= 3; ++k) {
    const auto ex = run_train_exit(cfg, bb.model, data, k);
    save_exit_head(ws, ex.model);
    const auto lb = run_train_lbap(cfg, ex.model, data);
    save_lbap(ws, k, lb.model);
    const auto e = evaluate(ex.model, &lb.model, data);
    std::vector<TradeoffCurve> curves;
    for (auto kind : e.kinds()) curves.push_back(e.curve(kind));
    const std::string s = "_ee" + std::to_string(k) + ".csv";
    io::write_text(ws.file("tradeoff" + s), tradeoff_csv(curves, h));
    io::write_text(ws.file("table2" + s), table2_csv(entropy_bin_table(e.test), h));
    const std::vector<double> budgets = {5e4, 1e5, 2e5};
    io::write_text(ws.file("table4" + s), table4_csv(curves, budgets, h));
    io::write_text(ws.file("table5" + s), table5_csv(curves, cfg.accuracy_targets, h));
    io::write_text(ws.file("scores" + s),
                   score_dump_csv(e.test, ScoreKind::beacon, e.test_scores(ScoreKind::beacon), h));
  }
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    files[entry.path().filename().string()] = io::read_file(entry.path());
  std::filesystem::remove_all(dir);
  return files;
}

void criterion_12() {
  auto& o = results[12];
  const auto tmp = std::filesystem::temp_directory_path();
  const auto a = small_run(tmp / "beacon_accept_a");
  const auto b = small_run(tmp / "beacon_accept_b");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    differing += it == b.end() || it->second != bytes;
  }
  o.detail << a.size() << " files compared (dataset, checkpoints, CSV reports), differing=" << differing;
  o.require(a.size() == b.size() && a.size() >= 20, "same file set");
  o.require(differing == 0, "bit-identical");
  report(12, "Determinism");
}

}  // namespace

int main(int argc, char** argv) {
  std::optional<std::filesystem::path> out;
  if (argc > 1) out = argv[1];
  try {
    criterion_1();
    criterion_2();
    criterion_3();

    const RunConfig cfg;
    const auto data = run_gen_data(cfg);
    std::fprintf(stderr, "desk run: %zu frames, %zu backbone epochs\n", data.frames.size(), cfg.backbone_train.epochs);
    const auto bb = run_train_backbone(cfg, data, [](const backbone::EpochLog& l) {
      std::fprintf(stderr, "  epoch %zu loss %.4f val_acc %.4f\n", l.epoch, l.train_loss, l.val_accuracy);
    });
    criterion_4(bb.model, data);

    auto& o8 = results[8];
    const auto test_frames = backbone::gather(data, iq::Split::test);
    std::vector<iq::LabeledFrame> high;
    for (const auto& f : test_frames)
      if (band_of(f.snr_db) == SnrBand::high) high.push_back(f);
    const double fe = backbone::accuracy_fe(bb.model, test_frames);
    const double fe_high = backbone::accuracy_fe(bb.model, high);
    o8.detail << "FE test=" << fmt_num(fe, 4) << " high-SNR=" << fmt_num(fe_high, 4);
    o8.require(fe > 0.30, "FE > 30%");
    o8.require(fe_high > 0.60, "high-SNR FE > 60%");

    std::vector<ExitRun> runs;
    for (int k = 1; k <= backbone::kNumStages; ++k) {
      ExitRun run;
      run.k = k;
      const auto ex = run_train_exit(cfg, bb.model, data, k);
      run.model = ex.model;
      const double ee = backbone::accuracy_ee(run.model, test_frames);
      o8.detail << " EE-" << k << "=" << fmt_num(ee, 4);
      o8.require(run.model.checksum(backbone::kBackbone) == bb.model.checksum(backbone::kBackbone),
                 "frozen checksums EE-" + std::to_string(k));
      if (k == 1) o8.require(ee > 0.10, "EE-1 above chance");
      run.lbap = run_train_lbap(cfg, run.model, data);
      run.eval = evaluate(run.model, &run.lbap.model, data);
      runs.push_back(std::move(run));
    }
    report(8, "Desk-scale training pipeline");

    criterion_5_6_7(runs);
    std::vector<CalibrationRow> calib;
    criterion_9(runs, calib);
    const auto series = criterion_10(*runs.front().eval);
    criterion_11(runs);

    if (out) {
      std::filesystem::create_directories(*out);
      const ReportHeader h{config_hash(cfg), cfg.seed, {}};
      std::vector<ModelStats> stats;
      for (const auto& run : runs) {
        const auto& e = *run.eval;
        stats.push_back(model_stats(run.k, e.test));
        std::vector<TradeoffCurve> curves;
        for (auto kind : e.kinds()) curves.push_back(e.curve(kind));
        const std::string s = "_ee" + std::to_string(run.k) + ".csv";
        std::vector<double> budgets;
        for (double f : {0.4, 0.6, 0.8, 1.0}) budgets.push_back(std::round(f * e.profile.full_path()));
        io::write_text(*out / ("tradeoff" + s), tradeoff_csv(curves, h));
        io::write_text(*out / ("table2" + s), table2_csv(entropy_bin_table(e.test), h));
        io::write_text(*out / ("table4" + s), table4_csv(curves, budgets, h));
        io::write_text(*out / ("table5" + s), table5_csv(curves, cfg.accuracy_targets, h));
      }
      io::write_text(*out / "table1.csv", table1_csv(stats, h));
      io::write_text(*out / "table7.csv", table7_csv(calib, h));
      io::write_text(*out / "invocation_ee1.csv",
                     invocation_csv(series, recovery_stats(runs.front().eval->test).p_recov, h));
    }

    criterion_12();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }

  std::size_t passed = 0;
  for (const auto& [n, o] : results) passed += o.pass;
  std::printf("%zu/%zu criteria passed\n", passed, results.size());
  return passed == results.size() && results.size() == 12 ? 0 : 1;
}
