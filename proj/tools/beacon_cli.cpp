// beacon: dataset generation, training and evaluation reports from the shell.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "beacon/binary_io.hpp"
#include "beacon/gradcheck_suite.hpp"
#include "beacon/pipeline.hpp"
#include "beacon/reports.hpp"

namespace {

using namespace beacon;
using nlohmann::json;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "beacon_run";
  int exit_point = 0;
  std::string criterion;
  std::vector<double> budgets;
  std::vector<double> accuracy;
  bool dump_scores = false;
  std::size_t instances = 20;
};

eval::RunConfig make_config(const Options& o) {
  auto cfg = o.config_path.empty() ? eval::RunConfig{} : eval::load_config(o.config_path);
  if (o.seed) cfg.apply_seed(*o.seed);
  return cfg;
}

class Session {
 public:
  explicit Session(const Options& o)
      : opts_(o), cfg_(make_config(o)), ws_(o.out) {
    if (o.exit_point != 0) {
      if (o.exit_point < 1 || o.exit_point > backbone::kNumStages) throw UsageError("--exit-point must be 1, 2 or 3");
    }
    cfg_.validate();
    io::write_text(ws_.file("config.json"), eval::config_to_json(cfg_));
  }

  const eval::RunConfig& cfg() const { return cfg_; }
  const eval::Workspace& ws() const { return ws_; }

  int exit_point() const { return opts_.exit_point != 0 ? opts_.exit_point : cfg_.arch.exit_point; }

  std::vector<int> exit_points_or_all() const {
    if (opts_.exit_point != 0) return {opts_.exit_point};
    return {1, 2, 3};
  }

  eval::ReportHeader header() const { return {eval::config_hash(cfg_), cfg_.seed, {}}; }

  iq::Dataset dataset() const {
    if (!std::filesystem::exists(ws_.dataset()))
      throw IoError("missing dataset " + ws_.dataset().string() + " (run gen-data first)");
    return iq::load_dataset(ws_.dataset());
  }

  std::optional<lbap::LbapModel> lbap_if_present(int k) const {
    if (!std::filesystem::exists(ws_.lbap(k))) return std::nullopt;
    return eval::load_lbap(ws_, k);
  }

  std::vector<criteria::ScoreKind> kinds(const eval::Evaluation& e) const {
    if (opts_.criterion.empty()) return e.kinds();
    const auto k = criteria::parse_kind(opts_.criterion);
    if (k == criteria::ScoreKind::beacon && !e.lbap)
      throw PreconditionError("criterion beacon needs " + ws_.lbap(e.exit_point).string() + " (run train-lbap)");
    return {k};
  }

  eval::Evaluation evaluation(int k, const iq::Dataset& data) const {
    const auto model = eval::load_model(ws_, cfg_, k);
    const auto lb = lbap_if_present(k);
    return eval::evaluate(model, lb ? &*lb : nullptr, data);
  }

  void write(const std::string& name, const std::string& text) {
    io::write_text(ws_.file(name), text);
    outputs_.push_back(name);
    std::cout << "wrote " << ws_.file(name).string() << "\n";
  }

  void record(const std::string& command, json extra = json::object()) {
    const auto path = ws_.file("manifest.json");
    json m = json::object();
    if (std::filesystem::exists(path)) {
      try {
        m = json::parse(io::read_text(path));
      } catch (const json::exception&) {
        m = json::object();
      }
    }
    extra["config_hash"] = hex32(eval::config_hash(cfg_));
    extra["seed"] = cfg_.seed;
    extra["outputs"] = outputs_;
    m[command] = extra;
    io::write_text(path, m.dump(2) + "\n");
  }

  const Options& opts() const { return opts_; }

 private:
  Options opts_;
  eval::RunConfig cfg_;
  eval::Workspace ws_;
  std::vector<std::string> outputs_;
};

std::string ee_suffix(int k) { return "_ee" + std::to_string(k); }

json model_checksums(const backbone::AmcModel& m) {
  return {{"backbone", hex32(m.checksum(backbone::kBackbone))}, {"ee_head", hex32(m.checksum(backbone::kEeHead))}};
}

void cmd_gen_data(Session& s) {
  const auto data = eval::run_gen_data(s.cfg());
  iq::save_dataset(data, s.ws().dataset());
  std::cout << "generated " << data.frames.size() << " frames -> " << s.ws().dataset().string() << "\n";
  s.record("gen-data", {{"frames", data.frames.size()}});
}

void cmd_train_backbone(Session& s) {
  const auto data = s.dataset();
  const auto result = eval::run_train_backbone(s.cfg(), data, [](const backbone::EpochLog& l) {
    std::fprintf(stderr, "epoch %zu  loss %.4f  train_acc %.4f  val_acc %.4f\n", l.epoch, l.train_loss,
                 l.train_accuracy, l.val_accuracy);
  });
  eval::save_backbone(s.ws(), result.model);
  std::string log = "epoch,train_loss,train_accuracy,val_accuracy\n";
  for (const auto& l : result.log) {
    log += std::to_string(l.epoch) + "," + eval::fmt_num(l.train_loss) + "," + eval::fmt_num(l.train_accuracy) +
           "," + eval::fmt_num(l.val_accuracy) + "\n";
  }
  s.write("train_backbone.csv", log);
  const auto test = backbone::gather(data, iq::Split::test);
  std::cout << "best epoch " << result.best_epoch << ", final-exit test accuracy "
            << eval::fmt_num(backbone::accuracy_fe(result.model, test), 4) << "\n";
  s.record("train-backbone", {{"best_epoch", result.best_epoch}, {"checksums", model_checksums(result.model)}});
}

void cmd_train_exit(Session& s) {
  const auto data = s.dataset();
  const auto trained = eval::load_backbone(s.ws(), s.cfg());
  const auto test = backbone::gather(data, iq::Split::test);
  json sums = json::object();
  for (int k : s.exit_points_or_all()) {
    const auto r = eval::run_train_exit(s.cfg(), trained, data, k);
    eval::save_exit_head(s.ws(), r.model);
    std::string log = "epoch,train_loss,train_accuracy,val_accuracy\n";
    for (const auto& l : r.log) {
      log += std::to_string(l.epoch) + "," + eval::fmt_num(l.train_loss) + "," + eval::fmt_num(l.train_accuracy) +
             "," + eval::fmt_num(l.val_accuracy) + "\n";
    }
    s.write("train_exit" + ee_suffix(k) + ".csv", log);
    std::cout << "EE-" << k << ": early-exit test accuracy " << eval::fmt_num(backbone::accuracy_ee(r.model, test), 4)
              << "\n";
    sums["EE-" + std::to_string(k)] = model_checksums(r.model);
  }
  s.record("train-exit", {{"checksums", sums}});
}

void cmd_train_lbap(Session& s) {
  const auto data = s.dataset();
  json sums = json::object();
  for (int k : s.exit_points_or_all()) {
    if (!std::filesystem::exists(s.ws().exit_head(k))) {
      if (s.opts().exit_point != 0) throw IoError("missing " + s.ws().exit_head(k).string() + " (run train-exit)");
      continue;
    }
    const auto model = eval::load_model(s.ws(), s.cfg(), k);
    const auto r = eval::run_train_lbap(s.cfg(), model, data);
    if (r.degenerate_labels)
      std::cerr << "warning: EE-" << k << " recoverability labels are all identical; LBAP trained anyway\n";
    eval::save_lbap(s.ws(), k, r.model);
    std::string log = "epoch,train_bce,val_bce\n";
    for (const auto& l : r.log)
      log += std::to_string(l.epoch) + "," + eval::fmt_num(l.train_bce) + "," + eval::fmt_num(l.val_bce) + "\n";
    s.write("train_lbap" + ee_suffix(k) + ".csv", log);
    std::cout << "EE-" << k << ": LBAP best epoch " << r.best_epoch << ", validation BCE "
              << eval::fmt_num(r.best_val_bce) << "\n";
    sums["EE-" + std::to_string(k)] = hex32(r.model.checksum());
  }
  s.record("train-lbap", {{"checksums", sums}});
}

std::vector<eval::TradeoffCurve> curves(const Session& s, const eval::Evaluation& e) {
  std::vector<eval::TradeoffCurve> out;
  for (auto kind : s.kinds(e)) out.push_back(e.curve(kind));
  return out;
}

void cmd_sweep(Session& s) {
  const auto data = s.dataset();
  const int k = s.exit_point();
  const auto e = s.evaluation(k, data);
  const auto cs = curves(s, e);
  s.write("tradeoff" + ee_suffix(k) + ".csv", eval::tradeoff_csv(cs, s.header()));
  if (s.opts().dump_scores) {
    for (auto kind : s.kinds(e)) {
      auto records = e.val;
      records.insert(records.end(), e.test.begin(), e.test.end());
      auto scores = e.val_scores(kind);
      const auto ts = e.test_scores(kind);
      scores.insert(scores.end(), ts.begin(), ts.end());
      s.write("scores" + ee_suffix(k) + "_" + std::string(criteria::kind_name(kind)) + ".csv",
              eval::score_dump_csv(records, kind, scores, s.header()));
    }
  }
  s.record("sweep", {{"exit_point", k}});
}

void cmd_bins(Session& s) {
  const auto data = s.dataset();
  const int k = s.exit_point();
  const auto e = s.evaluation(k, data);
  const std::vector<eval::ModelStats> stats = {eval::model_stats(k, e.test)};
  s.write("table1" + ee_suffix(k) + ".csv", eval::table1_csv(stats, s.header()));
  s.write("table2" + ee_suffix(k) + ".csv", eval::table2_csv(eval::entropy_bin_table(e.test), s.header()));
  s.record("bins", {{"exit_point", k}});
}

void cmd_budget(Session& s) {
  const auto data = s.dataset();
  const int k = s.exit_point();
  const auto e = s.evaluation(k, data);
  std::vector<double> budgets = s.opts().budgets.empty() ? s.cfg().budgets : s.opts().budgets;
  if (budgets.empty()) {
    const double full = static_cast<double>(e.profile.full_path());
    for (double f : {0.4, 0.6, 0.8, 1.0}) budgets.push_back(std::round(f * full));
  }
  s.write("table4" + ee_suffix(k) + ".csv", eval::table4_csv(curves(s, e), budgets, s.header()));
  s.record("budget", {{"exit_point", k}, {"budgets", budgets}});
}

void cmd_min_cost(Session& s) {
  const auto data = s.dataset();
  const int k = s.exit_point();
  const auto e = s.evaluation(k, data);
  const auto targets = s.opts().accuracy.empty() ? s.cfg().accuracy_targets : s.opts().accuracy;
  for (double t : targets)
    if (!(t >= 0.0 && t <= 1.0)) throw UsageError("--accuracy values must lie in [0,1]");
  s.write("table5" + ee_suffix(k) + ".csv", eval::table5_csv(curves(s, e), targets, s.header()));
  s.record("min-cost", {{"exit_point", k}, {"targets", targets}});
}

void cmd_invocation(Session& s) {
  const auto data = s.dataset();
  const int k = s.exit_point();
  const auto e = s.evaluation(k, data);
  std::vector<eval::InvocationSeries> series;
  for (auto kind : s.kinds(e)) {
    const bool uses_lbap = kind == criteria::ScoreKind::beacon;
    series.push_back({kind, eval::invocation_analysis(e.test, e.test_scores(kind), e.profile, uses_lbap)});
  }
  s.write("invocation" + ee_suffix(k) + ".csv",
          eval::invocation_csv(series, eval::recovery_stats(e.test).p_recov, s.header()));
  s.record("invocation", {{"exit_point", k}});
}

void cmd_snr_report(Session& s) {
  const auto data = s.dataset();
  const int k = s.exit_point();
  const auto e = s.evaluation(k, data);
  std::vector<eval::BandCurve> all;
  for (auto kind : s.kinds(e)) {
    auto bands = eval::snr_grouped_tradeoff(kind, e.val_scores(kind), e.test, e.test_scores(kind), e.profile);
    for (auto& b : bands) all.push_back(std::move(b));
  }
  s.write("snr" + ee_suffix(k) + ".csv", eval::snr_csv(all, s.header()));
  s.record("snr-report", {{"exit_point", k}});
}

void cmd_calibration(Session& s) {
  const auto data = s.dataset();
  std::vector<eval::CalibrationRow> rows;
  for (int k : s.exit_points_or_all()) {
    if (!std::filesystem::exists(s.ws().lbap(k))) {
      if (s.opts().exit_point != 0) throw IoError("missing " + s.ws().lbap(k).string() + " (run train-lbap)");
      continue;
    }
    const auto e = s.evaluation(k, data);
    const auto scores = e.test_scores(criteria::ScoreKind::beacon);
    std::vector<int> labels;
    for (const auto& r : e.test) labels.push_back(lbap::recoverability_label(r.yhat_e, r.yhat_f, r.label));
    rows.push_back({k, lbap::calibration_report(scores, labels)});
  }
  if (rows.empty()) throw PreconditionError("no trained LBAP found in " + s.ws().dir().string());
  s.write("table7.csv", eval::table7_csv(rows, s.header()));
  s.record("calibration");
}

int cmd_gradcheck(Session& s) {
  const auto cases = eval::run_gradcheck_suite(s.cfg().seed, s.opts().instances);
  bool ok = true;
  for (const auto& c : cases) {
    std::printf("%-22s instances=%zu checked=%zu kinks_skipped=%zu max_rel_error=%.3e %s\n", c.name.c_str(),
                c.instances, c.checked, c.kinks_skipped, c.worst.max_rel_error, c.passed ? "ok" : "FAIL");
    ok = ok && c.passed;
  }
  s.record("gradcheck", {{"passed", ok}});
  return ok ? 0 : static_cast<int>(ErrorCategory::numeric);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benefit-aware early-exit inference for modulation classification"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  std::uint64_t seed = 0;
  app.add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides every seed in the config)");
  app.add_option("--out", o.out, "Working directory for datasets, checkpoints and reports");
  app.add_option("--exit-point", o.exit_point, "Early-exit attachment stage (1, 2 or 3)")->check(CLI::Range(1, 3));
  app.add_option("--criterion", o.criterion, "entropy, msp, margin, top3, gini or beacon (default: all)")
      ->check(CLI::IsMember({"entropy", "msp", "margin", "top3", "gini", "beacon"}));

  using Handler = std::function<int(Session&)>;
  std::vector<std::pair<CLI::App*, Handler>> commands;
  auto add = [&](const char* name, const char* help, Handler h) {
    auto* sub = app.add_subcommand(name, help);
    commands.emplace_back(sub, std::move(h));
    return sub;
  };
  auto wrap = [](void (*f)(Session&)) { return Handler([f](Session& s) { f(s); return 0; }); };

  add("gen-data", "Generate the synthetic I/Q dataset", wrap(cmd_gen_data));
  add("train-backbone", "Train stem, stages and final head", wrap(cmd_train_backbone));
  add("train-exit", "Train early-exit heads on the frozen backbone", wrap(cmd_train_exit));
  add("train-lbap", "Train the benefit predictor on frozen exits", wrap(cmd_train_lbap));
  auto* sweep = add("sweep", "Accuracy/MACs trade-off over 21 percentile thresholds", wrap(cmd_sweep));
  sweep->add_flag("--dump-scores", o.dump_scores, "Also write per-sample scores");
  add("bins", "Recoverability statistics and entropy-bin table", wrap(cmd_bins));
  auto* budget = add("budget", "Best accuracy under MAC budgets", wrap(cmd_budget));
  budget->add_option("--budget", o.budgets, "Average-MAC budget (repeatable)");
  auto* min_cost = add("min-cost", "Cheapest operating point meeting accuracy targets", wrap(cmd_min_cost));
  min_cost->add_option("--accuracy", o.accuracy, "Required overall accuracy in [0,1] (repeatable)");
  add("invocation", "Recoverable rate among forwarded samples vs invocation rate", wrap(cmd_invocation));
  add("snr-report", "Trade-off curves per SNR band", wrap(cmd_snr_report));
  add("calibration", "LBAP mean score vs true recoverable ratio", wrap(cmd_calibration));
  auto* gc = add("gradcheck", "Finite-difference gradient checks", cmd_gradcheck);
  gc->add_option("--instances", o.instances, "Random instances per case");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorCategory::usage);
  }
  if (*seed_opt) o.seed = seed;

  try {
    for (auto& [sub, handler] : commands) {
      if (!sub->parsed()) continue;
      Session session(o);
      return handler(session);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::io);
  }
  return 0;
}
