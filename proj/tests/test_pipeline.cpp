#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "beacon/binary_io.hpp"
#include "beacon/pipeline.hpp"
#include "beacon/reports.hpp"

using namespace beacon;
using namespace beacon::eval;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.dataset.frames_per_cell = 10;
  c.dataset.snr_grid = {-14, -4, 6, 16};
  c.arch.widths = {4, 6, 8};
  c.backbone_train.epochs = 1;
  c.exit_train.epochs = 2;
  c.lbap_train.epochs = 3;
  return c;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("config JSON round trip, hashing and validation") {
  auto c = tiny_config();
  c.apply_seed(42);
  CHECK(c.dataset.seed == 42);
  CHECK(c.lbap_train.seed == 42);
  const auto text = config_to_json(c);
  const auto back = config_from_json(text);
  CHECK(config_to_json(back) == text);
  CHECK(config_hash(back) == config_hash(c));
  auto d = c;
  d.lbap_train.dropout_rate = 0.3;
  CHECK(config_hash(d) != config_hash(c));

  const auto partial = config_from_json(R"({"arch": {"exit_point": 2}})");
  CHECK(partial.arch.exit_point == 2);
  CHECK(partial.backbone_train.epochs == RunConfig{}.backbone_train.epochs);
  CHECK_THROWS_AS(config_from_json(R"({"arch": {"exit_pont": 2}})"), FormatError);
  CHECK_THROWS_AS(config_from_json("{not json"), FormatError);
  auto bad = c;
  bad.arch.exit_point = 4;
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
}

TEST_CASE("number formatting") {
  CHECK(fmt_num(0.5, 3) == "0.500");
  CHECK(fmt_num(INFINITY) == "inf");
  CHECK(fmt_num(-INFINITY) == "-inf");
}

TEST_CASE("end-to-end pipeline on a tiny workspace") {
  const auto dir = std::filesystem::temp_directory_path() / "beacon_pipeline_test";
  std::filesystem::remove_all(dir);
  const Workspace ws(dir);
  const auto cfg = tiny_config();
  const auto data = run_gen_data(cfg);
  iq::save_dataset(data, ws.dataset());

  const auto bb = run_train_backbone(cfg, data);
  save_backbone(ws, bb.model);
  CHECK_THROWS_AS(load_model(ws, cfg, 1), IoError);
  const auto ex = run_train_exit(cfg, bb.model, data, 1);
  save_exit_head(ws, ex.model);
  const auto model = load_model(ws, cfg, 1);
  CHECK(model.checksum(backbone::kAllParams) == ex.model.checksum(backbone::kAllParams));

  const auto lb = run_train_lbap(cfg, model, data);
  save_lbap(ws, 1, lb.model);
  const auto lbap = load_lbap(ws, 1);
  CHECK(lbap.checksum() == lb.model.checksum());

  const auto e = evaluate(model, &lbap, data);
  CHECK(e.kinds().front() == criteria::ScoreKind::beacon);
  CHECK(e.kinds().size() == 6);
  CHECK(e.profile.macs_lbap == lbap::kCanonicalMacs);
  CHECK(e.test.size() == data.indices(iq::Split::test).size());
  CHECK(e.val.size() == data.indices(iq::Split::val).size());

  const ReportHeader h{config_hash(cfg), cfg.seed, {}};
  std::vector<TradeoffCurve> curves;
  for (auto k : e.kinds()) curves.push_back(e.curve(k));
  const auto csv = tradeoff_csv(curves, h);
  CHECK(csv.rfind("# thresholds calibrated on the validation split", 0) == 0);
  CHECK(csv.find("config_hash=" + hex32(config_hash(cfg))) != std::string::npos);
  CHECK(count_lines(csv) == 3 + 6 * 21);

  const std::vector<double> budgets = {1e3, 1e9};
  const auto t4 = table4_csv(curves, budgets, h);
  CHECK(t4.find("\n1000") != std::string::npos);
  const auto t2 = table2_csv(entropy_bin_table(e.test), h);
  CHECK(count_lines(t2) >= 3 + kEntropyBins);

  const auto dump = score_dump_csv(e.test, criteria::ScoreKind::entropy, e.test_scores(criteria::ScoreKind::entropy), h);
  CHECK(dump.find("sample_id,split,snr_db,label,yhat_e,yhat_f,score_kind,score") != std::string::npos);
  std::filesystem::remove_all(dir);
}
