#include <doctest.h>

#include <cmath>

#include "beacon/lbap.hpp"

using namespace beacon;
using namespace beacon::lbap;

namespace {

ProbVector random_simplex(Rng& rng) {
  std::gamma_distribution<double> g(0.3, 1.0);
  ProbVector p{};
  double s = 0.0;
  for (auto& v : p) s += (v = g(rng) + 1e-12);
  for (auto& v : p) v /= s;
  return p;
}

std::vector<LbapSample> argmax_task(std::size_t n, Rng& rng) {
  std::vector<LbapSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = random_simplex(rng);
    out.push_back({p, argmax(p) == 4 ? 1 : 0});
  }
  return out;
}

double base_rate_bce(std::span<const LbapSample> s) {
  double pos = 0.0;
  for (const auto& x : s) pos += x.label;
  const double r = pos / static_cast<double>(s.size());
  return -r * std::log(r) - (1 - r) * std::log(1 - r);
}

}  // namespace

TEST_CASE("recoverability labels") {
  CHECK(recoverability_label(2, 5, 5) == 1);
  CHECK(recoverability_label(5, 5, 5) == 0);
  CHECK(recoverability_label(2, 3, 5) == 0);
  CHECK(recoverability_label(5, 3, 5) == 0);
}

TEST_CASE("zero model scores one half everywhere") {
  const auto m = LbapModel::zeros();
  Rng rng(1);
  for (int i = 0; i < 20; ++i) CHECK(lbap_forward(m, random_simplex(rng)) == 0.5);
}

TEST_CASE("eval mode is deterministic and training mode needs a stream") {
  const auto m = LbapModel::create(3);
  Rng rng(2);
  const auto p = random_simplex(rng);
  CHECK(lbap_forward(m, p) == lbap_forward(m, p));
  CHECK_THROWS_AS(lbap_forward(m, p, true, nullptr), PreconditionError);
  Rng d1(9);
  Rng d2(9);
  CHECK(lbap_forward(m, p, true, &d1) == lbap_forward(m, p, true, &d2));
}

TEST_CASE("overhead is exact and decomposes per layer") {
  const auto m = LbapModel::create(1);
  const auto o = lbap_overhead(m);
  CHECK(o.macs == kCanonicalMacs);
  CHECK(o.params == kCanonicalParams);
  CHECK(o.canonical);
  CHECK(m.dense1.parameter_count() == 704);
  CHECK(m.dense2.parameter_count() == 2080);
  CHECK(m.dense3.parameter_count() == 33);
  CHECK(m.dense1.macs() == 640);
  CHECK(m.dense2.macs() == 2048);
  CHECK(m.dense3.macs() == 32);
  const auto wide = lbap_overhead(LbapModel::create(1, 0.2, 10, 128, 32));
  CHECK_FALSE(wide.canonical);
  CHECK(wide.macs == 10 * 128 + 128 * 32 + 32);
}

TEST_CASE("calibration report") {
  const auto a = calibration_report(std::vector<double>{0.2, 0.8}, std::vector<int>{0, 1});
  CHECK(a.avg_predicted == doctest::Approx(0.5));
  CHECK(a.true_ratio == doctest::Approx(0.5));
  CHECK(a.abs_gap == doctest::Approx(0.0));
  const auto b = calibration_report(std::vector<double>(5, 0.1), std::vector<int>(5, 0));
  CHECK(b.avg_predicted == doctest::Approx(0.1));
  CHECK(b.true_ratio == 0.0);
  CHECK(b.abs_gap == doctest::Approx(0.1));
  CHECK_THROWS_AS(calibration_report(std::vector<double>{}, std::vector<int>{}), PreconditionError);
  CHECK_THROWS_AS(calibration_report(std::vector<double>{0.1}, std::vector<int>{0, 1}), DimensionError);
}

TEST_CASE("LBAP learns a separable task and beats the base rate") {
  Rng rng(17);
  const auto train = argmax_task(3000, rng);
  const auto val = argmax_task(600, rng);
  nn::TrainHyper h;
  h.learning_rate = 3e-3;
  h.epochs = 150;
  h.batch_size = 64;
  h.dropout_rate = 0.2;
  h.patience = 20;
  const auto r = train_lbap(train, val, h);
  CHECK(r.model.trained);
  CHECK_FALSE(r.degenerate_labels);
  CHECK(r.best_val_bce < base_rate_bce(val));
  CHECK(r.best_val_bce == mean_bce(r.model, val));
  std::size_t correct = 0;
  for (const auto& s : val) correct += ((lbap_forward(r.model, s.p_e) >= 0.5 ? 1 : 0) == s.label);
  CHECK(static_cast<double>(correct) / val.size() > 0.95);

  const auto again = train_lbap(train, val, h);
  CHECK(again.model.checksum() == r.model.checksum());

  auto copy = LbapModel::zeros();
  copy.import_blocks(r.model.export_blocks());
  CHECK(copy.trained);
  CHECK(copy.checksum() == r.model.checksum());
}

TEST_CASE("degenerate labels are flagged but still train") {
  Rng rng(4);
  std::vector<LbapSample> s;
  for (int i = 0; i < 64; ++i) s.push_back({random_simplex(rng), 0});
  nn::TrainHyper h;
  h.epochs = 3;
  h.dropout_rate = 0.2;
  const auto r = train_lbap(s, s, h);
  CHECK(r.degenerate_labels);
  CHECK(r.model.trained);
  CHECK_THROWS_AS(train_lbap(std::vector<LbapSample>{}, s, h), PreconditionError);
}
