#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "beacon/gradcheck_suite.hpp"
#include "beacon/nn/checkpoint.hpp"
#include "beacon/nn/gradcheck.hpp"
#include "beacon/nn/layers.hpp"
#include "beacon/nn/optim.hpp"

using namespace beacon;
using namespace beacon::nn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = gaussian(rng);
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("tensor shape invariants") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.row(1).size() == 3);
  CHECK(t.all_finite());
  CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  t[4] = std::nan("");
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("dense identity, bias passthrough and dimension errors") {
  auto layer = DenseLayer::zeros(3, 3);
  for (std::size_t i = 0; i < 3; ++i) layer.weight[i * 3 + i] = 1.0;
  const std::vector<double> x = {0.5, -2.0, 3.25};
  CHECK(dense_forward(layer, x) == x);
  layer.bias = Tensor({3}, std::vector<double>{1, 2, 3});
  CHECK(dense_forward(layer, std::vector<double>(3, 0.0)) == std::vector<double>{1, 2, 3});
  CHECK_THROWS_AS(dense_forward(layer, std::vector<double>(4, 0.0)), DimensionError);
  CHECK(layer.macs() == 9);
  CHECK(layer.parameter_count() == 12);
}

TEST_CASE("dense 4->3 gradcheck") {
  Rng rng(21);
  auto layer = DenseLayer::he_init(3, 4, rng);
  layer.bias = random_tensor({3}, rng);
  auto x = random_tensor({4}, rng);
  const auto r = random_tensor({3}, rng);
  auto grad = DenseLayer::zeros(3, 4);
  const auto gx_v = dense_backward(layer, x.data(), r.data(), grad);
  const Tensor gx({4}, gx_v);
  const std::vector<ParamSlot> slots = {
      {"w", &layer.weight, &grad.weight}, {"b", &layer.bias, &grad.bias}, {"x", &x, &gx}};
  const auto rep = gradcheck(slots, [&] { return dot(r.data(), dense_forward(layer, x.data())); });
  CHECK(rep.passed);
  CHECK(rep.checked == 12 + 3 + 4);
  CHECK(rep.max_rel_error < 1e-3);
}

TEST_CASE("conv delta kernel is identity and output length follows the formula") {
  auto layer = ConvLayer::same(2, 2, 7, 1);
  for (std::size_t c = 0; c < 2; ++c) layer.kernel[(c * 2 + c) * 7 + 3] = 1.0;
  Rng rng(4);
  const auto x = random_tensor({2, 128}, rng);
  CHECK(conv1d_forward(layer, x) == x);
  const auto strided = ConvLayer::zeros(4, 2, 7, 2, 3);
  CHECK(strided.output_length(128) == 64);
  CHECK(strided.macs(128) == 4 * 2 * 7 * 64);
  CHECK_THROWS_AS(ConvLayer::same(2, 2, 4, 1), DimensionError);
  CHECK_THROWS_AS(conv1d_forward(layer, random_tensor({3, 128}, rng)), DimensionError);
  CHECK_THROWS_AS(conv1d_forward(ConvLayer::zeros(1, 1, 7, 1, 0), Tensor({1, 5})), DimensionError);
}

TEST_CASE("conv 2->4 k=7 gradcheck") {
  Rng rng(22);
  auto layer = ConvLayer::he_init(4, 2, 7, 1, 3, rng);
  layer.bias = random_tensor({4}, rng);
  auto x = random_tensor({2, 20}, rng);
  const auto r = random_tensor({4, 20}, rng);
  auto grad = ConvLayer::zeros(4, 2, 7, 1, 3);
  const auto gx = conv1d_backward(layer, x, r, grad);
  const std::vector<ParamSlot> slots = {
      {"k", &layer.kernel, &grad.kernel}, {"b", &layer.bias, &grad.bias}, {"x", &x, &gx}};
  const auto rep = gradcheck(slots, [&] { return dot(r.data(), conv1d_forward(layer, x).data()); });
  CHECK(rep.passed);
  CHECK(rep.max_rel_error < 1e-3);
}

TEST_CASE("gradcheck flags a wrong gradient") {
  Tensor w({2}, std::vector<double>{1.0, 2.0});
  Tensor g({2}, std::vector<double>{2.0, 5.0});  // true gradient of w0^2 + w1^2 is (2, 4)
  const std::vector<ParamSlot> slots = {{"w", &w, &g}};
  const auto rep = gradcheck(slots, [&] { return w[0] * w[0] + w[1] * w[1]; });
  CHECK_FALSE(rep.passed);
  CHECK(rep.max_rel_error > 0.1);
}

TEST_CASE("softmax, sigmoid and losses") {
  const auto u = softmax(std::vector<double>(10, 0.0));
  for (double p : u) CHECK(p == doctest::Approx(0.1).epsilon(1e-15));
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> z(10);
    for (auto& v : z) v = 30.0 * gaussian(rng);
    auto shifted = z;
    for (auto& v : shifted) v += 123.0;
    const auto p = softmax(z);
    const auto q = softmax(shifted);
    double sum = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(p[i] > 0.0);
      CHECK(std::abs(p[i] - q[i]) < 1e-12);
      sum += p[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);
  CHECK(bce(0.5, 1) == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  double prev = bce(0.01, 1);
  for (double s = 0.02; s < 1.0; s += 0.01) {
    CHECK(bce(s, 1) < prev);
    prev = bce(s, 1);
  }
  CHECK(std::isfinite(bce(0.0, 1)));
  CHECK(bce(0.0, 1) == doctest::Approx(-std::log(kProbEpsilon)));
  CHECK(cross_entropy(u, 3) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  CHECK_THROWS_AS(cross_entropy(u, 10), DimensionError);
}

TEST_CASE("dropout mask uses inverted scaling") {
  Rng rng(3);
  const auto m = dropout_mask(10000, 0.2, rng);
  double kept = 0.0;
  for (double v : m) {
    CHECK((v == 0.0 || v == doctest::Approx(1.25)));
    kept += v;
  }
  CHECK(kept / 10000.0 == doctest::Approx(1.0).epsilon(0.05));
  for (double v : dropout_mask(50, 0.0, rng)) CHECK(v == 1.0);
}

TEST_CASE("sgd and adam steps") {
  std::vector<double> p = {1.0};
  sgd_step(p, std::vector<double>{1.0}, 0.1);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-15));
  sgd_step(p, std::vector<double>{0.0}, 0.1);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK_THROWS_AS(sgd_step(p, std::vector<double>{1.0, 2.0}, 0.1), DimensionError);

  std::vector<double> q = {1.0};
  AdamMoments st;
  AdamConfig cfg;
  cfg.lr = 0.01;
  adam_step(q, std::vector<double>{1.0}, cfg, st, 1);
  CHECK(q[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK_THROWS_AS(adam_step(q, std::vector<double>{1.0}, cfg, st, 0), PreconditionError);
}

TEST_CASE("hyperparameter validation and optimizer names") {
  TrainHyper h;
  CHECK_NOTHROW(h.validate());
  h.dropout_rate = 1.0;
  CHECK_THROWS_AS(h.validate(), PreconditionError);
  h = {};
  h.learning_rate = 0.0;
  CHECK_THROWS_AS(h.validate(), PreconditionError);
  CHECK(parse_optimizer("sgd") == OptimizerKind::sgd);
  CHECK(optimizer_name(OptimizerKind::adam) == "adam");
  CHECK_THROWS_AS(parse_optimizer("rmsprop"), UsageError);
}

TEST_CASE("checkpoint round trip and corruption errors") {
  Rng rng(5);
  std::vector<NamedTensor> blocks = {{"a.weight", random_tensor({3, 4}, rng)}, {"a.bias", random_tensor({3}, rng)}};
  for (auto& b : blocks) round_to_f32(b.tensor);
  const auto bytes = encode_checkpoint(blocks);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "BEACONCK");
  const auto back = decode_checkpoint(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "a.weight");
  CHECK(back[0].tensor == blocks[0].tensor);
  CHECK(back[1].tensor == blocks[1].tensor);
  CHECK(find_block(back, "a.bias", {3}) == blocks[1].tensor);
  CHECK_THROWS_AS(find_block(back, "a.bias", {4}), FormatError);
  CHECK_THROWS_AS(find_block(back, "b.bias", {3}), FormatError);

  auto bad = bytes;
  bad[1] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  auto cut = bytes;
  cut.resize(bytes.size() - 9);
  CHECK_THROWS_AS(decode_checkpoint(cut), TruncatedError);
  auto flip = bytes;
  flip[bytes.size() - 10] ^= 1;
  CHECK_THROWS_AS(decode_checkpoint(flip), ChecksumError);

  const auto path = std::filesystem::temp_directory_path() / "beacon_test.ckpt";
  save_checkpoint(path, blocks);
  CHECK(load_checkpoint(path)[0].tensor == blocks[0].tensor);
  std::filesystem::remove(path);
}

TEST_CASE("gradcheck suite passes on a few instances") {
  for (const auto& c : eval::run_gradcheck_suite(99, 3)) {
    INFO(c.name << " worst=" << c.worst.max_rel_error << " at " << c.worst.worst_entry);
    CHECK(c.passed);
  }
}
