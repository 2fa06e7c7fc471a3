#include "beacon/gradcheck_suite.hpp"

#include <cmath>
#include <functional>

#include "beacon/backbone.hpp"
#include "beacon/lbap.hpp"
#include "beacon/nn/layers.hpp"

namespace beacon::eval {
namespace {

constexpr double kStep = 1e-5;
// Smaller step for the ReLU network: fewer entries have a kink inside the window.
constexpr double kKinkStep = 1e-6;

nn::Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  nn::Tensor t(std::move(shape));
  for (auto& v : t.data()) v = gaussian(rng);
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

nn::Tensor as_tensor(std::vector<double> v) {
  const std::size_t n = v.size();
  return nn::Tensor({n}, std::move(v));
}

using Check = std::function<nn::GradcheckReport(Rng&, double)>;

// Linear probe r . dense(x) over weight, bias and input.
nn::GradcheckReport check_dense(Rng& rng, double tol) {
  auto layer = nn::DenseLayer::he_init(5, 7, rng);
  layer.bias = random_tensor({5}, rng);
  auto x = random_tensor({7}, rng);
  const auto r = random_tensor({5}, rng);
  auto grad = nn::DenseLayer::zeros(5, 7);
  const auto gx = as_tensor(nn::dense_backward(layer, x.data(), r.data(), grad));
  const std::vector<nn::ParamSlot> slots = {
      {"weight", &layer.weight, &grad.weight}, {"bias", &layer.bias, &grad.bias}, {"input", &x, &gx}};
  return nn::gradcheck(slots, [&] { return dot(r.data(), nn::dense_forward(layer, x.data())); }, kStep, tol);
}

nn::GradcheckReport check_conv(Rng& rng, double tol, std::size_t k, std::size_t stride) {
  auto layer = nn::ConvLayer::he_init(4, 3, k, stride, k / 2, rng);
  layer.bias = random_tensor({4}, rng);
  auto x = random_tensor({3, 11}, rng);
  const auto r = random_tensor({4, layer.output_length(11)}, rng);
  auto grad = nn::ConvLayer::zeros(4, 3, k, stride, k / 2);
  const auto gx = nn::conv1d_backward(layer, x, r, grad);
  const std::vector<nn::ParamSlot> slots = {
      {"kernel", &layer.kernel, &grad.kernel}, {"bias", &layer.bias, &grad.bias}, {"input", &x, &gx}};
  return nn::gradcheck(
      slots, [&] { return dot(r.data(), nn::conv1d_forward(layer, x).data()); }, kStep, tol);
}

nn::GradcheckReport check_relu(Rng& rng, double tol) {
  auto x = random_tensor({16}, rng);
  // Keep inputs away from the kink so the central difference is well defined.
  for (auto& v : x.data()) v += v >= 0 ? 0.1 : -0.1;
  const auto r = random_tensor({16}, rng);
  auto out = x;
  nn::relu_inplace(out.data());
  auto gx = r;
  nn::relu_backward_inplace(out.data(), gx.data());
  const std::vector<nn::ParamSlot> slots = {{"input", &x, &gx}};
  return nn::gradcheck(slots, [&] {
    auto y = x;
    nn::relu_inplace(y.data());
    return dot(r.data(), y.data());
  }, kStep, tol);
}

nn::GradcheckReport check_pool(Rng& rng, double tol) {
  auto x = random_tensor({3, 9}, rng);
  const auto r = random_tensor({3}, rng);
  const auto gx = nn::global_avg_pool_backward(r.data(), 9);
  const std::vector<nn::ParamSlot> slots = {{"input", &x, &gx}};
  return nn::gradcheck(slots, [&] { return dot(r.data(), nn::global_avg_pool(x)); }, kStep, tol);
}

// Dense logits -> softmax -> cross-entropy.
nn::GradcheckReport check_softmax_ce(Rng& rng, double tol) {
  auto layer = nn::DenseLayer::he_init(kNumClasses, 6, rng);
  auto x = random_tensor({6}, rng);
  const std::size_t y = uniform_index(rng, kNumClasses);
  const auto p = nn::softmax(nn::dense_forward(layer, x.data()));
  std::vector<double> g(p.size());
  for (std::size_t c = 0; c < g.size(); ++c) g[c] = p[c] - (c == y ? 1.0 : 0.0);
  auto grad = nn::DenseLayer::zeros(kNumClasses, 6);
  const auto gx = as_tensor(nn::dense_backward(layer, x.data(), g, grad));
  const std::vector<nn::ParamSlot> slots = {
      {"weight", &layer.weight, &grad.weight}, {"bias", &layer.bias, &grad.bias}, {"input", &x, &gx}};
  return nn::gradcheck(
      slots, [&] { return nn::cross_entropy(nn::softmax(nn::dense_forward(layer, x.data())), y); }, kStep, tol);
}

// Dense logit -> sigmoid -> binary cross-entropy.
nn::GradcheckReport check_sigmoid_bce(Rng& rng, double tol) {
  auto layer = nn::DenseLayer::he_init(1, 6, rng);
  auto x = random_tensor({6}, rng);
  const int label = static_cast<int>(uniform_index(rng, 2));
  const double s = nn::sigmoid(nn::dense_forward(layer, x.data())[0]);
  const double g[1] = {s - label};
  auto grad = nn::DenseLayer::zeros(1, 6);
  const auto gx = as_tensor(nn::dense_backward(layer, x.data(), g, grad));
  const std::vector<nn::ParamSlot> slots = {
      {"weight", &layer.weight, &grad.weight}, {"bias", &layer.bias, &grad.bias}, {"input", &x, &gx}};
  return nn::gradcheck(
      slots, [&] { return nn::bce(nn::sigmoid(nn::dense_forward(layer, x.data())[0]), label); }, kStep, tol);
}

nn::GradcheckReport check_dropout(Rng& rng, double tol) {
  auto x = random_tensor({32}, rng);
  const auto mask = nn::dropout_mask(32, 0.2, rng);
  const auto r = random_tensor({32}, rng);
  nn::Tensor gx({32});
  for (std::size_t i = 0; i < 32; ++i) gx[i] = r[i] * mask[i];
  const std::vector<nn::ParamSlot> slots = {{"input", &x, &gx}};
  return nn::gradcheck(slots, [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < 32; ++i) s += r[i] * x[i] * mask[i];
    return s;
  }, kStep, tol);
}

// Full LBAP with BCE, in training mode with a replayed dropout stream.
nn::GradcheckReport check_lbap(Rng& rng, double tol) {
  auto model = lbap::LbapModel::create(rng());
  for (auto& [name, t] : model.named())
    if (name.ends_with("bias")) for (auto& v : t->data()) v = 0.1 * gaussian(rng);
  ProbVector p{};
  double sum = 0.0;
  for (auto& v : p) sum += (v = uniform(rng, 0.01, 1.0));
  for (auto& v : p) v /= sum;
  const int label = static_cast<int>(uniform_index(rng, 2));
  const std::uint64_t dropout_seed = rng();

  auto loss = [&] {
    Rng d(dropout_seed);
    return nn::bce(lbap::lbap_forward(model, p, true, &d), label);
  };
  Rng d(dropout_seed);
  const auto tr = lbap::lbap_forward_trace(model, p, true, &d);
  auto grads = model.zeros_like();
  lbap::lbap_backward(model, tr, tr.score - label, grads);
  auto v = model.named();
  auto g = std::as_const(grads).named();
  std::vector<nn::ParamSlot> slots;
  for (std::size_t i = 0; i < v.size(); ++i) slots.push_back({v[i].first, v[i].second, g[i].second});
  return nn::gradcheck(slots, loss, kStep, tol);
}

// A narrow backbone with all residual paths, checked end to end.
nn::GradcheckReport check_backbone(Rng& rng, double tol) {
  backbone::ArchConfig arch;
  arch.widths = {2, 3, 4};
  arch.stem_kernel = 3;
  auto model = backbone::AmcModel::create(arch, rng());
  auto& params = model.mutable_params();
  for (auto& [name, t] : params.named(backbone::kBackbone))
    if (name.ends_with("bias")) for (auto& v : t->data()) v = 0.1 * gaussian(rng);
  iq::IqMatrix frame{};
  for (auto& v : frame) v = static_cast<float>(gaussian(rng));
  const std::size_t y = uniform_index(rng, kNumClasses);
  auto grads = params.zeros_like();
  backbone::fe_loss_backward(params, grads, frame, y);
  auto v = params.named(backbone::kBackbone);
  auto g = std::as_const(grads).named(backbone::kBackbone);
  std::vector<nn::ParamSlot> slots;
  for (std::size_t i = 0; i < v.size(); ++i) slots.push_back({v[i].first, v[i].second, g[i].second});
  return nn::gradcheck(slots, [&] { return backbone::fe_loss(params, frame, y); }, kKinkStep, tol, true);
}

}  // namespace

std::vector<GradcheckCase> run_gradcheck_suite(std::uint64_t seed, std::size_t instances, double tolerance) {
  const std::vector<std::pair<std::string, Check>> checks = {
      {"dense", check_dense},
      {"conv1d_k3_s1", [](Rng& r, double t) { return check_conv(r, t, 3, 1); }},
      {"conv1d_k3_s2", [](Rng& r, double t) { return check_conv(r, t, 3, 2); }},
      {"conv1d_k1_s2", [](Rng& r, double t) { return check_conv(r, t, 1, 2); }},
      {"relu", check_relu},
      {"global_avg_pool", check_pool},
      {"softmax_cross_entropy", check_softmax_ce},
      {"sigmoid_bce", check_sigmoid_bce},
      {"dropout", check_dropout},
      {"lbap", check_lbap},
      {"backbone", check_backbone},
  };
  std::vector<GradcheckCase> out;
  for (std::size_t c = 0; c < checks.size(); ++c) {
    GradcheckCase gc;
    gc.name = checks[c].first;
    for (std::size_t i = 0; i < instances; ++i) {
      Rng rng(derive_seed(seed, c * 1000 + i));
      const auto rep = checks[c].second(rng, tolerance);
      ++gc.instances;
      gc.checked += rep.checked;
      gc.kinks_skipped += rep.kinks_skipped;
      gc.passed = gc.passed && rep.passed;
      if (i == 0 || rep.max_rel_error > gc.worst.max_rel_error) gc.worst = rep;
    }
    // A kink now and then is expected; many would hide a broken backward pass.
    if (gc.kinks_skipped * 100 > gc.checked) gc.passed = false;
    out.push_back(std::move(gc));
  }
  return out;
}

}  // namespace beacon::eval
