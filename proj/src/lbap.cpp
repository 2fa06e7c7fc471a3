#include "beacon/lbap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace beacon::lbap {

LbapModel LbapModel::create(std::uint64_t seed, double dropout_rate, std::size_t in, std::size_t h1,
                            std::size_t h2) {
  Rng rng(derive_seed(seed, 0));
  LbapModel m;
  m.dense1 = nn::DenseLayer::he_init(h1, in, rng);
  m.dense2 = nn::DenseLayer::he_init(h2, h1, rng);
  m.dense3 = nn::DenseLayer::zeros(1, h2);
  const double std = std::sqrt(1.0 / static_cast<double>(h2));
  for (auto& w : m.dense3.weight.data()) w = std * gaussian(rng);
  m.dropout_rate = dropout_rate;
  return m;
}

LbapModel LbapModel::zeros(double dropout_rate) {
  LbapModel m;
  m.dense1 = nn::DenseLayer::zeros(kHidden1, kNumClasses);
  m.dense2 = nn::DenseLayer::zeros(kHidden2, kHidden1);
  m.dense3 = nn::DenseLayer::zeros(1, kHidden2);
  m.dropout_rate = dropout_rate;
  return m;
}

std::vector<std::pair<std::string, nn::Tensor*>> LbapModel::named() {
  return {{"lbap.dense1.weight", &dense1.weight}, {"lbap.dense1.bias", &dense1.bias},
          {"lbap.dense2.weight", &dense2.weight}, {"lbap.dense2.bias", &dense2.bias},
          {"lbap.dense3.weight", &dense3.weight}, {"lbap.dense3.bias", &dense3.bias}};
}

std::vector<std::pair<std::string, const nn::Tensor*>> LbapModel::named() const {
  return {{"lbap.dense1.weight", &dense1.weight}, {"lbap.dense1.bias", &dense1.bias},
          {"lbap.dense2.weight", &dense2.weight}, {"lbap.dense2.bias", &dense2.bias},
          {"lbap.dense3.weight", &dense3.weight}, {"lbap.dense3.bias", &dense3.bias}};
}

LbapModel LbapModel::zeros_like() const {
  LbapModel z = *this;
  for (auto& [name, t] : z.named()) t->fill(0.0);
  return z;
}

std::vector<nn::NamedTensor> LbapModel::export_blocks() const {
  std::vector<nn::NamedTensor> out;
  for (const auto& [name, t] : named()) out.push_back({name, *t});
  return out;
}

void LbapModel::import_blocks(std::span<const nn::NamedTensor> blocks) {
  for (auto& [name, t] : named()) *t = nn::find_block(blocks, name, t->shape());
  trained = true;
}

std::uint32_t LbapModel::checksum() const {
  std::uint32_t crc = 0;
  for (const auto& [name, t] : named()) {
    const auto d = t->data();
    crc = crc32({reinterpret_cast<const std::uint8_t*>(d.data()), d.size() * sizeof(double)}, crc);
  }
  return crc;
}

int recoverability_label(std::size_t yhat_e, std::size_t yhat_f, std::size_t y) {
  return (yhat_e != y && yhat_f == y) ? 1 : 0;
}

LbapTrace lbap_forward_trace(const LbapModel& model, std::span<const double> p_e, bool training, Rng* rng) {
  if (training && model.dropout_rate > 0.0 && rng == nullptr)
    throw PreconditionError("lbap: training-mode forward needs a dropout stream");
  LbapTrace tr;
  tr.input.assign(p_e.begin(), p_e.end());
  tr.h1 = nn::dense_forward(model.dense1, tr.input);
  nn::relu_inplace(tr.h1);
  if (training) {
    tr.mask1 = nn::dropout_mask(tr.h1.size(), model.dropout_rate, *rng);
    for (std::size_t i = 0; i < tr.h1.size(); ++i) tr.h1[i] *= tr.mask1[i];
  }
  tr.h2 = nn::dense_forward(model.dense2, tr.h1);
  nn::relu_inplace(tr.h2);
  if (training) {
    tr.mask2 = nn::dropout_mask(tr.h2.size(), model.dropout_rate, *rng);
    for (std::size_t i = 0; i < tr.h2.size(); ++i) tr.h2[i] *= tr.mask2[i];
  }
  tr.logit = nn::dense_forward(model.dense3, tr.h2)[0];
  tr.score = nn::sigmoid(tr.logit);
  return tr;
}

double lbap_forward(const LbapModel& model, std::span<const double> p_e, bool training, Rng* rng) {
  return lbap_forward_trace(model, p_e, training, rng).score;
}

void lbap_backward(const LbapModel& model, const LbapTrace& tr, double grad_logit, LbapModel& grads) {
  const double g_out[1] = {grad_logit};
  auto g2 = nn::dense_backward(model.dense3, tr.h2, g_out, grads.dense3);
  // h2 already holds relu(.) * mask; a zero entry blocks the gradient either way.
  for (std::size_t i = 0; i < g2.size(); ++i) {
    if (!(tr.h2[i] > 0.0)) g2[i] = 0.0;
    else if (!tr.mask2.empty()) g2[i] *= tr.mask2[i];
  }
  auto g1 = nn::dense_backward(model.dense2, tr.h1, g2, grads.dense2);
  for (std::size_t i = 0; i < g1.size(); ++i) {
    if (!(tr.h1[i] > 0.0)) g1[i] = 0.0;
    else if (!tr.mask1.empty()) g1[i] *= tr.mask1[i];
  }
  nn::dense_backward(model.dense1, tr.input, g1, grads.dense1);
}

double mean_bce(const LbapModel& model, std::span<const LbapSample> samples) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : samples) sum += nn::bce(lbap_forward(model, s.p_e), s.label);
  return sum / static_cast<double>(samples.size());
}

LbapTrainResult train_lbap(std::span<const LbapSample> train, std::span<const LbapSample> val,
                           const nn::TrainHyper& hyper) {
  hyper.validate();
  if (train.empty()) throw PreconditionError("train_lbap: no training samples");
  LbapTrainResult result;
  result.model = LbapModel::create(hyper.seed, hyper.dropout_rate);
  LbapModel& model = result.model;

  const auto positives = std::count_if(train.begin(), train.end(), [](const auto& s) { return s.label == 1; });
  result.degenerate_labels = positives == 0 || positives == static_cast<std::ptrdiff_t>(train.size());

  LbapModel grads = model.zeros_like();
  nn::Optimizer opt(hyper.optimizer, hyper.learning_rate);
  Rng shuffle_rng(derive_seed(hyper.seed, 6));
  Rng dropout_rng(derive_seed(hyper.seed, 7));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  const auto& monitor = val.empty() ? train : val;
  LbapModel best = model;
  result.best_val_bce = mean_bce(model, monitor);
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      for (auto& [name, t] : grads.named()) t->fill(0.0);
      for (std::size_t j = start; j < end; ++j) {
        const auto& s = train[order[j]];
        const auto tr = lbap_forward_trace(model, s.p_e, true, &dropout_rng);
        const double loss = nn::bce(tr.score, s.label);
        if (!std::isfinite(loss)) throw NumericError("train_lbap: non-finite loss");
        loss_sum += loss;
        lbap_backward(model, tr, weight * (tr.score - static_cast<double>(s.label)), grads);
      }
      auto v = model.named();
      auto g = std::as_const(grads).named();
      std::vector<nn::ParamSlot> slots;
      for (std::size_t i = 0; i < v.size(); ++i) slots.push_back({v[i].first, v[i].second, g[i].second});
      opt.step(slots);
    }
    LbapEpoch log{epoch, loss_sum / static_cast<double>(train.size()), mean_bce(model, monitor)};
    result.log.push_back(log);
    if (log.val_bce < result.best_val_bce) {
      result.best_val_bce = log.val_bce;
      result.best_epoch = epoch;
      best = model;
      since_best = 0;
    } else if (hyper.patience > 0 && ++since_best >= hyper.patience) {
      break;
    }
  }
  model = best;
  for (auto& [name, t] : model.named()) nn::round_to_f32(*t);
  model.trained = true;
  result.best_val_bce = mean_bce(model, monitor);
  return result;
}

Overhead lbap_overhead(const LbapModel& m) {
  Overhead o;
  o.macs = m.dense1.macs() + m.dense2.macs() + m.dense3.macs();
  o.params = m.dense1.parameter_count() + m.dense2.parameter_count() + m.dense3.parameter_count();
  o.canonical = m.dense1.in_features() == kNumClasses && m.dense1.out_features() == kHidden1 &&
                m.dense2.in_features() == kHidden1 && m.dense2.out_features() == kHidden2 &&
                m.dense3.in_features() == kHidden2 && m.dense3.out_features() == 1;
  return o;
}

Calibration calibration_report(std::span<const double> scores, std::span<const int> labels) {
  if (scores.empty()) throw PreconditionError("calibration_report: empty input");
  if (scores.size() != labels.size()) throw DimensionError("calibration_report: misaligned inputs");
  Calibration c;
  double s = 0.0;
  double l = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    s += scores[i];
    l += labels[i];
  }
  c.avg_predicted = s / static_cast<double>(scores.size());
  c.true_ratio = l / static_cast<double>(labels.size());
  c.abs_gap = std::abs(c.avg_predicted - c.true_ratio);
  return c;
}

}  // namespace beacon::lbap
