#include "beacon/backbone.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace beacon::backbone {
namespace {

std::uint64_t next_stamp() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

// Init scale of every conv2 kernel; there is no normalization layer between
// the six residual additions.
constexpr double kResidualInitScale = 0.5;

ResidualBlock make_block(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, Rng& rng) {
  ResidualBlock b;
  b.conv1 = nn::ConvLayer::he_init(out, in, k, stride, k / 2, rng);
  b.conv2 = nn::ConvLayer::he_init(out, out, k, 1, k / 2, rng);
  for (auto& w : b.conv2.kernel.data()) w *= kResidualInitScale;
  if (in != out || stride != 1) b.shortcut = nn::ConvLayer::he_init(out, in, 1, stride, 0, rng);
  return b;
}

nn::Tensor input_tensor(const iq::IqMatrix& iq) {
  double power = 0.0;
  for (std::size_t i = 0; i < iq.size(); ++i) {
    if (!std::isfinite(iq[i])) throw PreconditionError("frame contains non-finite samples");
    power += static_cast<double>(iq[i]) * iq[i];
  }
  power /= static_cast<double>(iq::kFrameLen);
  const double g = power > 0.0 ? 1.0 / std::sqrt(power) : 1.0;
  nn::Tensor x({2, iq::kFrameLen});
  for (std::size_t i = 0; i < iq.size(); ++i) x[i] = g * iq[i];
  return x;
}

struct BlockTrace {
  nn::Tensor x;
  nn::Tensor h;
  nn::Tensor out;
};

nn::Tensor block_forward(const ResidualBlock& b, const nn::Tensor& x, BlockTrace* trace) {
  nn::Tensor h = nn::conv1d_forward(b.conv1, x);
  nn::relu_inplace(h.data());
  nn::Tensor out = nn::conv1d_forward(b.conv2, h);
  if (b.shortcut) {
    const nn::Tensor s = nn::conv1d_forward(*b.shortcut, x);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s[i];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
  }
  nn::relu_inplace(out.data());
  if (trace) {
    trace->x = x;
    trace->h = std::move(h);
    trace->out = out;
  }
  return out;
}

nn::Tensor block_backward(const ResidualBlock& b, const BlockTrace& tr, nn::Tensor g, ResidualBlock& gb) {
  nn::relu_backward_inplace(tr.out.data(), g.data());
  nn::Tensor gh = nn::conv1d_backward(b.conv2, tr.h, g, gb.conv2);
  nn::relu_backward_inplace(tr.h.data(), gh.data());
  nn::Tensor gx = nn::conv1d_backward(b.conv1, tr.x, gh, gb.conv1);
  if (b.shortcut) {
    const nn::Tensor gs = nn::conv1d_backward(*b.shortcut, tr.x, g, *gb.shortcut);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gs[i];
  } else {
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  }
  return gx;
}

nn::Tensor stem_forward(const Parameters& p, const iq::IqMatrix& iq) {
  nn::Tensor y = nn::conv1d_forward(p.stem, input_tensor(iq));
  nn::relu_inplace(y.data());
  return y;
}

nn::Tensor stage_forward(const Stage& s, nn::Tensor x) {
  for (const auto& b : s.blocks) x = block_forward(b, x, nullptr);
  return x;
}

ProbVector head_probs(const nn::DenseLayer& head, const nn::Tensor& features) {
  const auto pooled = nn::global_avg_pool(features);
  return nn::softmax_probs(nn::dense_forward(head, pooled));
}

struct SampleTrace {
  nn::Tensor input;
  nn::Tensor stem_out;
  std::array<std::array<BlockTrace, 2>, kNumStages> blocks;
  std::vector<double> pooled;
};

// Forward with traces, then backprop cross-entropy scaled by `weight` into
// `grad` (stem, stages, fe head). Returns (loss, correct).
std::pair<double, bool> backprop_fe(const Parameters& p, Parameters& grad, const iq::IqMatrix& iq,
                                    std::size_t label, double weight) {
  SampleTrace tr;
  tr.input = input_tensor(iq);
  tr.stem_out = nn::conv1d_forward(p.stem, tr.input);
  nn::relu_inplace(tr.stem_out.data());
  nn::Tensor x = tr.stem_out;
  for (int s = 0; s < kNumStages; ++s) {
    for (int b = 0; b < 2; ++b) x = block_forward(p.stages[s].blocks[b], x, &tr.blocks[s][b]);
  }
  tr.pooled = nn::global_avg_pool(x);
  const auto logits = nn::dense_forward(p.fe_head, tr.pooled);
  const auto probs = nn::softmax(logits);
  const double loss = nn::cross_entropy(probs, label);
  const bool correct = argmax(probs) == label;

  std::vector<double> g_logits(probs.size());
  for (std::size_t c = 0; c < probs.size(); ++c) g_logits[c] = weight * (probs[c] - (c == label ? 1.0 : 0.0));
  const auto g_pooled = nn::dense_backward(p.fe_head, tr.pooled, g_logits, grad.fe_head);
  nn::Tensor g = nn::global_avg_pool_backward(g_pooled, x.dim(1));
  for (int s = kNumStages - 1; s >= 0; --s) {
    for (int b = 1; b >= 0; --b) {
      g = block_backward(p.stages[s].blocks[b], tr.blocks[s][b], std::move(g), grad.stages[s].blocks[b]);
    }
  }
  nn::relu_backward_inplace(tr.stem_out.data(), g.data());
  nn::conv1d_backward(p.stem, tr.input, g, grad.stem);
  return {loss, correct};
}

std::vector<nn::ParamSlot> slots_for(Parameters& values, const Parameters& grads, unsigned groups) {
  auto v = values.named(groups);
  auto g = grads.named(groups);
  std::vector<nn::ParamSlot> slots;
  slots.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) slots.push_back({v[i].first, v[i].second, g[i].second});
  return slots;
}

void zero(Parameters& grads) {
  for (auto& [name, t] : grads.named(kAllParams)) t->fill(0.0);
}

template <typename P, typename T>
std::vector<std::pair<std::string, T*>> named_impl(P& p, unsigned groups) {
  std::vector<std::pair<std::string, T*>> out;
  auto conv = [&](const std::string& prefix, auto& c) {
    out.emplace_back(prefix + ".kernel", &c.kernel);
    out.emplace_back(prefix + ".bias", &c.bias);
  };
  if (groups & kStem) conv("stem", p.stem);
  if (groups & kStages) {
    for (int s = 0; s < kNumStages; ++s) {
      for (int b = 0; b < 2; ++b) {
        auto& blk = p.stages[s].blocks[b];
        const std::string prefix = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
        conv(prefix + ".conv1", blk.conv1);
        conv(prefix + ".conv2", blk.conv2);
        if (blk.shortcut) conv(prefix + ".shortcut", *blk.shortcut);
      }
    }
  }
  if (groups & kFeHead) {
    out.emplace_back("fe_head.weight", &p.fe_head.weight);
    out.emplace_back("fe_head.bias", &p.fe_head.bias);
  }
  if (groups & kEeHead) {
    out.emplace_back("ee_head.weight", &p.ee_head.weight);
    out.emplace_back("ee_head.bias", &p.ee_head.bias);
  }
  return out;
}

std::size_t input_length_of_stage(int stage) {
  // 128 into stages 1 and 2, 64 into stage 3.
  return stage <= 2 ? iq::kFrameLen : iq::kFrameLen / 2;
}

}  // namespace

void ArchConfig::validate() const {
  if (exit_point < 1 || exit_point > kNumStages) throw PreconditionError("exit point must be 1, 2 or 3");
  for (auto w : widths) {
    if (w == 0) throw PreconditionError("stage widths must be positive");
  }
  if (stem_kernel % 2 == 0 || stage_kernel % 2 == 0) throw PreconditionError("kernels must be odd");
}

Parameters Parameters::zeros_like() const {
  Parameters z = *this;
  for (auto& [name, t] : z.named(kAllParams)) t->fill(0.0);
  return z;
}

std::vector<std::pair<std::string, nn::Tensor*>> Parameters::named(unsigned groups) {
  return named_impl<Parameters, nn::Tensor>(*this, groups);
}

std::vector<std::pair<std::string, const nn::Tensor*>> Parameters::named(unsigned groups) const {
  return named_impl<const Parameters, const nn::Tensor>(*this, groups);
}

AmcModel AmcModel::create(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  AmcModel m;
  m.arch_ = arch;
  Rng rng(derive_seed(seed, 0));
  auto& p = m.params_;
  p.stem = nn::ConvLayer::he_init(arch.widths[0], 2, arch.stem_kernel, 1, arch.stem_kernel / 2, rng);
  std::size_t in = arch.widths[0];
  for (int s = 0; s < kNumStages; ++s) {
    const std::size_t out = arch.widths[s];
    const std::size_t stride = s == 0 ? 1 : 2;
    p.stages[s].blocks[0] = make_block(in, out, arch.stage_kernel, stride, rng);
    p.stages[s].blocks[1] = make_block(out, out, arch.stage_kernel, 1, rng);
    in = out;
  }
  p.fe_head = nn::DenseLayer::he_init(kNumClasses, arch.widths[kNumStages - 1], rng);
  Rng ee_rng(derive_seed(seed, 1));
  p.ee_head = nn::DenseLayer::he_init(kNumClasses, arch.widths[arch.exit_point - 1], ee_rng);
  m.stamp_ = next_stamp();
  return m;
}

Parameters& AmcModel::mutable_params() {
  ++version_;
  stamp_ = next_stamp();
  return params_;
}

AmcModel AmcModel::with_exit_point(int exit_point, std::uint64_t seed) const {
  AmcModel m = *this;
  m.arch_.exit_point = exit_point;
  m.arch_.validate();
  Rng ee_rng(derive_seed(seed, 1));
  m.mutable_params().ee_head = nn::DenseLayer::he_init(kNumClasses, arch_.widths[exit_point - 1], ee_rng);
  return m;
}

std::uint32_t AmcModel::checksum(unsigned groups) const {
  std::uint32_t crc = 0;
  for (const auto& [name, t] : params_.named(groups)) {
    const auto d = t->data();
    crc = crc32({reinterpret_cast<const std::uint8_t*>(d.data()), d.size() * sizeof(double)}, crc);
  }
  return crc;
}

std::size_t AmcModel::parameter_count(unsigned groups) const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_.named(groups)) n += t->size();
  return n;
}

std::vector<nn::NamedTensor> AmcModel::export_blocks(unsigned groups) const {
  std::vector<nn::NamedTensor> out;
  for (const auto& [name, t] : params_.named(groups)) out.push_back({name, *t});
  return out;
}

void AmcModel::import_blocks(std::span<const nn::NamedTensor> blocks, unsigned groups) {
  for (auto& [name, t] : mutable_params().named(groups)) *t = nn::find_block(blocks, name, t->shape());
}

void AmcModel::round_to_f32() {
  for (auto& [name, t] : mutable_params().named(kAllParams)) nn::round_to_f32(*t);
}

ExitForward forward_to_exit(const AmcModel& model, const iq::IqMatrix& iq) {
  const auto& p = model.params();
  nn::Tensor x = stem_forward(p, iq);
  for (int s = 0; s < model.exit_point(); ++s) x = stage_forward(p.stages[s], std::move(x));
  ExitForward out;
  out.pair.p_e = head_probs(p.ee_head, x);
  out.pair.yhat_e = argmax(out.pair.p_e);
  out.cache = {model.stamp(), model.exit_point(), std::move(x)};
  return out;
}

ProbVector forward_final(const AmcModel& model, const ExitCache& cache) {
  if (cache.stamp != model.stamp() || cache.exit_point != model.exit_point())
    throw StaleCacheError("exit cache was produced by a different model state");
  const auto& p = model.params();
  nn::Tensor x = cache.features;
  for (int s = model.exit_point(); s < kNumStages; ++s) x = stage_forward(p.stages[s], std::move(x));
  return head_probs(p.fe_head, x);
}

ExitPair forward_full(const AmcModel& model, const iq::IqMatrix& iq) {
  const auto& p = model.params();
  ExitPair out;
  nn::Tensor x = stem_forward(p, iq);
  for (int s = 0; s < kNumStages; ++s) {
    x = stage_forward(p.stages[s], std::move(x));
    if (s + 1 == model.exit_point()) {
      out.p_e = head_probs(p.ee_head, x);
      out.yhat_e = argmax(out.p_e);
    }
  }
  out.p_f = head_probs(p.fe_head, x);
  out.yhat_f = argmax(*out.p_f);
  return out;
}

std::vector<double> exit_features(const AmcModel& model, const iq::IqMatrix& iq) {
  const auto& p = model.params();
  nn::Tensor x = stem_forward(p, iq);
  for (int s = 0; s < model.exit_point(); ++s) x = stage_forward(p.stages[s], std::move(x));
  return nn::global_avg_pool(x);
}

double fe_loss_backward(const Parameters& params, Parameters& grad, const iq::IqMatrix& iq, std::size_t label) {
  return backprop_fe(params, grad, iq, label, 1.0).first;
}

double fe_loss(const Parameters& params, const iq::IqMatrix& iq, std::size_t label) {
  nn::Tensor x = stem_forward(params, iq);
  for (int s = 0; s < kNumStages; ++s) x = stage_forward(params.stages[s], std::move(x));
  return nn::cross_entropy(head_probs(params.fe_head, x), label);
}

std::vector<iq::LabeledFrame> gather(const iq::Dataset& data, iq::Split split) {
  std::vector<iq::LabeledFrame> out;
  for (auto i : data.indices(split)) out.push_back(data.frames[i]);
  return out;
}

double accuracy_fe(const AmcModel& model, std::span<const iq::LabeledFrame> frames) {
  if (frames.empty()) return 0.0;
  const auto& p = model.params();
  std::size_t correct = 0;
  for (const auto& f : frames) {
    nn::Tensor x = stem_forward(p, f.iq);
    for (int s = 0; s < kNumStages; ++s) x = stage_forward(p.stages[s], std::move(x));
    correct += argmax(head_probs(p.fe_head, x)) == iq::class_index(f.label);
  }
  return static_cast<double>(correct) / static_cast<double>(frames.size());
}

double accuracy_ee(const AmcModel& model, std::span<const iq::LabeledFrame> frames) {
  if (frames.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& f : frames) correct += forward_to_exit(model, f.iq).pair.yhat_e == iq::class_index(f.label);
  return static_cast<double>(correct) / static_cast<double>(frames.size());
}

BackboneTrainResult train_backbone(std::span<const iq::LabeledFrame> train,
                                   std::span<const iq::LabeledFrame> val, const ArchConfig& arch,
                                   const nn::TrainHyper& hyper, const TrainOptions& options) {
  hyper.validate();
  if (train.empty()) throw PreconditionError("train_backbone: empty train split");
  BackboneTrainResult result{AmcModel::create(arch, hyper.seed), {}, 0};
  AmcModel& model = result.model;
  Parameters grads = model.params().zeros_like();
  nn::Optimizer opt(hyper.optimizer, hyper.learning_rate);
  Rng rng(derive_seed(hyper.seed, 2));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  double best_val = -1.0;
  Parameters best = model.params();

  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      zero(grads);
      for (std::size_t j = start; j < end; ++j) {
        const auto& frame = train[order[j]];
        const auto input = options.augment ? iq::augment(frame, rng) : frame;
        const auto [loss, ok] = backprop_fe(model.params(), grads, input.iq, iq::class_index(frame.label), weight);
        if (!std::isfinite(loss))
          throw NumericError("train_backbone: non-finite loss at epoch " + std::to_string(epoch));
        loss_sum += loss;
        correct += ok;
      }
      const auto slots = slots_for(model.mutable_params(), grads, kBackbone);
      opt.step(slots);
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(train.size());
    log.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    log.val_accuracy = val.empty() ? log.train_accuracy : accuracy_fe(model, val);
    result.log.push_back(log);
    if (options.on_epoch) options.on_epoch(log);
    if (log.val_accuracy > best_val) {
      best_val = log.val_accuracy;
      best = model.params();
      result.best_epoch = epoch;
    }
  }
  if (options.keep_best) model.mutable_params() = best;
  model.round_to_f32();
  return result;
}

BackboneTrainResult train_backbone(const iq::Dataset& data, const ArchConfig& arch,
                                   const nn::TrainHyper& hyper, const TrainOptions& options) {
  const auto train = gather(data, iq::Split::train);
  const auto val = gather(data, iq::Split::val);
  if (val.empty()) throw PreconditionError("train_backbone: dataset has no validation frames");
  return train_backbone(train, val, arch, hyper, options);
}

ExitTrainResult train_exit_branch(const AmcModel& trained, const iq::Dataset& data, const nn::TrainHyper& hyper) {
  hyper.validate();
  const auto train = gather(data, iq::Split::train);
  const auto val = gather(data, iq::Split::val);
  if (train.empty() || val.empty()) throw PreconditionError("train_exit_branch: needs train and val frames");

  ExitTrainResult result{trained, {}, 0};
  AmcModel& model = result.model;
  const std::uint32_t frozen = model.checksum(kBackbone);

  auto features = [&](std::span<const iq::LabeledFrame> frames) {
    std::vector<std::vector<double>> f;
    f.reserve(frames.size());
    for (const auto& fr : frames) f.push_back(exit_features(model, fr.iq));
    return f;
  };
  const auto train_x = features(train);
  const auto val_x = features(val);

  nn::DenseLayer head = model.params().ee_head;
  nn::DenseLayer grad = nn::DenseLayer::zeros(head.out_features(), head.in_features());
  nn::Optimizer opt(hyper.optimizer, hyper.learning_rate);
  Rng rng(derive_seed(hyper.seed, 3));

  auto val_accuracy = [&](const nn::DenseLayer& h) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < val.size(); ++i)
      correct += argmax(nn::dense_forward(h, val_x[i])) == iq::class_index(val[i].label);
    return static_cast<double>(correct) / static_cast<double>(val.size());
  };

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  double best_val = val_accuracy(head);
  nn::DenseLayer best = head;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      grad.weight.fill(0.0);
      grad.bias.fill(0.0);
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t i = order[j];
        const std::size_t label = iq::class_index(train[i].label);
        const auto probs = nn::softmax(nn::dense_forward(head, train_x[i]));
        const double loss = nn::cross_entropy(probs, label);
        if (!std::isfinite(loss)) throw NumericError("train_exit_branch: non-finite loss");
        loss_sum += loss;
        correct += argmax(probs) == label;
        std::vector<double> g(probs.size());
        for (std::size_t c = 0; c < g.size(); ++c) g[c] = weight * (probs[c] - (c == label ? 1.0 : 0.0));
        nn::dense_backward(head, train_x[i], g, grad);
      }
      const std::array<nn::ParamSlot, 2> slots = {nn::ParamSlot{"ee_head.weight", &head.weight, &grad.weight},
                                                  nn::ParamSlot{"ee_head.bias", &head.bias, &grad.bias}};
      opt.step(slots);
    }
    EpochLog log{epoch, loss_sum / static_cast<double>(train.size()),
                 static_cast<double>(correct) / static_cast<double>(train.size()), val_accuracy(head)};
    result.log.push_back(log);
    if (log.val_accuracy > best_val) {
      best_val = log.val_accuracy;
      best = head;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (hyper.patience > 0 && ++since_best >= hyper.patience) {
      break;
    }
  }
  nn::round_to_f32(best.weight);
  nn::round_to_f32(best.bias);
  model.mutable_params().ee_head = best;
  if (model.checksum(kBackbone) != frozen)
    throw FreezeViolation("train_exit_branch modified frozen backbone parameters");
  return result;
}

std::uint64_t stem_macs(const AmcModel& model) { return model.params().stem.macs(iq::kFrameLen); }

std::uint64_t stage_macs(const AmcModel& model, int stage) {
  if (stage < 1 || stage > kNumStages) throw PreconditionError("stage index out of range");
  const auto& s = model.params().stages[stage - 1];
  std::size_t len = input_length_of_stage(stage);
  std::uint64_t macs = 0;
  for (const auto& b : s.blocks) {
    const std::size_t out_len = b.conv1.output_length(len);
    macs += b.conv1.macs(len) + b.conv2.macs(out_len);
    if (b.shortcut) macs += b.shortcut->macs(len);
    len = out_len;
  }
  return macs;
}

CostProfile count_macs(const AmcModel& model, std::uint64_t lbap_macs) {
  CostProfile c;
  c.macs_prefix = stem_macs(model);
  for (int s = 1; s <= kNumStages; ++s) {
    (s <= model.exit_point() ? c.macs_prefix : c.macs_suffix) += stage_macs(model, s);
  }
  c.macs_ee_head = model.params().ee_head.macs();
  c.macs_fe_head = model.params().fe_head.macs();
  c.macs_lbap = lbap_macs;
  return c;
}

double avg_macs(const CostProfile& profile, double forward_fraction, bool uses_lbap) {
  if (!(forward_fraction >= 0.0 && forward_fraction <= 1.0))
    throw PreconditionError("forward fraction must lie in [0, 1]");
  return static_cast<double>(profile.exit_path(uses_lbap)) +
         forward_fraction * static_cast<double>(profile.continuation());
}

double avg_macs(const CostProfile& profile, std::size_t forwarded, std::size_t total, bool uses_lbap) {
  if (total == 0 || forwarded > total) throw PreconditionError("avg_macs: bad sample counts");
  const std::uint64_t sum = total * profile.exit_path(uses_lbap) + forwarded * profile.continuation();
  return static_cast<double>(sum) / static_cast<double>(total);
}

std::string model_manifest(const AmcModel& model) {
  const auto& a = model.arch();
  std::ostringstream os;
  os << "exit_point=" << a.exit_point << "\n";
  os << "widths=" << a.widths[0] << "," << a.widths[1] << "," << a.widths[2] << "\n";
  os << "stem_kernel=" << a.stem_kernel << "\n";
  os << "stage_kernel=" << a.stage_kernel << "\n";
  os << "version=" << model.version() << "\n";
  os << "checksum_backbone=" << hex32(model.checksum(kBackbone)) << "\n";
  os << "checksum_ee_head=" << hex32(model.checksum(kEeHead)) << "\n";
  return os.str();
}

ArchConfig parse_manifest(const std::string& text) {
  ArchConfig a;
  std::istringstream is(text);
  std::string line;
  bool have_widths = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("manifest: malformed line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "exit_point") {
        a.exit_point = std::stoi(value);
      } else if (key == "widths") {
        std::istringstream ws(value);
        std::string item;
        for (auto& w : a.widths) {
          if (!std::getline(ws, item, ',')) throw FormatError("manifest: widths needs 3 values");
          w = std::stoul(item);
        }
        have_widths = true;
      } else if (key == "stem_kernel") {
        a.stem_kernel = std::stoul(value);
      } else if (key == "stage_kernel") {
        a.stage_kernel = std::stoul(value);
      }
    } catch (const std::logic_error&) {
      throw FormatError("manifest: bad value for " + key);
    }
  }
  if (!have_widths) throw FormatError("manifest: missing widths");
  a.validate();
  return a;
}

}  // namespace beacon::backbone
