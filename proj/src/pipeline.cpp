#include "beacon/pipeline.hpp"

#include <json.hpp>

#include "beacon/binary_io.hpp"
#include "beacon/nn/checkpoint.hpp"

namespace beacon::eval {
namespace {

using nlohmann::json;

json hyper_json(const nn::TrainHyper& h) {
  return {{"learning_rate", h.learning_rate}, {"epochs", h.epochs},       {"batch_size", h.batch_size},
          {"optimizer", std::string(nn::optimizer_name(h.optimizer))},    {"dropout_rate", h.dropout_rate},
          {"seed", h.seed},                   {"patience", h.patience}};
}

// Copies known keys out of `j`, rejecting anything else.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw FormatError("config: " + where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw FormatError("config: " + where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.push_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        throw FormatError("config: unknown key " + where_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::vector<std::string> seen_;
};

void read_hyper(const json& j, const std::string& where, nn::TrainHyper& h) {
  Reader r(j, where);
  r.get("learning_rate", h.learning_rate);
  r.get("epochs", h.epochs);
  r.get("batch_size", h.batch_size);
  std::string opt(nn::optimizer_name(h.optimizer));
  r.get("optimizer", opt);
  h.optimizer = nn::parse_optimizer(opt);
  r.get("dropout_rate", h.dropout_rate);
  r.get("seed", h.seed);
  r.get("patience", h.patience);
  r.finish();
}

json to_json(const RunConfig& c) {
  const auto& d = c.dataset;
  const auto& imp = d.impairments;
  const auto& a = c.arch;
  return {
      {"seed", c.seed},
      {"dataset",
       {{"frames_per_cell", d.frames_per_cell},
        {"snr_grid", d.snr_grid},
        {"samples_per_symbol", d.samples_per_symbol},
        {"seed", d.seed},
        {"impairments",
         {{"phase_offset", imp.phase_offset},
          {"freq_offset", imp.freq_offset},
          {"max_cfo", imp.max_cfo},
          {"timing_jitter", imp.timing_jitter},
          {"max_delay", imp.max_delay}}}}},
      {"arch",
       {{"exit_point", a.exit_point},
        {"widths", a.widths},
        {"stem_kernel", a.stem_kernel},
        {"stage_kernel", a.stage_kernel}}},
      {"backbone_train", hyper_json(c.backbone_train)},
      {"augment", c.augment},
      {"exit_train", hyper_json(c.exit_train)},
      {"lbap_train", hyper_json(c.lbap_train)},
      {"budgets", c.budgets},
      {"accuracy_targets", c.accuracy_targets},
  };
}

std::vector<nn::NamedTensor> load_blocks(const std::filesystem::path& path, const char* what) {
  if (!std::filesystem::exists(path))
    throw IoError(std::string("missing ") + what + " checkpoint " + path.string() + " (run the training step first)");
  return nn::load_checkpoint(path);
}

}  // namespace

nn::TrainHyper RunConfig::default_backbone_hyper() {
  nn::TrainHyper h;
  h.learning_rate = 1e-3;
  h.epochs = 20;
  h.batch_size = 32;
  return h;
}

nn::TrainHyper RunConfig::default_exit_hyper() {
  nn::TrainHyper h;
  h.learning_rate = 1e-2;
  h.epochs = 100;
  h.batch_size = 32;
  h.patience = 15;
  return h;
}

nn::TrainHyper RunConfig::default_lbap_hyper() {
  nn::TrainHyper h;
  h.learning_rate = 1e-3;
  h.epochs = 300;
  h.batch_size = 256;
  h.dropout_rate = lbap::kDefaultDropout;
  h.patience = 10;
  return h;
}

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  dataset.seed = s;
  backbone_train.seed = s;
  exit_train.seed = s;
  lbap_train.seed = s;
}

void RunConfig::validate() const {
  dataset.validate();
  arch.validate();
  backbone_train.validate();
  exit_train.validate();
  lbap_train.validate();
  for (double b : budgets)
    if (!(b > 0.0)) throw PreconditionError("config: budgets must be positive");
  for (double a : accuracy_targets)
    if (!(a >= 0.0 && a <= 1.0)) throw PreconditionError("config: accuracy targets must lie in [0,1]");
}

std::string config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  RunConfig c;
  Reader r(j, "config");
  std::uint64_t seed = c.seed;
  r.get("seed", seed);
  c.apply_seed(seed);
  if (const auto* d = r.child("dataset")) {
    Reader rd(*d, "dataset");
    rd.get("frames_per_cell", c.dataset.frames_per_cell);
    rd.get("snr_grid", c.dataset.snr_grid);
    rd.get("samples_per_symbol", c.dataset.samples_per_symbol);
    rd.get("seed", c.dataset.seed);
    if (const auto* imp = rd.child("impairments")) {
      Reader ri(*imp, "dataset.impairments");
      auto& m = c.dataset.impairments;
      ri.get("phase_offset", m.phase_offset);
      ri.get("freq_offset", m.freq_offset);
      ri.get("max_cfo", m.max_cfo);
      ri.get("timing_jitter", m.timing_jitter);
      ri.get("max_delay", m.max_delay);
      ri.finish();
    }
    rd.finish();
  }
  if (const auto* a = r.child("arch")) {
    Reader ra(*a, "arch");
    ra.get("exit_point", c.arch.exit_point);
    ra.get("widths", c.arch.widths);
    ra.get("stem_kernel", c.arch.stem_kernel);
    ra.get("stage_kernel", c.arch.stage_kernel);
    ra.finish();
  }
  if (const auto* h = r.child("backbone_train")) read_hyper(*h, "backbone_train", c.backbone_train);
  r.get("augment", c.augment);
  if (const auto* h = r.child("exit_train")) read_hyper(*h, "exit_train", c.exit_train);
  if (const auto* h = r.child("lbap_train")) read_hyper(*h, "lbap_train", c.lbap_train);
  r.get("budgets", c.budgets);
  r.get("accuracy_targets", c.accuracy_targets);
  r.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) { return config_from_json(io::read_text(path)); }

std::uint32_t config_hash(const RunConfig& cfg) {
  const std::string s = to_json(cfg).dump();
  return crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

Workspace::Workspace(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path Workspace::exit_head(int k) const { return dir_ / ("exit" + std::to_string(k) + ".ckpt"); }
std::filesystem::path Workspace::lbap(int k) const { return dir_ / ("lbap" + std::to_string(k) + ".ckpt"); }

iq::Dataset run_gen_data(const RunConfig& cfg) { return iq::generate_dataset(cfg.dataset); }

backbone::BackboneTrainResult run_train_backbone(const RunConfig& cfg, const iq::Dataset& data,
                                                 std::function<void(const backbone::EpochLog&)> on_epoch) {
  backbone::TrainOptions opts;
  opts.augment = cfg.augment;
  opts.on_epoch = std::move(on_epoch);
  return backbone::train_backbone(data, cfg.arch, cfg.backbone_train, opts);
}

backbone::ExitTrainResult run_train_exit(const RunConfig& cfg, const backbone::AmcModel& trained,
                                         const iq::Dataset& data, int exit_point) {
  return backbone::train_exit_branch(trained.with_exit_point(exit_point, cfg.exit_train.seed), data,
                                     cfg.exit_train);
}

std::vector<lbap::LbapSample> lbap_samples(std::span<const ExitRecord> records) {
  std::vector<lbap::LbapSample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.p_e, lbap::recoverability_label(r.yhat_e, r.yhat_f, r.label)});
  return out;
}

lbap::LbapTrainResult run_train_lbap(const RunConfig& cfg, const backbone::AmcModel& model,
                                     const iq::Dataset& data) {
  const std::uint32_t frozen = model.checksum(backbone::kAllParams);
  const auto train = lbap_samples(collect_records(model, data, iq::Split::train));
  const auto val = lbap_samples(collect_records(model, data, iq::Split::val));
  auto result = lbap::train_lbap(train, val, cfg.lbap_train);
  if (model.checksum(backbone::kAllParams) != frozen)
    throw backbone::FreezeViolation("LBAP training modified frozen model parameters");
  return result;
}

void save_backbone(const Workspace& ws, const backbone::AmcModel& model) {
  nn::save_checkpoint(ws.backbone(), model.export_blocks(backbone::kBackbone));
}

void save_exit_head(const Workspace& ws, const backbone::AmcModel& model) {
  nn::save_checkpoint(ws.exit_head(model.exit_point()), model.export_blocks(backbone::kEeHead));
}

void save_lbap(const Workspace& ws, int exit_point, const lbap::LbapModel& model) {
  nn::save_checkpoint(ws.lbap(exit_point), model.export_blocks());
}

backbone::AmcModel load_backbone(const Workspace& ws, const RunConfig& cfg) {
  auto model = backbone::AmcModel::create(cfg.arch, cfg.backbone_train.seed);
  model.import_blocks(load_blocks(ws.backbone(), "backbone"), backbone::kBackbone);
  return model;
}

backbone::AmcModel load_model(const Workspace& ws, const RunConfig& cfg, int exit_point) {
  auto arch = cfg.arch;
  arch.exit_point = exit_point;
  auto model = backbone::AmcModel::create(arch, cfg.backbone_train.seed);
  model.import_blocks(load_blocks(ws.backbone(), "backbone"), backbone::kBackbone);
  model.import_blocks(load_blocks(ws.exit_head(exit_point), "early-exit head"), backbone::kEeHead);
  return model;
}

lbap::LbapModel load_lbap(const Workspace& ws, int exit_point) {
  auto m = lbap::LbapModel::zeros();
  m.import_blocks(load_blocks(ws.lbap(exit_point), "LBAP"));
  return m;
}

std::vector<double> Evaluation::val_scores(criteria::ScoreKind kind) const {
  return criteria::score_all(kind, early_probs(val), lbap ? &*lbap : nullptr);
}

std::vector<double> Evaluation::test_scores(criteria::ScoreKind kind) const {
  return criteria::score_all(kind, early_probs(test), lbap ? &*lbap : nullptr);
}

TradeoffCurve Evaluation::curve(criteria::ScoreKind kind) const {
  return sweep_tradeoff(kind, val_scores(kind), test, test_scores(kind), profile);
}

std::vector<criteria::ScoreKind> Evaluation::kinds() const {
  std::vector<criteria::ScoreKind> k;
  if (lbap) k.push_back(criteria::ScoreKind::beacon);
  for (auto kind : criteria::kBaselineKinds) k.push_back(kind);
  return k;
}

Evaluation evaluate(const backbone::AmcModel& model, const lbap::LbapModel* lbap, const iq::Dataset& data) {
  Evaluation e;
  e.exit_point = model.exit_point();
  if (lbap) e.lbap = *lbap;
  e.profile = backbone::count_macs(model, lbap ? lbap::lbap_overhead(*lbap).macs : lbap::kCanonicalMacs);
  e.val = collect_records(model, data, iq::Split::val);
  e.test = collect_records(model, data, iq::Split::test);
  if (e.val.empty() || e.test.empty()) throw PreconditionError("evaluation needs validation and test frames");
  return e;
}

}  // namespace beacon::eval
