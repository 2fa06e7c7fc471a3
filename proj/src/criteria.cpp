#include "beacon/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace beacon::criteria {
namespace {

std::array<double, kNumClasses> sorted_desc(const ProbVector& p) {
  std::array<double, kNumClasses> s = p;
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

}  // namespace

std::string_view kind_name(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::entropy: return "entropy";
    case ScoreKind::msp: return "msp";
    case ScoreKind::margin: return "margin";
    case ScoreKind::top3: return "top3";
    case ScoreKind::gini: return "gini";
    case ScoreKind::beacon: return "beacon";
  }
  return "?";
}

ScoreKind parse_kind(std::string_view name) {
  for (auto k : kAllKinds)
    if (kind_name(k) == name) return k;
  throw UsageError("unknown criterion: " + std::string(name));
}

ScoreRange score_range(ScoreKind kind) {
  const double c = static_cast<double>(kNumClasses);
  switch (kind) {
    case ScoreKind::msp:
    case ScoreKind::gini: return {0.0, 1.0 - 1.0 / c};
    case ScoreKind::top3: return {0.0, 1.0 - 3.0 / c};
    default: return {0.0, 1.0};
  }
}

double score_entropy(const ProbVector& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h / std::log(static_cast<double>(kNumClasses));
}

double score_msp(const ProbVector& p) { return 1.0 - *std::max_element(p.begin(), p.end()); }

double score_margin(const ProbVector& p) {
  const auto s = sorted_desc(p);
  return 1.0 - (s[0] - s[1]);
}

double score_top3(const ProbVector& p) {
  const auto s = sorted_desc(p);
  return 1.0 - (s[0] + s[1] + s[2]);
}

double score_gini(const ProbVector& p) {
  double sq = 0.0;
  for (double v : p) sq += v * v;
  return 1.0 - sq;
}

double score_beacon(const ProbVector& p, const lbap::LbapModel& model) {
  if (!model.trained) throw PreconditionError("beacon score needs a trained LBAP");
  return lbap::lbap_forward(model, p);
}

double score(ScoreKind kind, const ProbVector& p, const lbap::LbapModel* model) {
  switch (kind) {
    case ScoreKind::entropy: return score_entropy(p);
    case ScoreKind::msp: return score_msp(p);
    case ScoreKind::margin: return score_margin(p);
    case ScoreKind::top3: return score_top3(p);
    case ScoreKind::gini: return score_gini(p);
    case ScoreKind::beacon:
      if (model == nullptr) throw PreconditionError("beacon score needs an LBAP model");
      return score_beacon(p, *model);
  }
  throw PreconditionError("invalid score kind");
}

std::vector<double> score_all(ScoreKind kind, std::span<const ProbVector> probs,
                              const lbap::LbapModel* model) {
  std::vector<double> out;
  out.reserve(probs.size());
  for (const auto& p : probs) out.push_back(score(kind, p, model));
  return out;
}

Threshold percentile_threshold(std::span<const double> scores, double q, ScoreKind kind) {
  if (scores.empty()) throw PreconditionError("percentile_threshold: empty score list");
  if (!(q >= 0.0 && q <= 100.0)) throw PreconditionError("percentile_threshold: q outside [0,100]");
  std::vector<double> sorted(scores.begin(), scores.end());
  for (double s : sorted)
    if (std::isnan(s)) throw NumericError("percentile_threshold: NaN score");
  std::sort(sorted.begin(), sorted.end());

  const std::size_t n = sorted.size();
  std::size_t k = 0;
  if (q == std::floor(q)) {
    const auto qi = static_cast<std::size_t>(q);
    k = (qi * n + 99) / 100;
  } else {
    k = std::min(n, static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) / 100.0)));
  }

  Threshold t{kind, q, 0.0};
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (k == 0) t.value = -inf;
  else if (k >= n) t.value = inf;
  else t.value = sorted[k];
  return t;
}

Decision decide(double score, const Threshold& t) {
  return score < t.value ? Decision::exit : Decision::forward;
}

}  // namespace beacon::criteria
