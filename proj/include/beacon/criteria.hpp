#pragma once

// Exit criteria: five confidence scores over the early-exit probability
// vector, the LBAP benefit score, percentile thresholds and the exit rule.
// Every score is oriented so that a low value favours exiting.

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "beacon/common.hpp"
#include "beacon/lbap.hpp"

namespace beacon::criteria {

enum class ScoreKind : std::uint8_t { entropy, msp, margin, top3, gini, beacon };

inline constexpr std::array<ScoreKind, 6> kAllKinds = {ScoreKind::entropy, ScoreKind::msp,
                                                       ScoreKind::margin,  ScoreKind::top3,
                                                       ScoreKind::gini,    ScoreKind::beacon};
inline constexpr std::array<ScoreKind, 5> kBaselineKinds = {ScoreKind::entropy, ScoreKind::msp,
                                                            ScoreKind::margin, ScoreKind::top3,
                                                            ScoreKind::gini};

std::string_view kind_name(ScoreKind kind);
/// Throws UsageError for unknown names.
ScoreKind parse_kind(std::string_view name);

struct ScoreRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// Closed range each score can take for a 10-class simplex point.
ScoreRange score_range(ScoreKind kind);

/// Normalized entropy; zero probabilities contribute nothing.
double score_entropy(const ProbVector& p);
double score_msp(const ProbVector& p);
double score_margin(const ProbVector& p);
double score_top3(const ProbVector& p);
double score_gini(const ProbVector& p);
/// LBAP benefit score in eval mode. Throws PreconditionError if the model is untrained.
double score_beacon(const ProbVector& p, const lbap::LbapModel& model);

/// Dispatch; `model` is needed only for ScoreKind::beacon.
double score(ScoreKind kind, const ProbVector& p, const lbap::LbapModel* model = nullptr);
std::vector<double> score_all(ScoreKind kind, std::span<const ProbVector> probs,
                              const lbap::LbapModel* model = nullptr);

struct Threshold {
  ScoreKind kind = ScoreKind::entropy;
  double percentile = 0.0;
  double value = 0.0;
};

/// Cutoff such that ceil(q n / 100) reference scores (fewer when the boundary
/// is tied) fall strictly below it. q = 0 gives -inf, q = 100 gives +inf.
Threshold percentile_threshold(std::span<const double> scores, double q,
                               ScoreKind kind = ScoreKind::entropy);

enum class Decision : std::uint8_t { exit, forward };

/// Exit iff score < t.value; ties forward.
Decision decide(double score, const Threshold& t);

}  // namespace beacon::criteria
