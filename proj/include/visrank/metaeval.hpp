#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "visrank/dataset.hpp"
#include "visrank/scorers.hpp"

namespace visrank {

// Two aligned score vectors over the same items: mean human ratings and one
// metric's scores.
struct PairedScores {
  std::vector<std::string> items;
  std::vector<double> human;   // mean Likert, in [1, 5]
  std::vector<double> metric;

  std::size_t size() const { return items.size(); }
  void validate() const;  // InvalidArgument
};

// Sample Pearson correlation. Requires nonzero variance on both sides.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Kendall tau-b (tie-corrected) by direct O(M^2) pair enumeration.
double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y);

// Fraction of unordered item pairs where the metric agrees with the humans on
// the higher/lower/tie relation. Human ties are exact equalities of mean
// ratings; metric ties are |m_i - m_j| <= eps_metric.
double pairwise_accuracy(const PairedScores& p, double eps_metric);

// All thresholds at which pairwise accuracy can change: 0, every unique
// absolute metric difference, and the midpoints between consecutive ones.
std::vector<double> tie_threshold_candidates(const PairedScores& p);

struct TieCalibration {
  double eps = 0.0;
  double accuracy = 0.0;
};

// Exhaustive search over tie_threshold_candidates; accuracy is piecewise
// constant in eps, so the candidate set attains the global optimum. Ties in
// accuracy resolve to the smallest eps.
TieCalibration calibrate_tie_threshold(const PairedScores& p);

enum class AlphaLevel { ordinal, interval };

// Krippendorff's alpha via the coincidence-matrix formulation. Items with
// fewer than two ratings are excluded; needs >= 2 pairable items.
double krippendorff_alpha(const RatingTable& table, AlphaLevel level);

struct AgreementStats {
  std::size_t n_items = 0;
  double pairwise_accuracy = 0.0;
  double tie_threshold = 0.0;
  std::optional<double> pearson;  // absent when degenerate (constant vector)
  std::optional<double> kendall;  // absent when all pairs tie on one side
  std::vector<std::string> notes;
};

enum class JoinGranularity { per_item, per_prompt };
enum class CalibrationMode { in_sample, split_half };

struct MetaevalOptions {
  JoinGranularity granularity = JoinGranularity::per_item;
  // split_half calibrates eps on even-positioned items (ordered by item id)
  // and reports accuracy on the odd-positioned rest.
  CalibrationMode calibration = CalibrationMode::in_sample;
};

struct CorrelationReport {
  std::string metric_id;
  AgreementStats overall;
  std::map<std::string, AgreementStats> per_skill;  // category name -> stats
  std::map<std::string, AgreementStats> per_tier;   // "basic" / "advanced"
  std::size_t n_scored_without_rating = 0;
  std::size_t n_rated_without_score = 0;
  std::size_t n_error_records = 0;
  std::string kendall_variant = "tau_b";
  std::string granularity = "per_item";

  nlohmann::json to_json() const;  // raw (unscaled) coefficients
};

// Joins one metric's scores and the ratings on item_id (human side = mean
// rating), then computes all statistics overall and per skill slice. Items
// present on only one side are dropped and counted.
CorrelationReport evaluate_metric(const std::vector<ScoreRecord>& scores,
                                  const RatingTable& ratings, const PromptSet& prompts,
                                  const std::vector<VisualItem>& items,
                                  const std::string& metric_id,
                                  const MetaevalOptions& options = {});

// The join used by evaluate_metric, exposed for calibration splits and tests.
PairedScores join_scores_and_ratings(const std::vector<ScoreRecord>& scores,
                                     const RatingTable& ratings,
                                     const std::string& metric_id);

}  // namespace visrank
