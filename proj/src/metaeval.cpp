#include "visrank/metaeval.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace visrank {

void PairedScores::validate() const {
  if (items.size() != human.size() || items.size() != metric.size()) {
    raise(ErrorCode::InvalidArgument, "paired score vectors differ in length");
  }
  if (items.size() < 2) {
    raise(ErrorCode::InvalidArgument, "paired scores need at least 2 items");
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!std::isfinite(human[i]) || !std::isfinite(metric[i])) {
      raise(ErrorCode::InvalidArgument, "non-finite score for item " + items[i]);
    }
    if (human[i] < 1.0 || human[i] > 5.0) {
      raise(ErrorCode::InvalidArgument, "human rating outside [1,5] for item " + items[i]);
    }
  }
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    raise(ErrorCode::InvalidArgument, "pearson needs two equal-length vectors, length >= 2");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    raise(ErrorCode::DegenerateVariance, "constant vector has no defined correlation");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    raise(ErrorCode::InvalidArgument, "kendall needs two equal-length vectors, length >= 2");
  }
  const std::size_t m = x.size();
  std::size_t concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0) ++tied_x;
      if (dy == 0.0) ++tied_y;
      if (dx == 0.0 || dy == 0.0) continue;
      if ((dx > 0.0) == (dy > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const std::size_t n0 = m * (m - 1) / 2;
  if (tied_x == n0 || tied_y == n0) {
    raise(ErrorCode::DegenerateAllTies, "all pairs tied on one side");
  }
  const double denom = std::sqrt(static_cast<double>(n0 - tied_x)) *
                       std::sqrt(static_cast<double>(n0 - tied_y));
  const double tau =
      (static_cast<double>(concordant) - static_cast<double>(discordant)) / denom;
  return std::clamp(tau, -1.0, 1.0);
}

namespace {

enum class Relation { lower, tie, higher };

inline Relation classify(double a, double b, double eps) {
  const double d = a - b;
  if (std::fabs(d) <= eps) return Relation::tie;
  return d > 0.0 ? Relation::higher : Relation::lower;
}

}  // namespace

double pairwise_accuracy(const PairedScores& p, double eps_metric) {
  p.validate();
  if (eps_metric < 0.0) raise(ErrorCode::InvalidArgument, "eps_metric must be >= 0");
  const std::size_t m = p.size();
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const Relation h = classify(p.human[i], p.human[j], 0.0);
      const Relation s = classify(p.metric[i], p.metric[j], eps_metric);
      agree += h == s ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(total);
}

std::vector<double> tie_threshold_candidates(const PairedScores& p) {
  std::vector<double> diffs;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      diffs.push_back(std::fabs(p.metric[i] - p.metric[j]));
    }
  }
  std::sort(diffs.begin(), diffs.end());
  diffs.erase(std::unique(diffs.begin(), diffs.end()), diffs.end());

  std::vector<double> candidates;
  candidates.push_back(0.0);
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (i > 0) candidates.push_back(0.5 * (diffs[i - 1] + diffs[i]));
    candidates.push_back(diffs[i]);
  }
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  return candidates;
}

TieCalibration calibrate_tie_threshold(const PairedScores& p) {
  p.validate();
  TieCalibration best;
  best.eps = 0.0;
  best.accuracy = pairwise_accuracy(p, 0.0);
  for (double eps : tie_threshold_candidates(p)) {
    const double acc = pairwise_accuracy(p, eps);
    if (acc > best.accuracy) {  // ties keep the smallest eps
      best.accuracy = acc;
      best.eps = eps;
    }
  }
  return best;
}

double krippendorff_alpha(const RatingTable& table, AlphaLevel level) {
  // Units with at least two ratings, as the statistic defines pairable values.
  std::vector<std::vector<int>> units;
  for (const std::string& item : table.item_ids()) {
    std::vector<int> ratings = table.ratings_for(item);
    if (ratings.size() >= 2) units.push_back(std::move(ratings));
  }
  if (units.size() < 2) {
    raise(ErrorCode::InsufficientPairableValues,
          "need >= 2 items rated by >= 2 raters, got " + std::to_string(units.size()));
  }

  // Coincidence matrix over the 1..5 Likert values (ordered pairs).
  std::array<std::array<double, 6>, 6> o{};
  for (const auto& unit : units) {
    const double weight = 1.0 / static_cast<double>(unit.size() - 1);
    for (std::size_t i = 0; i < unit.size(); ++i) {
      for (std::size_t j = 0; j < unit.size(); ++j) {
        if (i != j) o[unit[i]][unit[j]] += weight;
      }
    }
  }
  std::array<double, 6> marginal{};
  double n = 0.0;
  for (int c = 1; c <= 5; ++c) {
    for (int k = 1; k <= 5; ++k) marginal[c] += o[c][k];
    n += marginal[c];
  }

  auto delta_sq = [&](int c, int k) -> double {
    if (c == k) return 0.0;
    if (level == AlphaLevel::interval) {
      return static_cast<double>((c - k) * (c - k));
    }
    // ordinal: cumulative marginals between the two ranks
    const int lo = std::min(c, k), hi = std::max(c, k);
    double span = 0.0;
    for (int g = lo; g <= hi; ++g) span += marginal[g];
    span -= 0.5 * (marginal[lo] + marginal[hi]);
    return span * span;
  };

  double observed = 0.0, expected = 0.0;
  for (int c = 1; c <= 5; ++c) {
    for (int k = 1; k <= 5; ++k) {
      observed += o[c][k] * delta_sq(c, k);
      expected += marginal[c] * marginal[k] * delta_sq(c, k);
    }
  }
  observed /= n;
  expected /= n * (n - 1.0);
  if (expected == 0.0) return 1.0;  // no variation anywhere: trivially perfect agreement
  return 1.0 - observed / expected;
}

PairedScores join_scores_and_ratings(const std::vector<ScoreRecord>& scores,
                                     const RatingTable& ratings,
                                     const std::string& metric_id) {
  std::vector<std::pair<std::string, double>> by_item;
  for (const ScoreRecord& r : scores) {
    if (r.metric_id == metric_id && r.ok() && ratings.has_item(r.item_id)) {
      by_item.emplace_back(r.item_id, *r.score);
    }
  }
  std::sort(by_item.begin(), by_item.end());
  PairedScores p;
  for (const auto& [item, score] : by_item) {
    p.items.push_back(item);
    p.human.push_back(mean_rating(ratings, item));
    p.metric.push_back(score);
  }
  return p;
}

namespace {

PairedScores subset(const PairedScores& p, const std::vector<std::size_t>& idx) {
  PairedScores out;
  for (std::size_t i : idx) {
    out.items.push_back(p.items[i]);
    out.human.push_back(p.human[i]);
    out.metric.push_back(p.metric[i]);
  }
  return out;
}

AgreementStats compute_stats(const PairedScores& p, const MetaevalOptions& options) {
  AgreementStats stats;
  stats.n_items = p.size();

  bool split = options.calibration == CalibrationMode::split_half;
  if (split && p.size() >= 4) {
    std::vector<std::size_t> even, odd;
    for (std::size_t i = 0; i < p.size(); ++i) (i % 2 == 0 ? even : odd).push_back(i);
    const TieCalibration cal = calibrate_tie_threshold(subset(p, even));
    stats.tie_threshold = cal.eps;
    stats.pairwise_accuracy = pairwise_accuracy(subset(p, odd), cal.eps);
    stats.notes.push_back("tie threshold calibrated on held-out split");
  } else {
    if (split) stats.notes.push_back("too few items for a split; calibrated in-sample");
    const TieCalibration cal = calibrate_tie_threshold(p);
    stats.tie_threshold = cal.eps;
    stats.pairwise_accuracy = cal.accuracy;
  }

  try {
    stats.pearson = pearson(p.human, p.metric);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateVariance) throw;
    stats.notes.push_back("pearson undefined: DegenerateVariance");
  }
  try {
    stats.kendall = kendall_tau_b(p.human, p.metric);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateAllTies) throw;
    stats.notes.push_back("kendall undefined: DegenerateAllTies");
  }
  return stats;
}

nlohmann::json stats_to_json(const AgreementStats& s) {
  return {{"n_items", s.n_items},
          {"pairwise_accuracy", s.pairwise_accuracy},
          {"tie_threshold", s.tie_threshold},
          {"pearson", s.pearson ? nlohmann::json(*s.pearson) : nlohmann::json(nullptr)},
          {"kendall", s.kendall ? nlohmann::json(*s.kendall) : nlohmann::json(nullptr)},
          {"notes", s.notes}};
}

}  // namespace

CorrelationReport evaluate_metric(const std::vector<ScoreRecord>& scores,
                                  const RatingTable& ratings, const PromptSet& prompts,
                                  const std::vector<VisualItem>& items,
                                  const std::string& metric_id,
                                  const MetaevalOptions& options) {
  CorrelationReport report;
  report.metric_id = metric_id;
  report.granularity =
      options.granularity == JoinGranularity::per_item ? "per_item" : "per_prompt";

  std::map<std::string, std::string> prompt_of;
  for (const VisualItem& item : items) prompt_of[item.item_id] = item.prompt_id;

  std::set<std::string> scored_items;
  for (const ScoreRecord& r : scores) {
    if (r.metric_id != metric_id) continue;
    if (!r.ok()) {
      ++report.n_error_records;
      continue;
    }
    scored_items.insert(r.item_id);
    if (!ratings.has_item(r.item_id)) ++report.n_scored_without_rating;
  }
  for (const std::string& rated : ratings.item_ids()) {
    if (!scored_items.count(rated)) ++report.n_rated_without_score;
  }

  PairedScores joined = join_scores_and_ratings(scores, ratings, metric_id);

  // The prompt each pair belongs to, for skill slicing (the pair id is the
  // prompt itself under per-prompt granularity).
  std::vector<std::string> pair_prompt;
  if (options.granularity == JoinGranularity::per_prompt) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < joined.size(); ++i) {
      auto it = prompt_of.find(joined.items[i]);
      if (it != prompt_of.end()) groups[it->second].push_back(i);
    }
    PairedScores pooled;
    for (const auto& [prompt_id, idx] : groups) {
      double h = 0.0, s = 0.0;
      for (std::size_t i : idx) {
        h += joined.human[i];
        s += joined.metric[i];
      }
      pooled.items.push_back(prompt_id);
      pooled.human.push_back(h / static_cast<double>(idx.size()));
      pooled.metric.push_back(s / static_cast<double>(idx.size()));
      pair_prompt.push_back(prompt_id);
    }
    joined = std::move(pooled);
  } else {
    for (const std::string& item : joined.items) {
      auto it = prompt_of.find(item);
      pair_prompt.push_back(it == prompt_of.end() ? "" : it->second);
    }
  }

  if (joined.size() < 2) {
    raise(ErrorCode::NoOverlap, "scores and ratings share " +
                                    std::to_string(joined.size()) + " item(s); need >= 2");
  }

  report.overall = compute_stats(joined, options);

  auto slice_stats = [&](const SkillSelector& selector) -> std::optional<AgreementStats> {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < joined.size(); ++i) {
      const Prompt* prompt = prompts.find(pair_prompt[i]);
      if (prompt && selector.matches(*prompt)) idx.push_back(i);
    }
    if (idx.size() < 2) return std::nullopt;
    return compute_stats(subset(joined, idx), options);
  };

  for (SkillCategory category : all_skill_categories()) {
    SkillSelector selector;
    selector.category = category;
    if (auto stats = slice_stats(selector)) {
      report.per_skill.emplace(to_string(category), std::move(*stats));
    }
  }
  for (SkillTier tier : {SkillTier::basic, SkillTier::advanced}) {
    SkillSelector selector;
    selector.tier = tier;
    if (auto stats = slice_stats(selector)) {
      report.per_tier.emplace(to_string(tier), std::move(*stats));
    }
  }
  return report;
}

nlohmann::json CorrelationReport::to_json() const {
  nlohmann::json skills = nlohmann::json::object();
  for (const auto& [name, stats] : per_skill) skills[name] = stats_to_json(stats);
  nlohmann::json tiers = nlohmann::json::object();
  for (const auto& [name, stats] : per_tier) tiers[name] = stats_to_json(stats);
  return {{"metric_id", metric_id},
          {"kendall_variant", kendall_variant},
          {"granularity", granularity},
          {"overall", stats_to_json(overall)},
          {"per_skill", skills},
          {"per_tier", tiers},
          {"n_scored_without_rating", n_scored_without_rating},
          {"n_rated_without_score", n_rated_without_score},
          {"n_error_records", n_error_records}};
}

}  // namespace visrank
