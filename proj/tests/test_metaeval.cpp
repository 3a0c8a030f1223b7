#include "visrank/metaeval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <doctest.h>

#include "test_util.hpp"

using namespace visrank;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a visrank::Error");
  return ErrorCode::InvalidArgument;
}

PairedScores paired(std::vector<double> human, std::vector<double> metric) {
  PairedScores p;
  for (std::size_t i = 0; i < human.size(); ++i) p.items.push_back("i" + std::to_string(i));
  p.human = std::move(human);
  p.metric = std::move(metric);
  return p;
}

// Independent pair classifier used by the oracles below; ties are
// |a - b| <= eps, matching the definition of a metric-side tie.
int relation_oracle(double a, double b, double eps) {
  if (std::fabs(a - b) <= eps) return 0;
  return a > b ? 1 : -1;
}

double accuracy_oracle(const PairedScores& p, double eps) {
  int agree = 0, total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      agree += relation_oracle(p.human[i], p.human[j], 0.0) ==
                       relation_oracle(p.metric[i], p.metric[j], eps)
                   ? 1
                   : 0;
      ++total;
    }
  }
  return static_cast<double>(agree) / total;
}

}  // namespace

TEST_CASE("pearson") {
  SUBCASE("affine relations give +-1") {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y;
    for (double v : x) y.push_back(2 * v + 1);
    CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> neg;
    for (double v : x) neg.push_back(-v);
    CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("textbook value, frozen from the covariance formula") {
    CHECK(pearson({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("degenerate variance") {
    CHECK(code_of([] { pearson({1, 1, 1}, {1, 2, 3}); }) == ErrorCode::DegenerateVariance);
    CHECK(code_of([] { pearson({1, 2, 3}, {4, 4, 4}); }) == ErrorCode::DegenerateVariance);
    CHECK(code_of([] { pearson({1.0}, {2.0}); }) == ErrorCode::InvalidArgument);
  }
  SUBCASE("invariant under positive affine transforms") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const int m = 3 + static_cast<int>(rng() % 10);
      std::vector<double> x, y;
      for (int i = 0; i < m; ++i) {
        x.push_back((rng() % 1000) / 100.0);
        y.push_back((rng() % 1000) / 100.0);
      }
      x[0] += 0.001;  // avoid accidental constant vectors
      y[0] += 0.002;
      const double scale = 0.5 + (rng() % 100) / 25.0;
      const double shift = (rng() % 100) / 10.0 - 5.0;
      std::vector<double> xt;
      for (double v : x) xt.push_back(scale * v + shift);
      CHECK(pearson(x, y) == doctest::Approx(pearson(xt, y)).epsilon(1e-9));
    }
  }
}

namespace {

// Brute-force tau-b: explicit pair counts plugged into the tie-corrected formula.
double tau_b_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  double concordant = 0, discordant = 0, tie_x = 0, tie_y = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (x[i] == x[j] && y[i] == y[j]) {
        ++tie_x;
        ++tie_y;
      } else if (x[i] == x[j]) {
        ++tie_x;
      } else if (y[i] == y[j]) {
        ++tie_y;
      } else if ((x[i] < x[j] && y[i] < y[j]) || (x[i] > x[j] && y[i] > y[j])) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n0 = static_cast<double>(m * (m - 1)) / 2.0;
  return (concordant - discordant) / std::sqrt((n0 - tie_x) * (n0 - tie_y));
}

}  // namespace

TEST_CASE("kendall tau-b") {
  SUBCASE("monotone sequences") {
    CHECK(kendall_tau_b({1, 2, 3, 4}, {10, 20, 30, 40}) == 1.0);
    CHECK(kendall_tau_b({1, 2, 3, 4}, {40, 30, 20, 10}) == -1.0);
  }
  SUBCASE("tie-corrected value, frozen from the pair-count oracle") {
    CHECK(kendall_tau_b({1, 1, 2, 3}, {1, 2, 2, 3}) == doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("all ties on one side degenerate") {
    CHECK(code_of([] { kendall_tau_b({1, 1, 1}, {1, 2, 3}); }) == ErrorCode::DegenerateAllTies);
    CHECK(code_of([] { kendall_tau_b({1, 2, 3}, {2, 2, 2}); }) == ErrorCode::DegenerateAllTies);
  }
  SUBCASE("matches the brute-force oracle on heavy ties") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
      const int m = 2 + static_cast<int>(rng() % 49);
      std::vector<double> x, y;
      for (int i = 0; i < m; ++i) {
        x.push_back(static_cast<double>(1 + rng() % 5));  // Likert-like, many ties
        y.push_back((rng() % 40) / 10.0);
      }
      const double n0 = m * (m - 1) / 2.0;
      double tx = 0, ty = 0;
      for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
          tx += x[i] == x[j] ? 1 : 0;
          ty += y[i] == y[j] ? 1 : 0;
        }
      }
      if (tx == n0 || ty == n0) continue;
      CHECK(kendall_tau_b(x, y) == doctest::Approx(tau_b_oracle(x, y)).epsilon(1e-12));
    }
  }
}

TEST_CASE("pairwise accuracy") {
  SUBCASE("metric equal to human is perfect at eps 0") {
    const PairedScores p = paired({1, 2, 3, 4.5}, {1, 2, 3, 4.5});
    CHECK(pairwise_accuracy(p, 0.0) == 1.0);
  }
  SUBCASE("single reversed pair") {
    CHECK(pairwise_accuracy(paired({1, 2}, {2, 1}), 0.0) == 0.0);
  }
  SUBCASE("frozen 4-item enumeration oracle") {
    const PairedScores p = paired({1, 1, 3, 5}, {0.1, 0.3, 0.2, 0.9});
    CHECK(pairwise_accuracy(p, 0.15) == 0.5);
    CHECK(pairwise_accuracy(p, 0.15) == accuracy_oracle(p, 0.15));
  }
  SUBCASE("invariant under strictly increasing transforms at eps 0") {
    std::mt19937 rng(29);
    for (int trial = 0; trial < 100; ++trial) {
      const int m = 2 + static_cast<int>(rng() % 12);
      PairedScores p;
      for (int i = 0; i < m; ++i) {
        p.items.push_back("i" + std::to_string(i));
        p.human.push_back(static_cast<double>(1 + rng() % 5));
        p.metric.push_back((rng() % 1000) / 500.0 - 1.0);
      }
      const double base = pairwise_accuracy(p, 0.0);
      PairedScores cubed = p, expd = p, affine = p;
      for (int i = 0; i < m; ++i) {
        cubed.metric[i] = std::pow(p.metric[i], 3.0);
        expd.metric[i] = std::exp(p.metric[i]);
        affine.metric[i] = 3.0 * p.metric[i] + 11.0;
      }
      CHECK(pairwise_accuracy(cubed, 0.0) == base);
      CHECK(pairwise_accuracy(expd, 0.0) == base);
      CHECK(pairwise_accuracy(affine, 0.0) == base);
    }
  }
}

TEST_CASE("tie threshold candidates include zero, diffs, and midpoints") {
  const PairedScores p = paired({1, 2, 3}, {0.1, 0.2, 0.4});
  const auto candidates = tie_threshold_candidates(p);
  // |diffs| = {0.1, 0.2, 0.3}; midpoints 0.15, 0.25
  auto has = [&](double v) {
    return std::any_of(candidates.begin(), candidates.end(),
                       [&](double c) { return std::fabs(c - v) < 1e-15; });
  };
  CHECK(has(0.0));
  CHECK(has(0.1));
  CHECK(has(0.15));
  CHECK(has(0.2));
  CHECK(has(0.25));
  CHECK(has(0.3));
  CHECK(std::is_sorted(candidates.begin(), candidates.end()));
}

TEST_CASE("calibrate_tie_threshold") {
  SUBCASE("exact metric calibrates to eps 0, accuracy 1") {
    const PairedScores p = paired({1, 2, 3, 4}, {1, 2, 3, 4});
    const TieCalibration cal = calibrate_tie_threshold(p);
    CHECK(cal.eps == 0.0);
    CHECK(cal.accuracy == 1.0);
  }
  SUBCASE("never below the accuracy at eps 0") {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      const int m = 2 + static_cast<int>(rng() % 10);
      PairedScores p;
      for (int i = 0; i < m; ++i) {
        p.items.push_back("i" + std::to_string(i));
        p.human.push_back(static_cast<double>(1 + rng() % 5));
        p.metric.push_back((rng() % 100) / 100.0);
      }
      const TieCalibration cal = calibrate_tie_threshold(p);
      CHECK(cal.accuracy >= pairwise_accuracy(p, 0.0));
      // the reported accuracy is reproducible at the reported eps
      CHECK(pairwise_accuracy(p, cal.eps) == cal.accuracy);
    }
  }
  SUBCASE("matches a dense-grid plus candidate-point oracle on small instances") {
    std::mt19937 rng(37);
    for (int trial = 0; trial < 50; ++trial) {
      const int m = 2 + static_cast<int>(rng() % 7);  // M <= 8
      PairedScores p;
      for (int i = 0; i < m; ++i) {
        p.items.push_back("i" + std::to_string(i));
        p.human.push_back(static_cast<double>(1 + rng() % 5));
        p.metric.push_back((rng() % 50) / 50.0);
      }
      // oracle: dense grid over [0, max_diff] plus all diffs and midpoints
      std::vector<double> eps_points{0.0};
      double max_diff = 0.0;
      for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
          const double d = std::fabs(p.metric[i] - p.metric[j]);
          eps_points.push_back(d);
          max_diff = std::max(max_diff, d);
          for (int k = 0; k < m; ++k) {
            for (int l = k + 1; l < m; ++l) {
              eps_points.push_back((d + std::fabs(p.metric[k] - p.metric[l])) / 2.0);
            }
          }
        }
      }
      for (int g = 0; g <= 400; ++g) eps_points.push_back(max_diff * g / 400.0);
      double best = 0.0;
      for (double eps : eps_points) best = std::max(best, accuracy_oracle(p, eps));
      const TieCalibration cal = calibrate_tie_threshold(p);
      CHECK(cal.accuracy == best);
    }
  }
  SUBCASE("accuracy ties resolve to the smallest eps") {
    // metric identical to human: every eps <= smallest gap keeps accuracy 1
    const PairedScores p = paired({1, 3, 5}, {0.2, 0.5, 0.9});
    const TieCalibration cal = calibrate_tie_threshold(p);
    CHECK(cal.accuracy == 1.0);
    CHECK(cal.eps == 0.0);
  }
}

TEST_CASE("krippendorff alpha") {
  SUBCASE("perfect agreement across varied items is exactly 1") {
    RatingTable table;
    for (const char* rater : {"r1", "r2", "r3"}) {
      table.add("i1", rater, 5);
      table.add("i2", rater, 3);
      table.add("i3", rater, 1);
    }
    CHECK(krippendorff_alpha(table, AlphaLevel::ordinal) == 1.0);
    CHECK(krippendorff_alpha(table, AlphaLevel::interval) == 1.0);
  }
  SUBCASE("systematic disagreement is negative: frozen coincidence-matrix value") {
    RatingTable table;
    table.add("i1", "r1", 1);
    table.add("i1", "r2", 5);
    table.add("i2", "r1", 5);
    table.add("i2", "r2", 1);
    CHECK(krippendorff_alpha(table, AlphaLevel::ordinal) ==
          doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(krippendorff_alpha(table, AlphaLevel::interval) ==
          doctest::Approx(-0.5).epsilon(1e-12));
  }
  SUBCASE("items with a single rating are excluded") {
    RatingTable table;
    table.add("i1", "r1", 2);
    table.add("i1", "r2", 2);
    table.add("i2", "r1", 4);
    table.add("i2", "r2", 4);
    table.add("lonely", "r1", 1);  // unpairable, must not affect the result
    RatingTable without;
    without.add("i1", "r1", 2);
    without.add("i1", "r2", 2);
    without.add("i2", "r1", 4);
    without.add("i2", "r2", 4);
    CHECK(krippendorff_alpha(table, AlphaLevel::ordinal) ==
          krippendorff_alpha(without, AlphaLevel::ordinal));
  }
  SUBCASE("insufficient pairable items") {
    RatingTable table;
    table.add("i1", "r1", 3);
    table.add("i2", "r1", 4);
    CHECK(code_of([&] { krippendorff_alpha(table, AlphaLevel::ordinal); }) ==
          ErrorCode::InsufficientPairableValues);
    RatingTable one;
    one.add("i1", "r1", 3);
    one.add("i1", "r2", 4);
    CHECK(code_of([&] { krippendorff_alpha(one, AlphaLevel::ordinal); }) ==
          ErrorCode::InsufficientPairableValues);
  }
  SUBCASE("invariant under rater and item relabeling") {
    std::mt19937 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::vector<int>> matrix(5, std::vector<int>(3));
      for (auto& row : matrix) {
        for (int& v : row) v = 1 + static_cast<int>(rng() % 5);
      }
      RatingTable original, relabeled;
      for (int i = 0; i < 5; ++i) {
        for (int r = 0; r < 3; ++r) {
          original.add("item" + std::to_string(i), "rater" + std::to_string(r), matrix[i][r]);
          relabeled.add("zz" + std::to_string(9 - i), "q" + std::to_string(5 - r),
                        matrix[i][r]);
        }
      }
      CHECK(krippendorff_alpha(original, AlphaLevel::ordinal) ==
            krippendorff_alpha(relabeled, AlphaLevel::ordinal));
      CHECK(krippendorff_alpha(original, AlphaLevel::interval) ==
            krippendorff_alpha(relabeled, AlphaLevel::interval));
    }
  }
}

TEST_CASE("krippendorff alpha reproduces the 3x5 matrix with a missing cell") {
  // raters r1,r2,r3 x items i1..i5; i4 misses r3
  RatingTable table;
  const int matrix[5][3] = {{1, 2, 1}, {3, 3, 4}, {5, 5, 5}, {2, 2, 0}, {4, 5, 4}};
  for (int i = 0; i < 5; ++i) {
    for (int r = 0; r < 3; ++r) {
      if (matrix[i][r] == 0) continue;
      table.add("i" + std::to_string(i + 1), "r" + std::to_string(r + 1), matrix[i][r]);
    }
  }
  // frozen from an exact-fraction coincidence-matrix computation
  CHECK(krippendorff_alpha(table, AlphaLevel::ordinal) ==
        doctest::Approx(3631.0 / 4060.0).epsilon(1e-10));
  CHECK(krippendorff_alpha(table, AlphaLevel::interval) ==
        doctest::Approx(365.0 / 404.0).epsilon(1e-10));
}

namespace {

struct EvalFixture {
  PromptSet prompts;
  std::vector<VisualItem> items;
  RatingTable ratings;
  std::vector<ScoreRecord> scores;

  EvalFixture() {
    const std::vector<std::pair<std::string, std::set<SkillCategory>>> defs = {
        {"p1", {SkillCategory::object}},
        {"p2", {SkillCategory::object, SkillCategory::counting}},
        {"p3", {SkillCategory::scene}},
        {"p4", {SkillCategory::negation}},
    };
    for (const auto& [id, tags] : defs) {
      Prompt p;
      p.id = id;
      p.text = "text " + id;
      p.tags = tags;
      prompts.add(p);
    }
    const int human[8] = {5, 4, 3, 2, 5, 1, 4, 2};
    for (int i = 0; i < 8; ++i) {
      VisualItem item;
      item.item_id = "i" + std::to_string(i);
      item.prompt_id = defs[i % 4].first;
      item.model_id = "m";
      item.media = {"f" + std::to_string(i)};
      items.push_back(item);
      for (const char* rater : {"r1", "r2", "r3"}) {
        ratings.add(item.item_id, rater, human[i]);
      }
    }
  }

  void score_with(const std::function<double(int)>& fn) {
    scores.clear();
    for (int i = 0; i < 8; ++i) {
      scores.push_back({"i" + std::to_string(i), "metric", fn(i), nullptr});
    }
  }
};

}  // namespace

TEST_CASE("evaluate_metric") {
  EvalFixture f;
  SUBCASE("perfect metric gives all statistics 1.0") {
    f.score_with([&](int i) { return mean_rating(f.ratings, "i" + std::to_string(i)); });
    const CorrelationReport report =
        evaluate_metric(f.scores, f.ratings, f.prompts, f.items, "metric");
    CHECK(report.overall.n_items == 8);
    CHECK(report.overall.pairwise_accuracy == 1.0);
    CHECK(*report.overall.pearson == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*report.overall.kendall == doctest::Approx(1.0).epsilon(1e-12));
    // per-skill and per-tier slices are present
    CHECK(report.per_skill.count("object") == 1);
    CHECK(report.per_skill.count("counting") == 1);
    CHECK(report.per_tier.count("basic") == 1);
    CHECK(report.per_tier.count("advanced") == 1);
    CHECK(report.per_skill.at("object").pairwise_accuracy == 1.0);
  }
  SUBCASE("constant metric surfaces degeneracies and ties everything") {
    f.score_with([](int) { return 0.5; });
    const CorrelationReport report =
        evaluate_metric(f.scores, f.ratings, f.prompts, f.items, "metric");
    CHECK_FALSE(report.overall.pearson.has_value());
    CHECK_FALSE(report.overall.kendall.has_value());
    REQUIRE(report.overall.notes.size() >= 2);
    // all metric pairs tie, so accuracy is the fraction of human-tied pairs
    int tied = 0, total = 0;
    const int human[8] = {5, 4, 3, 2, 5, 1, 4, 2};
    for (int i = 0; i < 8; ++i) {
      for (int j = i + 1; j < 8; ++j) {
        tied += human[i] == human[j] ? 1 : 0;
        ++total;
      }
    }
    CHECK(report.overall.pairwise_accuracy ==
          doctest::Approx(static_cast<double>(tied) / total).epsilon(1e-12));
  }
  SUBCASE("items missing one side are dropped and counted") {
    f.score_with([](int i) { return 0.1 * i; });
    f.scores.push_back({"unrated", "metric", 0.9, nullptr});
    f.scores[1].score = std::nullopt;  // error record
    f.scores[1].detail = nlohmann::json{{"error", "x"}};
    const CorrelationReport report =
        evaluate_metric(f.scores, f.ratings, f.prompts, f.items, "metric");
    CHECK(report.overall.n_items == 7);
    CHECK(report.n_scored_without_rating == 1);
    CHECK(report.n_rated_without_score == 1);
    CHECK(report.n_error_records == 1);
  }
  SUBCASE("no overlap raises") {
    f.score_with([](int i) { return 0.1 * i; });
    RatingTable empty;
    empty.add("other", "r1", 3);
    CHECK(code_of([&] {
      evaluate_metric(f.scores, empty, f.prompts, f.items, "metric");
    }) == ErrorCode::NoOverlap);
  }
  SUBCASE("per-prompt granularity pools items of one prompt") {
    f.score_with([](int i) { return 0.1 * i; });
    MetaevalOptions options;
    options.granularity = JoinGranularity::per_prompt;
    const CorrelationReport report =
        evaluate_metric(f.scores, f.ratings, f.prompts, f.items, "metric", options);
    CHECK(report.overall.n_items == 4);  // 4 prompts
    CHECK(report.granularity == "per_prompt");
  }
  SUBCASE("split-half calibration reports held-out accuracy") {
    f.score_with([&](int i) { return mean_rating(f.ratings, "i" + std::to_string(i)); });
    MetaevalOptions options;
    options.calibration = CalibrationMode::split_half;
    const CorrelationReport report =
        evaluate_metric(f.scores, f.ratings, f.prompts, f.items, "metric", options);
    CHECK(report.overall.pairwise_accuracy == 1.0);  // perfect metric stays perfect
    bool noted = false;
    for (const auto& note : report.overall.notes) {
      noted = noted || note.find("held-out") != std::string::npos;
    }
    CHECK(noted);
  }
}

TEST_CASE("kendall and pairwise accuracy agree in sign without ties") {
  std::mt19937 rng(43);
  int checked = 0;
  while (checked < 60) {
    const int m = 3 + static_cast<int>(rng() % 8);
    PairedScores p;
    std::vector<double> hs, ms;
    for (int i = 0; i < m; ++i) {
      hs.push_back(i + (rng() % 100) / 1000.0);  // strictly increasing, tie-free
      ms.push_back((rng() % 10000) / 100.0);
    }
    std::shuffle(hs.begin(), hs.end(), rng);
    std::sort(ms.begin(), ms.end());
    std::shuffle(ms.begin(), ms.end(), rng);
    bool has_tie = false;
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) has_tie = has_tie || ms[i] == ms[j] || hs[i] == hs[j];
    }
    if (has_tie) continue;
    for (int i = 0; i < m; ++i) {
      p.items.push_back("i" + std::to_string(i));
      p.human.push_back(1.0 + 4.0 * (hs[i] - *std::min_element(hs.begin(), hs.end())) /
                                  (*std::max_element(hs.begin(), hs.end()) -
                                   *std::min_element(hs.begin(), hs.end()) + 1e-9));
      p.metric.push_back(ms[i]);
    }
    const double tau = kendall_tau_b(p.human, p.metric);
    const double acc = pairwise_accuracy(p, 0.0);
    // both count concordant vs discordant pairs: tau > 0 iff accuracy > 1/2
    if (tau > 0) CHECK(acc > 0.5);
    if (tau < 0) CHECK(acc < 0.5);
    if (tau == 0) CHECK(acc == 0.5);
    ++checked;
  }
}
