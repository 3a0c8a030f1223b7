#include "visrank/ranking.hpp"

#include <functional>
#include <random>

#include <doctest.h>

#include "test_util.hpp"
#include "visrank/mock_backend.hpp"

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

RankingEpisode episode_of(const std::string& prompt_id, int n) {
  RankingEpisode ep;
  ep.prompt_id = prompt_id;
  ep.model_id = "m";
  for (int i = 0; i < n; ++i) ep.candidates.push_back(prompt_id + "-c" + std::to_string(i));
  return ep;
}

void rate_all(RatingTable& table, const RankingEpisode& ep, const std::vector<int>& ratings) {
  for (std::size_t i = 0; i < ep.candidates.size(); ++i) {
    table.add(ep.candidates[i], "r1", ratings[i]);
  }
}

}  // namespace

TEST_CASE("episodes round-trip and validate") {
  testutil::TempDir dir;
  const std::vector<RankingEpisode> episodes = {episode_of("p1", 9), episode_of("p2", 3)};
  save_episodes(episodes, dir.file("e.jsonl"));
  const auto loaded = load_episodes(dir.file("e.jsonl"));
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].candidates == episodes[0].candidates);
  CHECK(loaded[1].model_id == "m");

  testutil::write_file(dir, "bad.jsonl",
                       R"({"prompt_id":"p","model_id":"m","candidates":["a","a"]})" "\n");
  CHECK(code_of([&] { load_episodes(dir.file("bad.jsonl")); }) == ErrorCode::DuplicateId);
  testutil::write_file(dir, "empty.jsonl",
                       R"({"prompt_id":"p","model_id":"m","candidates":[]})" "\n");
  CHECK(code_of([&] { load_episodes(dir.file("empty.jsonl")); }) == ErrorCode::MalformedRecord);
}

TEST_CASE("validate_episodes checks candidates against the item table") {
  const RankingEpisode ep = episode_of("p1", 2);
  std::vector<VisualItem> items;
  for (const std::string& id : ep.candidates) {
    VisualItem item;
    item.item_id = id;
    item.prompt_id = "p1";
    item.model_id = "m";
    item.media = {id + ".png"};
    items.push_back(item);
  }
  CHECK_NOTHROW(validate_episodes({ep}, items));

  std::vector<VisualItem> wrong_prompt = items;
  wrong_prompt[1].prompt_id = "p2";
  CHECK(code_of([&] { validate_episodes({ep}, wrong_prompt); }) == ErrorCode::MalformedRecord);
  items.pop_back();  // unknown candidate
  CHECK(code_of([&] { validate_episodes({ep}, items); }) == ErrorCode::MalformedRecord);
}

TEST_CASE("select_best takes the max, ties to the lowest index") {
  const RankingEpisode ep = episode_of("p1", 3);
  std::map<std::string, double> scores = {
      {"p1-c0", 0.2}, {"p1-c1", 0.9}, {"p1-c2", 0.9}};
  CHECK(select_best(ep, scores) == "p1-c1");  // first of the tied maxima

  const RankingEpisode single = episode_of("s", 1);
  CHECK(select_best(single, {{"s-c0", 0.4}}) == "s-c0");

  scores.erase("p1-c2");
  CHECK(code_of([&] { select_best(ep, scores); }) == ErrorCode::MissingScore);
}

TEST_CASE("select_best with human means picks an episode maximum") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const RankingEpisode ep = episode_of("p", 9);
    RatingTable ratings;
    std::map<std::string, double> scores;
    double best = 0.0;
    for (const std::string& id : ep.candidates) {
      const int r = 1 + static_cast<int>(rng() % 5);
      ratings.add(id, "r1", r);
      scores[id] = static_cast<double>(r);
      best = std::max(best, static_cast<double>(r));
    }
    CHECK(mean_rating(ratings, select_best(ep, scores)) == best);  // argmax oracle
  }
}

TEST_CASE("select_best is invariant under strictly increasing transforms") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const RankingEpisode ep = episode_of("p", 7);
    std::map<std::string, double> scores, cubed;
    for (const std::string& id : ep.candidates) {
      const double s = (rng() % 1000) / 500.0 - 1.0;
      scores[id] = s;
      cubed[id] = s * s * s;
    }
    CHECK(select_best(ep, scores) == select_best(ep, cubed));
  }
}

TEST_CASE("random and oracle baselines") {
  RatingTable ratings;
  const RankingEpisode ep = episode_of("p", 2);
  ratings.add("p-c0", "r1", 3);
  ratings.add("p-c1", "r1", 5);
  CHECK(random_baseline(ep, ratings) == 4.0);
  CHECK(oracle_baseline(ep, ratings) == 5.0);

  RatingTable flat;
  const RankingEpisode four = episode_of("q", 4);
  rate_all(flat, four, {4, 4, 4, 4});
  CHECK(random_baseline(four, flat) == 4.0);
  CHECK(oracle_baseline(four, flat) == 4.0);

  RatingTable missing;
  missing.add("p-c0", "r1", 3);
  CHECK(code_of([&] { random_baseline(ep, missing); }) == ErrorCode::MissingRating);
  CHECK(code_of([&] { oracle_baseline(ep, missing); }) == ErrorCode::MissingRating);
}

TEST_CASE("oracle baseline dominates random baseline") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 9);
    const RankingEpisode ep = episode_of("p", n);
    RatingTable ratings;
    for (const std::string& id : ep.candidates) {
      for (const char* rater : {"r1", "r2", "r3"}) {
        ratings.add(id, rater, 1 + static_cast<int>(rng() % 5));
      }
    }
    CHECK(oracle_baseline(ep, ratings) >= random_baseline(ep, ratings));
  }
}

TEST_CASE("subset enumeration") {
  CHECK(combination_count(9, 3) == 84);
  CHECK(combination_count(9, 9) == 1);
  CHECK(combination_count(9, 1) == 9);
  std::size_t visits = 0;
  std::set<std::vector<std::size_t>> seen;
  for_each_subset(9, 3, [&](const std::vector<std::size_t>& subset) {
    ++visits;
    CHECK(subset.size() == 3);
    CHECK(std::is_sorted(subset.begin(), subset.end()));
    seen.insert(subset);
  });
  CHECK(visits == 84);
  CHECK(seen.size() == 84);  // all distinct
}

TEST_CASE("subsample_value") {
  RatingTable ratings;
  const RankingEpisode ep = episode_of("p", 3);
  rate_all(ratings, ep, {2, 3, 5});

  SUBCASE("exhaustive oracle selection over pairs averages {3,5,5}") {
    const double v =
        subsample_value(ep, ratings, SelectionStrategy::human_oracle(), 2,
                        SubsampleMode::exhaustive);
    CHECK(v == doctest::Approx(13.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("n = N equals the full-episode value under both modes") {
    for (SubsampleMode mode : {SubsampleMode::prefix, SubsampleMode::exhaustive}) {
      CHECK(subsample_value(ep, ratings, SelectionStrategy::human_oracle(), 3, mode) ==
            oracle_baseline(ep, ratings));
      CHECK(subsample_value(ep, ratings, SelectionStrategy::random_pick(), 3, mode) ==
            random_baseline(ep, ratings));
    }
  }
  SUBCASE("exhaustive n = 1 equals the random baseline") {
    CHECK(subsample_value(ep, ratings, SelectionStrategy::human_oracle(), 1,
                          SubsampleMode::exhaustive) == random_baseline(ep, ratings));
  }
  SUBCASE("prefix mode evaluates the first n candidates") {
    CHECK(subsample_value(ep, ratings, SelectionStrategy::human_oracle(), 2,
                          SubsampleMode::prefix) == 3.0);
  }
  SUBCASE("n out of range") {
    CHECK(code_of([&] {
      subsample_value(ep, ratings, SelectionStrategy::human_oracle(), 4,
                      SubsampleMode::prefix);
    }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("prefix selection score is monotone in n") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const RankingEpisode ep = episode_of("p", 9);
    std::map<std::string, double> scores;
    for (const std::string& id : ep.candidates) scores[id] = (rng() % 1000) / 1000.0;
    double previous = -1.0;
    for (int n = 1; n <= 9; ++n) {
      RankingEpisode prefix = ep;
      prefix.candidates.resize(n);
      const double best = scores.at(select_best(prefix, scores));
      CHECK(best >= previous);
      previous = best;
    }
  }
}

namespace {

struct RankFixture {
  PromptSet prompts;
  std::vector<RankingEpisode> episodes;
  RatingTable ratings;
  ScoreIndex scores;

  explicit RankFixture(int n_episodes, std::uint32_t seed = 19) {
    std::mt19937 rng(seed);
    for (int e = 0; e < n_episodes; ++e) {
      const std::string pid = "p" + std::to_string(e);
      Prompt p;
      p.id = pid;
      p.text = "text " + pid;
      p.tags = e % 2 == 0 ? std::set<SkillCategory>{SkillCategory::object}
                          : std::set<SkillCategory>{SkillCategory::counting};
      prompts.add(p);
      RankingEpisode ep = episode_of(pid, 9);
      ep.model_id = "model-x";
      for (const std::string& id : ep.candidates) {
        for (const char* rater : {"r1", "r2", "r3"}) {
          ratings.add(id, rater, 1 + static_cast<int>(rng() % 5));
        }
      }
      episodes.push_back(std::move(ep));
    }
  }

  void score_with(const std::string& metric, const std::function<double(const std::string&)>& fn) {
    for (const RankingEpisode& ep : episodes) {
      for (const std::string& id : ep.candidates) scores[metric][id] = fn(id);
    }
  }
};

const RankingEvalRow& row_of(const RankEvalResult& result, const std::string& method,
                             const std::string& slice, int n) {
  for (const RankingEvalRow& row : result.rows) {
    if (row.method_id == method && row.slice == slice && row.n_candidates == n) return row;
  }
  REQUIRE(false);
  static RankingEvalRow dummy;
  return dummy;
}

}  // namespace

TEST_CASE("rank_eval: a metric equal to human means reproduces the oracle rows") {
  RankFixture f(8);
  f.score_with("oracle_copy", [&](const std::string& id) { return mean_rating(f.ratings, id); });
  const RankEvalResult result =
      rank_eval(f.episodes, f.ratings, f.scores, f.prompts, {"oracle_copy"});
  for (const char* slice : {"basic", "advanced", "overall"}) {
    for (int n : {3, 9}) {
      CHECK(row_of(result, "oracle_copy", slice, n).mean_selected_rating ==
            row_of(result, "human_oracle", slice, n).mean_selected_rating);
    }
  }
}

TEST_CASE("rank_eval: a constant metric reproduces the random rows exactly") {
  RankFixture f(8);
  f.score_with("flat", [](const std::string&) { return 0.77; });
  const RankEvalResult result = rank_eval(f.episodes, f.ratings, f.scores, f.prompts, {"flat"});
  for (const char* slice : {"basic", "advanced", "overall"}) {
    for (int n : {3, 9}) {
      CHECK(row_of(result, "flat", slice, n).mean_selected_rating ==
            row_of(result, "random", slice, n).mean_selected_rating);
      CHECK(row_of(result, "flat", slice, n).gain_vs_random == 0.0);
    }
  }
}

TEST_CASE("rank_eval rows carry slices, gains, and exclusions") {
  RankFixture f(6);
  f.score_with("m1", [](const std::string& id) { return static_cast<double>(id.size() % 7); });
  // break one episode: drop a rating
  RatingTable incomplete;
  for (const auto& [key, rating] : f.ratings.entries()) {
    if (key.first != "p0-c4") incomplete.add(key.first, key.second, rating);
  }
  const RankEvalResult result = rank_eval(f.episodes, incomplete, f.scores, f.prompts, {"m1"});
  CHECK(result.excluded_episodes == 1);

  const auto& random_row = row_of(result, "random", "overall", 9);
  CHECK(random_row.n_episodes == 5);
  CHECK(random_row.gain_vs_random == 0.0);
  const auto& oracle_row = row_of(result, "human_oracle", "overall", 9);
  CHECK(oracle_row.mean_selected_rating >= random_row.mean_selected_rating);
  CHECK(oracle_row.gain_vs_random ==
        oracle_row.mean_selected_rating - random_row.mean_selected_rating);
  // basic slice holds the even-indexed prompts minus the broken one
  CHECK(row_of(result, "random", "basic", 9).n_episodes == 2);
  CHECK(row_of(result, "random", "advanced", 9).n_episodes == 3);
}

TEST_CASE("rank_eval skips episodes shorter than n for that n only") {
  RankFixture f(4);
  f.episodes[0].candidates.resize(5);  // shorter episode
  f.score_with("m1", [](const std::string&) { return 0.5; });
  const RankEvalResult result = rank_eval(f.episodes, f.ratings, f.scores, f.prompts, {"m1"});
  CHECK(row_of(result, "random", "overall", 3).n_episodes == 4);
  CHECK(row_of(result, "random", "overall", 9).n_episodes == 3);
}

namespace {

BackendHandle mock_handle(BackendKind kind) {
  BackendHandle h;
  h.kind = kind;
  h.endpoint = "mock:7";
  h.model_name = "mock-model";
  return h;
}

}  // namespace

TEST_CASE("run_best_of_n selects the argmax candidate") {
  testutil::TempDir dir;
  auto mock = std::make_shared<MockBackend>(7);
  BackendClient generator(mock_handle(BackendKind::generation), mock);
  BackendClient likelihood(mock_handle(BackendKind::likelihood), mock);
  DatasetScorer scorer;
  scorer.kind = MetricKind::vqascore;
  scorer.likelihood = &likelihood;

  const std::string question = format_question("a red kite");
  const std::string base = (dir.path() / "bon" / "kite").string();
  const double probs[3] = {0.1, 0.7, 0.3};
  for (int i = 0; i < 3; ++i) {
    mock->set_likelihood_fixture(base + "/candidate_" + std::to_string(i) + ".png", question,
                                 "Yes", probs[i]);
  }

  const BestOfNResult result = run_best_of_n("kite", "a red kite", 3, generator, scorer,
                                             (dir.path() / "bon").string());
  CHECK(result.selected_index == 1);
  CHECK(result.candidates.size() == 3);
  CHECK(*result.candidates[1].score == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(std::filesystem::exists(result.selected_path));
  CHECK(std::filesystem::exists(dir.path() / "bon" / "kite" / "provenance.json"));
}

TEST_CASE("run_best_of_n honors the quorum on generation failures") {
  testutil::TempDir dir;
  auto mock = std::make_shared<MockBackend>(7);
  mock->set_image_failure("a blue boat", {1});
  BackendClient generator(mock_handle(BackendKind::generation), mock);
  BackendClient likelihood(mock_handle(BackendKind::likelihood), mock);
  DatasetScorer scorer;
  scorer.kind = MetricKind::vqascore;
  scorer.likelihood = &likelihood;

  // default quorum requires all n candidates
  CHECK(code_of([&] {
    run_best_of_n("boat", "a blue boat", 3, generator, scorer, (dir.path() / "b1").string());
  }) == ErrorCode::GenerationFailure);

  // quorum 2: selection proceeds over the two survivors
  const BestOfNResult result = run_best_of_n("boat", "a blue boat", 3, generator, scorer,
                                             (dir.path() / "b2").string(), 2);
  CHECK(result.candidates[1].path.empty());
  CHECK((result.selected_index == 0 || result.selected_index == 2));

  // n = 1 returns the sole candidate
  const BestOfNResult sole = run_best_of_n("solo", "a lone tree", 1, generator, scorer,
                                           (dir.path() / "b3").string());
  CHECK(sole.selected_index == 0);
}
