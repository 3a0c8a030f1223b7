#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "visrank/backend.hpp"
#include "visrank/dataset.hpp"
#include "visrank/scorers.hpp"

namespace visrank {

// N candidates generated for one prompt by one model, in generation order.
struct RankingEpisode {
  std::string prompt_id;
  std::string model_id;
  std::vector<std::string> candidates;  // distinct item ids, N >= 1
};

std::vector<RankingEpisode> load_episodes(const std::string& path);
void save_episodes(const std::vector<RankingEpisode>& episodes, const std::string& path);

// Every candidate must be a known item referencing the episode's prompt.
void validate_episodes(const std::vector<RankingEpisode>& episodes,
                       const std::vector<VisualItem>& items);  // MalformedRecord

// metric_id -> item_id -> score, from ok records only.
using ScoreIndex = std::map<std::string, std::map<std::string, double>>;
ScoreIndex build_score_index(const std::vector<ScoreRecord>& records);

// Candidate with the maximum score; ties go to the lowest candidate index
// (generation order). Throws MissingScore.
std::string select_best(const RankingEpisode& episode,
                        const std::map<std::string, double>& scores_by_item);

// Expected rating of a uniformly random pick: mean over candidates of the
// mean rating. Throws MissingRating.
double random_baseline(const RankingEpisode& episode, const RatingTable& ratings);

// Upper bound: max over candidates of the mean rating. Throws MissingRating.
double oracle_baseline(const RankingEpisode& episode, const RatingTable& ratings);

enum class SubsampleMode { prefix, exhaustive };
SubsampleMode subsample_mode_from_string(const std::string& name);  // ConfigError

// How the evaluated candidate is chosen within a (sub)set of candidates.
// Metric selection averages the ratings of score-tied argmax candidates, so
// the expectation is deterministic and free of tie-break bias.
struct SelectionStrategy {
  enum class Kind { random_pick, human_oracle, by_metric } kind = Kind::random_pick;
  const std::map<std::string, double>* scores = nullptr;  // by_metric only

  static SelectionStrategy random_pick() { return {Kind::random_pick, nullptr}; }
  static SelectionStrategy human_oracle() { return {Kind::human_oracle, nullptr}; }
  static SelectionStrategy by_metric(const std::map<std::string, double>& scores) {
    return {Kind::by_metric, &scores};
  }
};

// Visits every n-element index subset of {0..total-1} in lexicographic order.
void for_each_subset(std::size_t total, std::size_t n,
                     const std::function<void(const std::vector<std::size_t>&)>& visit);
std::size_t combination_count(std::size_t total, std::size_t n);

// Expected mean rating of the selected candidate when only n of the
// episode's candidates are available: the first n in generation order
// (prefix) or the exact expectation over all C(N,n) subsets (exhaustive).
double subsample_value(const RankingEpisode& episode, const RatingTable& ratings,
                       const SelectionStrategy& strategy, std::size_t n, SubsampleMode mode);

struct RankingEvalRow {
  std::string method_id;  // "random", "human_oracle", or a metric id
  int n_candidates = 0;
  std::string slice;  // "basic" | "advanced" | "overall"
  double mean_selected_rating = 0.0;
  double gain_vs_random = 0.0;
  std::size_t n_episodes = 0;
};

struct RankEvalOptions {
  std::vector<int> n_values = {3, 9};
  SubsampleMode mode = SubsampleMode::exhaustive;
};

struct RankEvalResult {
  std::vector<RankingEvalRow> rows;
  std::size_t excluded_episodes = 0;  // incomplete ratings or scores
};

// Evaluates Random, Human-Oracle, and each metric over all episodes, per
// slice and per n. Episodes with missing ratings, or missing scores under
// any evaluated metric, are excluded from every row and counted.
RankEvalResult rank_eval(const std::vector<RankingEpisode>& episodes,
                         const RatingTable& ratings, const ScoreIndex& scores,
                         const PromptSet& prompts, const std::vector<std::string>& metric_ids,
                         const RankEvalOptions& options = {});

struct BestOfNCandidate {
  int index = 0;
  std::string path;   // empty when generation failed
  std::optional<double> score;
  std::string error;  // generation or scoring failure
};

struct BestOfNResult {
  std::string prompt_id;
  int selected_index = -1;
  std::string selected_path;
  std::vector<BestOfNCandidate> candidates;
};

// Black-box best-of-n: generates n candidates, scores each, returns the
// argmax with full provenance persisted under out_dir/<prompt_id>/.
// Fewer than min_quorum usable candidates (default: all n) aborts with
// GenerationFailure.
BestOfNResult run_best_of_n(const std::string& prompt_id, const std::string& prompt_text,
                            int n, const BackendClient& generator, const DatasetScorer& scorer,
                            const std::string& out_dir, int min_quorum = 0);

}  // namespace visrank
