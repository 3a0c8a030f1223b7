#include "visrank/ranking.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "visrank/jsonl.hpp"

namespace visrank {

std::vector<RankingEpisode> load_episodes(const std::string& path) {
  std::vector<RankingEpisode> episodes;
  jsonl::for_each_record(path, [&](std::size_t line, const nlohmann::json& record) {
    RankingEpisode ep;
    ep.prompt_id = jsonl::require_string(record, "prompt_id", line);
    ep.model_id = jsonl::require_string(record, "model_id", line);
    if (!record.contains("candidates") || !record["candidates"].is_array() ||
        record["candidates"].empty()) {
      raise(ErrorCode::MalformedRecord,
            "line " + std::to_string(line) + ": candidates must be a non-empty array");
    }
    std::set<std::string> seen;
    for (const auto& c : record["candidates"]) {
      if (!c.is_string()) {
        raise(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": non-string candidate");
      }
      std::string id = c.get<std::string>();
      if (!seen.insert(id).second) {
        raise(ErrorCode::DuplicateId, "candidate '" + id + "' repeats in episode " + ep.prompt_id);
      }
      ep.candidates.push_back(std::move(id));
    }
    episodes.push_back(std::move(ep));
  });
  return episodes;
}

void save_episodes(const std::vector<RankingEpisode>& episodes, const std::string& path) {
  jsonl::Writer out(path);
  for (const RankingEpisode& ep : episodes) {
    out.write({{"prompt_id", ep.prompt_id},
               {"model_id", ep.model_id},
               {"candidates", ep.candidates}});
  }
}

void validate_episodes(const std::vector<RankingEpisode>& episodes,
                       const std::vector<VisualItem>& items) {
  std::map<std::string, const VisualItem*> by_id;
  for (const VisualItem& item : items) by_id[item.item_id] = &item;
  for (const RankingEpisode& ep : episodes) {
    for (const std::string& id : ep.candidates) {
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        raise(ErrorCode::MalformedRecord,
              "episode " + ep.prompt_id + " references unknown item '" + id + "'");
      }
      if (it->second->prompt_id != ep.prompt_id) {
        raise(ErrorCode::MalformedRecord,
              "candidate '" + id + "' belongs to prompt " + it->second->prompt_id +
                  ", not episode prompt " + ep.prompt_id);
      }
    }
  }
}

ScoreIndex build_score_index(const std::vector<ScoreRecord>& records) {
  ScoreIndex index;
  for (const ScoreRecord& r : records) {
    if (r.ok()) index[r.metric_id][r.item_id] = *r.score;
  }
  return index;
}

std::string select_best(const RankingEpisode& episode,
                        const std::map<std::string, double>& scores_by_item) {
  if (episode.candidates.empty()) {
    raise(ErrorCode::InvalidArgument, "episode " + episode.prompt_id + " has no candidates");
  }
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t i = 0; i < episode.candidates.size(); ++i) {
    auto it = scores_by_item.find(episode.candidates[i]);
    if (it == scores_by_item.end()) {
      raise(ErrorCode::MissingScore, "'" + episode.candidates[i] + "'");
    }
    if (i == 0 || it->second > best_score) {
      best = i;
      best_score = it->second;
    }
  }
  return episode.candidates[best];
}

namespace {

std::vector<double> candidate_ratings(const RankingEpisode& episode, const RatingTable& ratings) {
  std::vector<double> out;
  out.reserve(episode.candidates.size());
  for (const std::string& id : episode.candidates) {
    if (!ratings.has_item(id)) raise(ErrorCode::MissingRating, "'" + id + "'");
    out.push_back(mean_rating(ratings, id));
  }
  return out;
}

}  // namespace

double random_baseline(const RankingEpisode& episode, const RatingTable& ratings) {
  const std::vector<double> r = candidate_ratings(episode, ratings);
  double sum = 0.0;
  for (double v : r) sum += v;
  return sum / static_cast<double>(r.size());
}

double oracle_baseline(const RankingEpisode& episode, const RatingTable& ratings) {
  const std::vector<double> r = candidate_ratings(episode, ratings);
  return *std::max_element(r.begin(), r.end());
}

SubsampleMode subsample_mode_from_string(const std::string& name) {
  if (name == "prefix") return SubsampleMode::prefix;
  if (name == "exhaustive") return SubsampleMode::exhaustive;
  raise(ErrorCode::ConfigError, "unknown subsample mode '" + name + "'");
}

void for_each_subset(std::size_t total, std::size_t n,
                     const std::function<void(const std::vector<std::size_t>&)>& visit) {
  if (n == 0 || n > total) {
    raise(ErrorCode::InvalidArgument, "subset size must be in [1, total]");
  }
  std::vector<std::size_t> subset(n);
  for (std::size_t i = 0; i < n; ++i) subset[i] = i;
  while (true) {
    visit(subset);
    // advance to the next lexicographic combination
    std::size_t i = n;
    while (i > 0 && subset[i - 1] == total - n + (i - 1)) --i;
    if (i == 0) return;
    ++subset[i - 1];
    for (std::size_t j = i; j < n; ++j) subset[j] = subset[j - 1] + 1;
  }
}

std::size_t combination_count(std::size_t total, std::size_t n) {
  if (n > total) return 0;
  n = std::min(n, total - n);
  std::size_t result = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    result = result * (total - n + i) / i;
  }
  return result;
}

namespace {

// Value of one candidate subset under a strategy. Metric ties are averaged;
// when every tied rating is identical the common value is returned as-is, so
// a metric that equals the human means reproduces the oracle bit-for-bit.
double subset_value(const std::vector<double>& ratings,
                    const std::vector<double>* scores,
                    const SelectionStrategy& strategy,
                    const std::vector<std::size_t>& subset) {
  switch (strategy.kind) {
    case SelectionStrategy::Kind::random_pick: {
      double sum = 0.0;
      for (std::size_t i : subset) sum += ratings[i];
      return sum / static_cast<double>(subset.size());
    }
    case SelectionStrategy::Kind::human_oracle: {
      double best = ratings[subset[0]];
      for (std::size_t i : subset) best = std::max(best, ratings[i]);
      return best;
    }
    case SelectionStrategy::Kind::by_metric: {
      double best_score = (*scores)[subset[0]];
      for (std::size_t i : subset) best_score = std::max(best_score, (*scores)[i]);
      double sum = 0.0;
      std::size_t count = 0;
      bool all_equal = true;
      double first = 0.0;
      for (std::size_t i : subset) {
        if ((*scores)[i] != best_score) continue;
        if (count == 0) first = ratings[i];
        all_equal = all_equal && ratings[i] == first;
        sum += ratings[i];
        ++count;
      }
      return all_equal ? first : sum / static_cast<double>(count);
    }
  }
  raise(ErrorCode::InvalidArgument, "unhandled selection strategy");
}

}  // namespace

double subsample_value(const RankingEpisode& episode, const RatingTable& ratings,
                       const SelectionStrategy& strategy, std::size_t n, SubsampleMode mode) {
  const std::size_t total = episode.candidates.size();
  if (n < 1 || n > total) {
    raise(ErrorCode::InvalidArgument, "n must be in [1, " + std::to_string(total) + "]");
  }
  const std::vector<double> r = candidate_ratings(episode, ratings);
  std::vector<double> s;
  if (strategy.kind == SelectionStrategy::Kind::by_metric) {
    s.reserve(total);
    for (const std::string& id : episode.candidates) {
      auto it = strategy.scores->find(id);
      if (it == strategy.scores->end()) raise(ErrorCode::MissingScore, "'" + id + "'");
      s.push_back(it->second);
    }
  }

  if (mode == SubsampleMode::prefix) {
    std::vector<std::size_t> prefix(n);
    for (std::size_t i = 0; i < n; ++i) prefix[i] = i;
    return subset_value(r, &s, strategy, prefix);
  }
  double sum = 0.0;
  std::size_t count = 0;
  for_each_subset(total, n, [&](const std::vector<std::size_t>& subset) {
    sum += subset_value(r, &s, strategy, subset);
    ++count;
  });
  return sum / static_cast<double>(count);
}

RankEvalResult rank_eval(const std::vector<RankingEpisode>& episodes,
                         const RatingTable& ratings, const ScoreIndex& scores,
                         const PromptSet& prompts, const std::vector<std::string>& metric_ids,
                         const RankEvalOptions& options) {
  static const std::map<std::string, double> kNoScores;

  // Episodes usable by every method, so all rows average over the same set.
  std::vector<const RankingEpisode*> usable;
  std::size_t excluded = 0;
  for (const RankingEpisode& ep : episodes) {
    bool complete = true;
    prompts.at(ep.prompt_id);  // unresolvable prompt is an input error
    for (const std::string& id : ep.candidates) {
      complete = complete && ratings.has_item(id);
    }
    for (const std::string& metric : metric_ids) {
      auto it = scores.find(metric);
      if (it == scores.end()) {
        complete = false;
        break;
      }
      for (const std::string& id : ep.candidates) {
        complete = complete && it->second.count(id) > 0;
      }
    }
    if (complete) {
      usable.push_back(&ep);
    } else {
      ++excluded;
    }
  }

  struct Method {
    std::string id;
    SelectionStrategy strategy;
  };
  std::vector<Method> methods;
  methods.push_back({"random", SelectionStrategy::random_pick()});
  methods.push_back({"human_oracle", SelectionStrategy::human_oracle()});
  for (const std::string& metric : metric_ids) {
    methods.push_back({metric, SelectionStrategy::by_metric(scores.at(metric))});
  }

  const std::vector<std::string> slices = {"basic", "advanced", "overall"};
  auto in_slice = [&](const RankingEpisode& ep, const std::string& slice) {
    if (slice == "overall") return true;
    const bool advanced = prompts.at(ep.prompt_id).is_advanced();
    return slice == "advanced" ? advanced : !advanced;
  };

  RankEvalResult result;
  result.excluded_episodes = excluded;
  for (const std::string& slice : slices) {
    for (int n : options.n_values) {
      std::map<std::string, double> row_value;
      std::size_t n_episodes = 0;
      for (const Method& method : methods) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const RankingEpisode* ep : usable) {
          if (!in_slice(*ep, slice)) continue;
          if (ep->candidates.size() < static_cast<std::size_t>(n)) continue;
          sum += subsample_value(*ep, ratings, method.strategy, static_cast<std::size_t>(n),
                                 options.mode);
          ++count;
        }
        if (count == 0) continue;
        row_value[method.id] = sum / static_cast<double>(count);
        n_episodes = count;
      }
      if (row_value.empty()) continue;
      for (const Method& method : methods) {
        auto it = row_value.find(method.id);
        if (it == row_value.end()) continue;
        RankingEvalRow row;
        row.method_id = method.id;
        row.n_candidates = n;
        row.slice = slice;
        row.mean_selected_rating = it->second;
        row.gain_vs_random = it->second - row_value.at("random");
        row.n_episodes = n_episodes;
        result.rows.push_back(std::move(row));
      }
    }
  }
  return result;
}

BestOfNResult run_best_of_n(const std::string& prompt_id, const std::string& prompt_text,
                            int n, const BackendClient& generator, const DatasetScorer& scorer,
                            const std::string& out_dir, int min_quorum) {
  if (n < 1) raise(ErrorCode::InvalidArgument, "n must be >= 1");
  const int quorum = min_quorum <= 0 ? n : std::min(min_quorum, n);

  const auto images = generator.image_generation(prompt_text, n);
  const std::filesystem::path dir = std::filesystem::path(out_dir) / prompt_id;
  std::filesystem::create_directories(dir);

  BestOfNResult result;
  result.prompt_id = prompt_id;
  int survivors = 0;
  for (int i = 0; i < n; ++i) {
    BestOfNCandidate candidate;
    candidate.index = i;
    if (!images[i]) {
      candidate.error = "generation failed";
    } else {
      const auto path = dir / ("candidate_" + std::to_string(i) + ".png");
      std::ofstream out(path, std::ios::binary);
      out.write(images[i]->data(), static_cast<std::streamsize>(images[i]->size()));
      if (!out) raise(ErrorCode::MissingFile, "cannot write " + path.string());
      candidate.path = path.string();
      ++survivors;
    }
    result.candidates.push_back(std::move(candidate));
  }
  if (survivors < quorum) {
    raise(ErrorCode::GenerationFailure,
          std::to_string(survivors) + " of " + std::to_string(n) + " candidates generated, " +
              "quorum " + std::to_string(quorum));
  }

  for (BestOfNCandidate& candidate : result.candidates) {
    if (candidate.path.empty()) continue;
    VisualItem item;
    item.item_id = prompt_id + "#cand" + std::to_string(candidate.index);
    item.prompt_id = prompt_id;
    item.model_id = "best_of_n";
    item.media = {candidate.path};
    item.candidate_index = candidate.index;
    try {
      candidate.score = score_item(scorer, item, prompt_text).score;
    } catch (const Error& e) {
      candidate.error = e.what();
    }
  }

  for (const BestOfNCandidate& candidate : result.candidates) {
    if (!candidate.score) continue;
    if (result.selected_index < 0 ||
        *candidate.score > *result.candidates[result.selected_index].score) {
      result.selected_index = candidate.index;
    }
  }
  if (result.selected_index < 0) {
    raise(ErrorCode::MissingScore, "no candidate could be scored for prompt " + prompt_id);
  }
  result.selected_path = result.candidates[result.selected_index].path;

  nlohmann::json provenance = {{"prompt_id", prompt_id},
                               {"prompt_text", prompt_text},
                               {"n", n},
                               {"quorum", quorum},
                               {"metric_id", scorer.metric_id.empty() ? to_string(scorer.kind)
                                                                      : scorer.metric_id},
                               {"selected_index", result.selected_index},
                               {"selected_path", result.selected_path}};
  nlohmann::json candidates = nlohmann::json::array();
  for (const BestOfNCandidate& c : result.candidates) {
    candidates.push_back(
        {{"index", c.index},
         {"path", c.path.empty() ? nlohmann::json(nullptr) : nlohmann::json(c.path)},
         {"score", c.score ? nlohmann::json(*c.score) : nlohmann::json(nullptr)},
         {"error", c.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(c.error)}});
  }
  provenance["candidates"] = candidates;
  std::ofstream prov(dir / "provenance.json");
  prov << provenance.dump(2) << '\n';

  return result;
}

}  // namespace visrank
