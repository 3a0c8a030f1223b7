#include "visrank/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "visrank/mock_backend.hpp"
#include "visrank/reporting.hpp"

namespace visrank::cli {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BackendUnavailable:
    case ErrorCode::BackendError:
    case ErrorCode::Timeout:
    case ErrorCode::ProbabilityOutOfRange:
    case ErrorCode::EmptyGeneration:
    case ErrorCode::GenerationFailure:
      return kExitBackend;
    case ErrorCode::NoOverlap:
    case ErrorCode::InsufficientPairableValues:
    case ErrorCode::MissingScore:
    case ErrorCode::MissingRating:
      return kExitInsufficient;
    default:
      return kExitInput;
  }
}

namespace {

BackendClient make_client(const RunConfig& config, BackendKind kind) {
  BackendHandle handle = config.make_handle(kind);
  if (is_mock_endpoint(handle.endpoint)) {
    auto mock = std::make_shared<MockBackend>(mock_seed_of(handle.endpoint));
    if (!config.fixtures_path.empty()) mock->load_fixtures_file(config.fixtures_path);
    return BackendClient(handle, mock);
  }
  return BackendClient(handle, make_http_backend(handle, config.media_root));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) raise(ErrorCode::MissingFile, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void require_path(const std::string& path, const char* what) {
  if (path.empty()) {
    raise(ErrorCode::ConfigError, std::string("no ") + what + " path configured");
  }
}

// Every metric id present in the scores file, first-seen order.
std::vector<std::string> metrics_in(const std::vector<ScoreRecord>& scores) {
  std::vector<std::string> ids;
  for (const ScoreRecord& r : scores) {
    if (std::find(ids.begin(), ids.end(), r.metric_id) == ids.end()) ids.push_back(r.metric_id);
  }
  return ids;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace

int cmd_score(const RunConfig& config) {
  return guarded([&] {
    require_path(config.prompts_path, "prompts");
    require_path(config.items_path, "items");
    const PromptSet prompts = load_prompts(config.prompts_path);
    const std::vector<VisualItem> items = load_items(config.items_path);
    const std::string out_path = config.resolved_scores_path();

    bool total_failure = false;
    for (const std::string& metric : config.metrics) {
      DatasetScorer scorer;
      scorer.kind = metric_kind_from_string(metric);
      scorer.metric_id = metric;
      scorer.options.normalize_yes_no = config.vqascore_normalize;
      scorer.options.video_frame_cap = config.video_frame_cap;
      scorer.options.qga_skip_counts_incorrect = config.qga_skip_counts_incorrect;

      std::optional<BackendClient> likelihood, embedding, generation;
      if (scorer.kind == MetricKind::vqascore || scorer.kind == MetricKind::qga) {
        likelihood.emplace(make_client(config, BackendKind::likelihood));
        scorer.likelihood = &*likelihood;
      }
      if (scorer.kind == MetricKind::embed_similarity) {
        embedding.emplace(make_client(config, BackendKind::embedding));
        scorer.embedding = &*embedding;
      }
      if (scorer.kind == MetricKind::qga) {
        generation.emplace(make_client(config, BackendKind::generation));
        scorer.generation = &*generation;
        require_path(config.qg_template_path, "qga.template");
        scorer.qg_template = read_file(config.qg_template_path);
      }

      ScoreRunSummary summary;
      score_dataset(scorer, items, prompts, out_path, &summary);
      std::cout << "metric=" << metric << " scored=" << summary.scored
                << " reused=" << summary.reused << " failed=" << summary.failed << '\n';
      total_failure = total_failure ||
                      (summary.failed > 0 && summary.scored == 0 && summary.reused == 0);
    }
    std::cout << "scores written to " << out_path << '\n';
    if (total_failure) {
      std::cerr << "error: a metric failed on every item (backend failure)\n";
      return kExitBackend;
    }
    return kExitOk;
  });
}

int cmd_metaeval(const RunConfig& config) {
  return guarded([&] {
    require_path(config.ratings_path, "ratings");
    require_path(config.prompts_path, "prompts");
    require_path(config.items_path, "items");
    const std::vector<ScoreRecord> scores = load_scores(config.resolved_scores_path());
    const RatingTable ratings = load_ratings(config.ratings_path);
    const PromptSet prompts = load_prompts(config.prompts_path);
    const std::vector<VisualItem> items = load_items(config.items_path);

    MetaevalOptions options;
    options.granularity = config.granularity;
    options.calibration = config.calibration;

    const std::vector<std::string> metric_ids =
        config.eval_metrics.empty() ? metrics_in(scores) : config.eval_metrics;
    std::vector<CorrelationReport> reports;
    for (const std::string& metric : metric_ids) {
      try {
        reports.push_back(evaluate_metric(scores, ratings, prompts, items, metric, options));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoOverlap) throw;
        std::cerr << "metric " << metric << " skipped: " << e.what() << '\n';
      }
    }
    if (reports.empty()) {
      raise(ErrorCode::NoOverlap, "no metric shares >= 2 items with the ratings");
    }

    std::optional<double> alpha_ordinal, alpha_interval;
    try {
      alpha_ordinal = krippendorff_alpha(ratings, AlphaLevel::ordinal);
      alpha_interval = krippendorff_alpha(ratings, AlphaLevel::interval);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientPairableValues) throw;
      std::cerr << "inter-rater agreement unavailable: " << e.what() << '\n';
    }

    write_metaeval_reports(reports, alpha_ordinal, alpha_interval, config.out_dir);
    for (const CorrelationReport& r : reports) {
      std::cout << "metric=" << r.metric_id << " items=" << r.overall.n_items
                << " pairwise=" << format_scaled100(r.overall.pairwise_accuracy) << '\n';
    }
    std::cout << "reports written to " << config.out_dir << '\n';
    return kExitOk;
  });
}

int cmd_rank(const RunConfig& config) {
  return guarded([&] {
    if (config.best_of_n_n > 0) {
      if (config.best_of_n_prompt_text.empty()) {
        raise(ErrorCode::ConfigError, "best_of_n.prompt_text is required");
      }
      const BackendClient generator = make_client(config, BackendKind::generation);
      DatasetScorer scorer;
      scorer.kind = metric_kind_from_string(config.metrics.at(0));
      scorer.metric_id = config.metrics.at(0);
      scorer.options.normalize_yes_no = config.vqascore_normalize;
      std::optional<BackendClient> likelihood, embedding;
      if (scorer.kind != MetricKind::embed_similarity) {
        likelihood.emplace(make_client(config, BackendKind::likelihood));
        scorer.likelihood = &*likelihood;
      } else {
        embedding.emplace(make_client(config, BackendKind::embedding));
        scorer.embedding = &*embedding;
      }
      if (scorer.kind == MetricKind::qga) {
        scorer.generation = &generator;
        require_path(config.qg_template_path, "qga.template");
        scorer.qg_template = read_file(config.qg_template_path);
      }
      const BestOfNResult result =
          run_best_of_n(config.best_of_n_prompt_id, config.best_of_n_prompt_text,
                        config.best_of_n_n, generator, scorer, config.out_dir,
                        config.best_of_n_quorum);
      std::cout << "selected candidate " << result.selected_index << ": "
                << result.selected_path << '\n';
      return kExitOk;
    }

    require_path(config.episodes_path, "episodes");
    require_path(config.ratings_path, "ratings");
    require_path(config.prompts_path, "prompts");
    const std::vector<RankingEpisode> episodes = load_episodes(config.episodes_path);
    const RatingTable ratings = load_ratings(config.ratings_path);
    const PromptSet prompts = load_prompts(config.prompts_path);
    if (!config.items_path.empty()) {
      validate_episodes(episodes, load_items(config.items_path));
    }
    const std::vector<ScoreRecord> scores = load_scores(config.resolved_scores_path());
    const ScoreIndex index = build_score_index(scores);

    std::vector<std::string> metric_ids = config.eval_metrics;
    if (metric_ids.empty()) {
      for (const auto& [metric, by_item] : index) metric_ids.push_back(metric);
    }

    RankEvalOptions options;
    options.n_values = config.rank_n_values;
    options.mode = config.rank_mode;
    const RankEvalResult result =
        rank_eval(episodes, ratings, index, prompts, metric_ids, options);
    if (result.rows.empty()) {
      raise(ErrorCode::NoOverlap, "no complete episode could be evaluated");
    }
    write_rank_reports(result, options.n_values, config.out_dir);
    std::cout << "episodes=" << episodes.size() << " excluded=" << result.excluded_episodes
              << " rows=" << result.rows.size() << '\n';
    std::cout << "reports written to " << config.out_dir << '\n';
    return kExitOk;
  });
}

int cmd_report(const RunConfig& config) {
  return guarded([&] {
    require_path(config.ratings_path, "ratings");
    require_path(config.prompts_path, "prompts");
    require_path(config.items_path, "items");
    const RatingTable ratings = load_ratings(config.ratings_path);
    if (ratings.size() == 0) {
      raise(ErrorCode::InsufficientPairableValues, "ratings file has no entries");
    }
    const PromptSet prompts = load_prompts(config.prompts_path);
    const std::vector<VisualItem> items = load_items(config.items_path);

    std::vector<ScoreRecord> scores;
    std::vector<std::string> metric_ids;
    const std::string scores_path = config.resolved_scores_path();
    if (std::filesystem::exists(scores_path)) {
      scores = load_scores(scores_path);
      metric_ids = config.eval_metrics.empty() ? metrics_in(scores) : config.eval_metrics;
    }

    const std::vector<ModelReportRow> rows =
        compute_model_rows(ratings, items, prompts, scores.empty() ? nullptr : &scores);
    if (rows.empty()) {
      raise(ErrorCode::InsufficientPairableValues, "no rated items for any model");
    }
    write_model_reports(rows, metric_ids, config.out_dir);
    for (const ModelReportRow& row : rows) {
      std::cout << row.model_id << " overall=" << format_fixed(*row.overall, 2) << '\n';
    }
    std::cout << "reports written to " << config.out_dir << '\n';
    return kExitOk;
  });
}

namespace {

struct CliOverrides {
  std::string config_path;
  std::vector<std::string> sets;  // key=value pairs applied in order
  std::string prompts, items, ratings, episodes, scores, out_dir, metrics;
  std::optional<std::uint64_t> seed;
};

void add_common_options(CLI::App* sub, CliOverrides& o) {
  sub->add_option("--config", o.config_path, "key = value config file");
  sub->add_option("--set", o.sets, "override any config key, e.g. --set rank.mode=prefix");
  sub->add_option("--prompts", o.prompts, "prompts.jsonl path");
  sub->add_option("--items", o.items, "items.jsonl path");
  sub->add_option("--ratings", o.ratings, "ratings.jsonl path");
  sub->add_option("--episodes", o.episodes, "episodes.jsonl path");
  sub->add_option("--scores", o.scores, "scores.jsonl path");
  sub->add_option("--out", o.out_dir, "output directory");
  sub->add_option("--metrics", o.metrics, "comma-separated metric list");
  sub->add_option("--seed", o.seed, "seed for mock backends");
}

RunConfig build_config(const CliOverrides& o) {
  RunConfig config;
  if (!o.config_path.empty()) config = load_config_file(o.config_path);
  if (!o.prompts.empty()) config.prompts_path = o.prompts;
  if (!o.items.empty()) config.items_path = o.items;
  if (!o.ratings.empty()) config.ratings_path = o.ratings;
  if (!o.episodes.empty()) config.episodes_path = o.episodes;
  if (!o.scores.empty()) config.scores_path = o.scores;
  if (!o.out_dir.empty()) config.out_dir = o.out_dir;
  if (!o.metrics.empty()) apply_config_entry(config, "metrics", o.metrics);
  if (o.seed) config.seed = *o.seed;
  for (const std::string& entry : o.sets) {
    auto eq = entry.find('=');
    if (eq == std::string::npos) {
      raise(ErrorCode::ConfigError, "--set expects key=value, got '" + entry + "'");
    }
    apply_config_entry(config, entry.substr(0, eq), entry.substr(eq + 1));
  }
  return config;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"visrank: text-to-visual alignment scoring, candidate ranking, and "
               "metric meta-evaluation"};
  app.require_subcommand(1);

  CliOverrides overrides;
  CLI::App* score = app.add_subcommand("score", "score items with the configured metrics");
  CLI::App* rank = app.add_subcommand("rank", "evaluate ranking methods or run best-of-n");
  CLI::App* metaeval =
      app.add_subcommand("metaeval", "correlate metric scores with human ratings");
  CLI::App* report = app.add_subcommand("report", "model leaderboard and rating plots");
  for (CLI::App* sub : {score, rank, metaeval, report}) add_common_options(sub, overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  return guarded([&] {
    const RunConfig config = build_config(overrides);
    if (score->parsed()) return cmd_score(config);
    if (rank->parsed()) return cmd_rank(config);
    if (metaeval->parsed()) return cmd_metaeval(config);
    return cmd_report(config);
  });
}

}  // namespace visrank::cli
