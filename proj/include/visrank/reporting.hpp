#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "visrank/metaeval.hpp"
#include "visrank/ranking.hpp"

namespace visrank {

std::string format_fixed(double value, int decimals);
// Coefficients are scaled x100 with one decimal in tables ("64.1"); stored
// values stay raw.
std::string format_scaled100(double value);
// Paper-style gain annotation: "+.22", "-.04".
std::string format_gain(double gain);
std::string iso8601_timestamp();

void write_text_file(const std::string& path, const std::string& content);

// One leaderboard row: mean human ratings per slice, plus per-metric mean
// scores when a scores file is supplied.
struct ModelReportRow {
  std::string model_id;
  std::optional<double> basic;
  std::optional<double> advanced;
  std::optional<double> overall;
  std::size_t n_items = 0;  // rated items
  std::map<std::string, double> metric_means;
  std::map<std::string, double> per_category;  // category -> mean rating
};

std::vector<ModelReportRow> compute_model_rows(const RatingTable& ratings,
                                               const std::vector<VisualItem>& items,
                                               const PromptSet& prompts,
                                               const std::vector<ScoreRecord>* scores);

void write_metaeval_reports(const std::vector<CorrelationReport>& reports,
                            std::optional<double> alpha_ordinal,
                            std::optional<double> alpha_interval, const std::string& out_dir);

void write_rank_reports(const RankEvalResult& result, const std::vector<int>& n_values,
                        const std::string& out_dir);

void write_model_reports(const std::vector<ModelReportRow>& rows,
                         const std::vector<std::string>& metric_ids,
                         const std::string& out_dir);

}  // namespace visrank
