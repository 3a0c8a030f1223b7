#include "visrank/reporting.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace visrank {

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

std::string format_scaled100(double value) { return format_fixed(value * 100.0, 1); }

std::string format_gain(double gain) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%+.2f", gain);
  // "+0.22" -> "+.22" to match the usual table annotation
  std::string s = buf;
  if (s.size() > 2 && s[1] == '0' && s[2] == '.') s.erase(1, 1);
  return s;
}

std::string iso8601_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out.is_open()) raise(ErrorCode::MissingFile, "cannot open " + path + " for writing");
  out << content;
}

std::vector<ModelReportRow> compute_model_rows(const RatingTable& ratings,
                                               const std::vector<VisualItem>& items,
                                               const PromptSet& prompts,
                                               const std::vector<ScoreRecord>* scores) {
  struct Accumulator {
    double sum = 0.0;
    std::size_t n = 0;
    void add(double v) {
      sum += v;
      ++n;
    }
    std::optional<double> mean() const {
      if (n == 0) return std::nullopt;
      return sum / static_cast<double>(n);
    }
  };
  struct PerModel {
    Accumulator basic, advanced, overall;
    std::map<std::string, Accumulator> per_category;
    std::map<std::string, Accumulator> metric;
  };

  std::map<std::string, PerModel> by_model;
  std::map<std::string, const VisualItem*> item_index;
  for (const VisualItem& item : items) item_index[item.item_id] = &item;

  for (const VisualItem& item : items) {
    if (!ratings.has_item(item.item_id)) continue;
    const Prompt& prompt = prompts.at(item.prompt_id);
    const double rating = mean_rating(ratings, item.item_id);
    PerModel& m = by_model[item.model_id];
    m.overall.add(rating);
    (prompt.is_advanced() ? m.advanced : m.basic).add(rating);
    for (SkillCategory c : prompt.tags) m.per_category[to_string(c)].add(rating);
  }
  if (scores) {
    for (const ScoreRecord& r : *scores) {
      if (!r.ok()) continue;
      auto it = item_index.find(r.item_id);
      if (it == item_index.end()) continue;
      by_model[it->second->model_id].metric[r.metric_id].add(*r.score);
    }
  }

  std::vector<ModelReportRow> rows;
  for (const auto& [model_id, acc] : by_model) {
    if (acc.overall.n == 0) continue;
    ModelReportRow row;
    row.model_id = model_id;
    row.basic = acc.basic.mean();
    row.advanced = acc.advanced.mean();
    row.overall = acc.overall.mean();
    row.n_items = acc.overall.n;
    for (const auto& [category, a] : acc.per_category) {
      if (auto m = a.mean()) row.per_category[category] = *m;
    }
    for (const auto& [metric, a] : acc.metric) {
      if (auto m = a.mean()) row.metric_means[metric] = *m;
    }
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const ModelReportRow& a, const ModelReportRow& b) {
    if (*a.overall != *b.overall) return *a.overall > *b.overall;
    return a.model_id < b.model_id;
  });
  return rows;
}

namespace {

std::string opt_scaled(const std::optional<double>& v) {
  return v ? format_scaled100(*v) : "-";
}

void append_stats_csv_row(std::ostringstream& csv, const std::string& metric,
                          const std::string& slice, const AgreementStats& s) {
  csv << metric << ',' << slice << ',' << s.n_items << ',' << format_scaled100(s.pairwise_accuracy)
      << ',' << (s.pearson ? format_scaled100(*s.pearson) : "") << ','
      << (s.kendall ? format_scaled100(*s.kendall) : "") << ',' << s.tie_threshold << '\n';
}

}  // namespace

void write_metaeval_reports(const std::vector<CorrelationReport>& reports,
                            std::optional<double> alpha_ordinal,
                            std::optional<double> alpha_interval, const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);

  nlohmann::json doc;
  doc["metadata"] = {{"generated_at", iso8601_timestamp()}};
  doc["krippendorff_alpha"] = {
      {"ordinal", alpha_ordinal ? nlohmann::json(*alpha_ordinal) : nlohmann::json(nullptr)},
      {"interval", alpha_interval ? nlohmann::json(*alpha_interval) : nlohmann::json(nullptr)},
      {"default_level", "ordinal"}};
  nlohmann::json metrics = nlohmann::json::array();
  for (const CorrelationReport& r : reports) metrics.push_back(r.to_json());
  doc["metrics"] = metrics;
  write_text_file((dir / "report.json").string(), doc.dump(2) + "\n");

  // Markdown tables, coefficients x100.
  std::ostringstream md;
  md << "# Metric correlation report\n\n";
  md << "Coefficients are scaled x100. Kendall is the tie-corrected tau-b; pairwise\n"
        "accuracy is reported at the calibrated metric-side tie threshold.\n\n";
  md << "| Metric | Items | Pairwise | Pearson | Kendall | Tie threshold |\n";
  md << "|---|---|---|---|---|---|\n";
  for (const CorrelationReport& r : reports) {
    const AgreementStats& s = r.overall;
    md << "| " << r.metric_id << " | " << s.n_items << " | "
       << format_scaled100(s.pairwise_accuracy) << " | "
       << (s.pearson ? format_scaled100(*s.pearson) : "-") << " | "
       << (s.kendall ? format_scaled100(*s.kendall) : "-") << " | " << s.tie_threshold
       << " |\n";
  }

  for (const char* tier : {"basic", "advanced"}) {
    md << "\n## Pairwise accuracy, " << tier << " prompts\n\n";
    md << "| Metric | Items | Pairwise | Pearson | Kendall |\n|---|---|---|---|---|\n";
    for (const CorrelationReport& r : reports) {
      auto it = r.per_tier.find(tier);
      if (it == r.per_tier.end()) continue;
      const AgreementStats& s = it->second;
      md << "| " << r.metric_id << " | " << s.n_items << " | "
         << format_scaled100(s.pairwise_accuracy) << " | " << opt_scaled(s.pearson) << " | "
         << opt_scaled(s.kendall) << " |\n";
    }
  }

  // Per-skill pairwise accuracy, one column per category that occurs.
  std::vector<std::string> categories;
  for (const CorrelationReport& r : reports) {
    for (const auto& [name, stats] : r.per_skill) {
      if (std::find(categories.begin(), categories.end(), name) == categories.end()) {
        categories.push_back(name);
      }
    }
  }
  if (!categories.empty()) {
    md << "\n## Pairwise accuracy per skill\n\n| Metric |";
    for (const std::string& c : categories) md << ' ' << c << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < categories.size(); ++i) md << "---|";
    md << '\n';
    for (const CorrelationReport& r : reports) {
      md << "| " << r.metric_id << " |";
      for (const std::string& c : categories) {
        auto it = r.per_skill.find(c);
        md << ' ' << (it == r.per_skill.end() ? "-" : format_scaled100(it->second.pairwise_accuracy))
           << " |";
      }
      md << '\n';
    }
  }

  md << "\n## Inter-rater agreement\n\n";
  md << "Krippendorff's alpha (ordinal): "
     << (alpha_ordinal ? format_fixed(*alpha_ordinal, 3) : "undefined") << "\n\n";
  md << "Krippendorff's alpha (interval): "
     << (alpha_interval ? format_fixed(*alpha_interval, 3) : "undefined") << "\n";
  write_text_file((dir / "report.md").string(), md.str());

  std::ostringstream csv;
  csv << "metric,slice,n_items,pairwise_x100,pearson_x100,kendall_x100,tie_threshold\n";
  for (const CorrelationReport& r : reports) {
    append_stats_csv_row(csv, r.metric_id, "overall", r.overall);
    for (const auto& [tier, stats] : r.per_tier) {
      append_stats_csv_row(csv, r.metric_id, "tier:" + tier, stats);
    }
    for (const auto& [skill, stats] : r.per_skill) {
      append_stats_csv_row(csv, r.metric_id, "skill:" + skill, stats);
    }
  }
  write_text_file((dir / "report.csv").string(), csv.str());
}

void write_rank_reports(const RankEvalResult& result, const std::vector<int>& n_values,
                        const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);

  nlohmann::json doc;
  doc["metadata"] = {{"generated_at", iso8601_timestamp()}};
  doc["excluded_episodes"] = result.excluded_episodes;
  nlohmann::json rows = nlohmann::json::array();
  for (const RankingEvalRow& row : result.rows) {
    rows.push_back({{"method_id", row.method_id},
                    {"n_candidates", row.n_candidates},
                    {"slice", row.slice},
                    {"mean_selected_rating", row.mean_selected_rating},
                    {"gain_vs_random", row.gain_vs_random},
                    {"n_episodes", row.n_episodes}});
  }
  doc["rows"] = rows;
  write_text_file((dir / "rank_report.json").string(), doc.dump(2) + "\n");

  // Methods in first-seen order (random, human_oracle, then metrics).
  std::vector<std::string> methods;
  for (const RankingEvalRow& row : result.rows) {
    if (std::find(methods.begin(), methods.end(), row.method_id) == methods.end()) {
      methods.push_back(row.method_id);
    }
  }
  auto cell = [&](const std::string& method, const std::string& slice, int n) -> std::string {
    for (const RankingEvalRow& row : result.rows) {
      if (row.method_id == method && row.slice == slice && row.n_candidates == n) {
        std::string s = format_fixed(row.mean_selected_rating, 2);
        if (method != "random") s += " (" + format_gain(row.gain_vs_random) + ")";
        return s;
      }
    }
    return "-";
  };

  const std::vector<std::string> slices = {"basic", "advanced", "overall"};
  std::ostringstream md;
  md << "# Ranking evaluation\n\n";
  md << "Mean human rating of the selected candidate; gains vs the Random\n"
        "(no ranking) baseline in parentheses.\n\n";
  md << "| Method |";
  for (const std::string& slice : slices) {
    for (int n : n_values) md << ' ' << slice << ' ' << n << " |";
  }
  md << "\n|---|";
  for (std::size_t i = 0; i < slices.size() * n_values.size(); ++i) md << "---|";
  md << '\n';
  for (const std::string& method : methods) {
    md << "| " << method << " |";
    for (const std::string& slice : slices) {
      for (int n : n_values) md << ' ' << cell(method, slice, n) << " |";
    }
    md << '\n';
  }
  md << "\nExcluded episodes (incomplete ratings or scores): " << result.excluded_episodes
     << "\n";
  write_text_file((dir / "rank_report.md").string(), md.str());

  std::ostringstream csv;
  csv << "method,slice,n_candidates,mean_selected_rating,gain_vs_random,n_episodes\n";
  for (const RankingEvalRow& row : result.rows) {
    csv << row.method_id << ',' << row.slice << ',' << row.n_candidates << ','
        << format_fixed(row.mean_selected_rating, 6) << ',' << format_fixed(row.gain_vs_random, 6)
        << ',' << row.n_episodes << '\n';
  }
  write_text_file((dir / "rank_report.csv").string(), csv.str());
}

namespace {

std::string opt_rating(const std::optional<double>& v) {
  return v ? format_fixed(*v, 2) : "-";
}

std::string svg_bar_chart(const std::vector<ModelReportRow>& rows) {
  const int bar_w = 26, group_gap = 34, margin_left = 60, margin_top = 30;
  const int chart_h = 240, margin_bottom = 70;
  const int group_w = 3 * bar_w + group_gap;
  const int width = margin_left + static_cast<int>(rows.size()) * group_w + 40;
  const int height = margin_top + chart_h + margin_bottom;
  const char* colors[3] = {"#4c78a8", "#f58518", "#54a24b"};
  const char* labels[3] = {"basic", "advanced", "overall"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  svg << "<text x=\"" << margin_left << "\" y=\"18\" font-size=\"14\" font-family=\"sans-serif\">"
      << "Mean human alignment rating by model</text>\n";
  // y axis: ratings 1..5
  for (int tick = 1; tick <= 5; ++tick) {
    const int y = margin_top + chart_h - (tick - 1) * chart_h / 4;
    svg << "<line x1=\"" << margin_left - 4 << "\" y1=\"" << y << "\" x2=\""
        << width - 20 << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << margin_left - 28 << "\" y=\"" << y + 4
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << tick << "</text>\n";
  }
  auto bar_height = [&](double rating) {
    return static_cast<int>((rating - 1.0) / 4.0 * chart_h + 0.5);
  };
  for (std::size_t m = 0; m < rows.size(); ++m) {
    const std::optional<double> values[3] = {rows[m].basic, rows[m].advanced, rows[m].overall};
    const int group_x = margin_left + static_cast<int>(m) * group_w;
    for (int b = 0; b < 3; ++b) {
      if (!values[b]) continue;
      const int h = bar_height(*values[b]);
      svg << "<rect x=\"" << group_x + b * bar_w << "\" y=\"" << margin_top + chart_h - h
          << "\" width=\"" << bar_w - 3 << "\" height=\"" << h << "\" fill=\"" << colors[b]
          << "\"/>\n";
    }
    svg << "<text x=\"" << group_x << "\" y=\"" << margin_top + chart_h + 16
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << rows[m].model_id << "</text>\n";
  }
  for (int b = 0; b < 3; ++b) {
    const int x = margin_left + b * 110;
    const int y = margin_top + chart_h + 40;
    svg << "<rect x=\"" << x << "\" y=\"" << y - 10 << "\" width=\"12\" height=\"12\" fill=\""
        << colors[b] << "\"/>\n";
    svg << "<text x=\"" << x + 16 << "\" y=\"" << y
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << labels[b] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

void write_model_reports(const std::vector<ModelReportRow>& rows,
                         const std::vector<std::string>& metric_ids,
                         const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);

  std::ostringstream md;
  md << "# Model leaderboard\n\nMean 1-5 human alignment rating per model, ordered by the\n"
        "overall mean. Basic/advanced follow the prompt classification.\n\n";
  md << "| Model | Basic | Advanced | Overall | Rated items |";
  for (const std::string& metric : metric_ids) md << ' ' << metric << " |";
  md << "\n|---|---|---|---|---|";
  for (std::size_t i = 0; i < metric_ids.size(); ++i) md << "---|";
  md << '\n';
  for (const ModelReportRow& row : rows) {
    md << "| " << row.model_id << " | " << opt_rating(row.basic) << " | "
       << opt_rating(row.advanced) << " | " << opt_rating(row.overall) << " | " << row.n_items
       << " |";
    for (const std::string& metric : metric_ids) {
      auto it = row.metric_means.find(metric);
      md << ' ' << (it == row.metric_means.end() ? "-" : format_fixed(it->second, 3)) << " |";
    }
    md << '\n';
  }
  write_text_file((dir / "leaderboard.md").string(), md.str());

  std::ostringstream csv;
  csv << "model,basic,advanced,overall,n_items";
  for (const std::string& metric : metric_ids) csv << ",mean_" << metric;
  csv << '\n';
  for (const ModelReportRow& row : rows) {
    csv << row.model_id << ',' << (row.basic ? format_fixed(*row.basic, 6) : "") << ','
        << (row.advanced ? format_fixed(*row.advanced, 6) : "") << ','
        << (row.overall ? format_fixed(*row.overall, 6) : "") << ',' << row.n_items;
    for (const std::string& metric : metric_ids) {
      auto it = row.metric_means.find(metric);
      csv << ',' << (it == row.metric_means.end() ? "" : format_fixed(it->second, 6));
    }
    csv << '\n';
  }
  write_text_file((dir / "leaderboard.csv").string(), csv.str());

  std::ostringstream chart;
  chart << "model,slice,mean_rating\n";
  for (const ModelReportRow& row : rows) {
    if (row.basic) chart << row.model_id << ",basic," << format_fixed(*row.basic, 6) << '\n';
    if (row.advanced) {
      chart << row.model_id << ",advanced," << format_fixed(*row.advanced, 6) << '\n';
    }
    if (row.overall) chart << row.model_id << ",overall," << format_fixed(*row.overall, 6) << '\n';
  }
  write_text_file((dir / "ratings_by_model.csv").string(), chart.str());
  write_text_file((dir / "ratings_by_model.svg").string(), svg_bar_chart(rows));

  std::ostringstream skills;
  skills << "model,category,mean_rating\n";
  for (const ModelReportRow& row : rows) {
    for (const auto& [category, mean] : row.per_category) {
      skills << row.model_id << ',' << category << ',' << format_fixed(mean, 6) << '\n';
    }
  }
  write_text_file((dir / "skill_breakdown.csv").string(), skills.str());
}

}  // namespace visrank
