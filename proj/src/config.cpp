#include "visrank/config.hpp"

#include <fstream>

namespace visrank {

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    auto comma = value.find(',', start);
    if (comma == std::string::npos) comma = value.size();
    std::string entry = trim(value.substr(start, comma - start));
    if (!entry.empty()) out.push_back(entry);
    start = comma + 1;
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  raise(ErrorCode::ConfigError, key + " must be true or false, got '" + value + "'");
}

long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    raise(ErrorCode::ConfigError, key + " must be an integer, got '" + value + "'");
  }
}

}  // namespace

std::string RunConfig::resolved_scores_path() const {
  if (!scores_path.empty()) return scores_path;
  return out_dir + "/scores.jsonl";
}

BackendHandle RunConfig::make_handle(BackendKind kind) const {
  BackendHandle handle;
  handle.kind = kind;
  switch (kind) {
    case BackendKind::likelihood: handle.endpoint = likelihood_endpoint; break;
    case BackendKind::embedding: handle.endpoint = embedding_endpoint; break;
    case BackendKind::generation: handle.endpoint = generation_endpoint; break;
  }
  if (handle.endpoint.empty()) {
    raise(ErrorCode::ConfigError,
          std::string("no ") + to_string(kind) + " backend endpoint configured");
  }
  if (handle.endpoint == "mock") {
    handle.endpoint = "mock:" + std::to_string(seed);
  }
  handle.model_name = model_name;
  handle.timeout = std::chrono::milliseconds(timeout_ms);
  handle.max_concurrency = max_concurrency;
  return handle;
}

void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "prompts") c.prompts_path = value;
  else if (key == "items") c.items_path = value;
  else if (key == "ratings") c.ratings_path = value;
  else if (key == "episodes") c.episodes_path = value;
  else if (key == "scores") c.scores_path = value;
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "backend.likelihood") c.likelihood_endpoint = value;
  else if (key == "backend.embedding") c.embedding_endpoint = value;
  else if (key == "backend.generation") c.generation_endpoint = value;
  else if (key == "backend.model") c.model_name = value;
  else if (key == "backend.timeout_ms") c.timeout_ms = static_cast<int>(parse_int(key, value));
  else if (key == "backend.max_concurrency")
    c.max_concurrency = static_cast<int>(parse_int(key, value));
  else if (key == "backend.fixtures") c.fixtures_path = value;
  else if (key == "media_root") c.media_root = value;
  else if (key == "metrics") c.metrics = split_list(value);
  else if (key == "vqascore.normalize") c.vqascore_normalize = parse_bool(key, value);
  else if (key == "video.frame_cap")
    c.video_frame_cap = static_cast<std::size_t>(parse_int(key, value));
  else if (key == "qga.skip_counts_incorrect")
    c.qga_skip_counts_incorrect = parse_bool(key, value);
  else if (key == "qga.template") c.qg_template_path = value;
  else if (key == "metaeval.metrics") c.eval_metrics = split_list(value);
  else if (key == "metaeval.granularity") {
    if (value == "item") c.granularity = JoinGranularity::per_item;
    else if (value == "prompt") c.granularity = JoinGranularity::per_prompt;
    else raise(ErrorCode::ConfigError, "metaeval.granularity must be item or prompt");
  } else if (key == "metaeval.calibration") {
    if (value == "in_sample") c.calibration = CalibrationMode::in_sample;
    else if (value == "split_half") c.calibration = CalibrationMode::split_half;
    else raise(ErrorCode::ConfigError, "metaeval.calibration must be in_sample or split_half");
  } else if (key == "rank.n_values") {
    c.rank_n_values.clear();
    for (const std::string& entry : split_list(value)) {
      c.rank_n_values.push_back(static_cast<int>(parse_int(key, entry)));
    }
    if (c.rank_n_values.empty()) raise(ErrorCode::ConfigError, "rank.n_values is empty");
  } else if (key == "rank.mode") {
    c.rank_mode = subsample_mode_from_string(value);
  } else if (key == "best_of_n.prompt_id") c.best_of_n_prompt_id = value;
  else if (key == "best_of_n.prompt_text") c.best_of_n_prompt_text = value;
  else if (key == "best_of_n.n") c.best_of_n_n = static_cast<int>(parse_int(key, value));
  else if (key == "best_of_n.quorum")
    c.best_of_n_quorum = static_cast<int>(parse_int(key, value));
  else raise(ErrorCode::ConfigError, "unknown config key '" + key + "'");
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) raise(ErrorCode::MissingFile, "cannot open config " + path);
  RunConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      raise(ErrorCode::ConfigError,
            path + " line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_config_entry(config, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return config;
}

}  // namespace visrank
