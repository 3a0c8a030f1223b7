#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "visrank/backend.hpp"
#include "visrank/metaeval.hpp"
#include "visrank/ranking.hpp"

namespace visrank {

// Everything a CLI run needs. Populated from a key=value config file with
// per-flag overrides; see README for the key reference.
struct RunConfig {
  // inputs / outputs
  std::string prompts_path;
  std::string items_path;
  std::string ratings_path;
  std::string episodes_path;
  std::string scores_path;  // default: <out_dir>/scores.jsonl
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  // backends ("mock" expands to mock:<seed>)
  std::string likelihood_endpoint;
  std::string embedding_endpoint;
  std::string generation_endpoint;
  std::string model_name = "default";
  int timeout_ms = 30000;
  int max_concurrency = 4;
  std::string fixtures_path;  // mock fixture replay file
  std::string media_root;     // media refs resolve against this for http backends

  // scoring
  std::vector<std::string> metrics = {"vqascore"};
  bool vqascore_normalize = false;
  std::size_t video_frame_cap = 36;
  bool qga_skip_counts_incorrect = true;
  std::string qg_template_path;

  // metaeval / rank (empty eval_metrics = every metric found in the scores file)
  std::vector<std::string> eval_metrics;
  JoinGranularity granularity = JoinGranularity::per_item;
  CalibrationMode calibration = CalibrationMode::in_sample;
  std::vector<int> rank_n_values = {3, 9};
  SubsampleMode rank_mode = SubsampleMode::exhaustive;

  // best-of-n (rank subcommand switches to live generation when n > 0)
  std::string best_of_n_prompt_id = "prompt";
  std::string best_of_n_prompt_text;
  int best_of_n_n = 0;
  int best_of_n_quorum = 0;

  std::string resolved_scores_path() const;
  BackendHandle make_handle(BackendKind kind) const;  // ConfigError if unset
};

// key = value lines, '#' comments; unknown keys are ConfigError.
RunConfig load_config_file(const std::string& path);
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value);

}  // namespace visrank
