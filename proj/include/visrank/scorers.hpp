#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "visrank/backend.hpp"
#include "visrank/dataset.hpp"

namespace visrank {

// One metric's score for one item. Records with no score carry the failure
// reason in detail["error"]; they are retried on resumed runs.
struct ScoreRecord {
  std::string item_id;
  std::string metric_id;
  std::optional<double> score;
  nlohmann::json detail;  // null unless the scorer has a breakdown to attach

  bool ok() const { return score.has_value(); }
};

std::vector<ScoreRecord> load_scores(const std::string& path);  // last record per key wins
void save_scores(const std::vector<ScoreRecord>& records, const std::string& path);

struct ScorerOptions {
  // Score = P(Yes)/(P(Yes)+P(No)) instead of the raw P(Yes).
  bool normalize_yes_no = false;
  // Videos with more frames are subsampled uniformly (first and last kept).
  // 0 disables the cap and scores every frame.
  std::size_t video_frame_cap = 36;
  // Skipped follow-up questions count against the score; when false they are
  // excluded from the denominator instead.
  bool qga_skip_counts_incorrect = true;
  std::string metric_id;  // overrides the scorer's default id
};

// The question put to the VQA backend, verbatim substitution of the prompt text.
std::string format_question(const std::string& text);

// Probability that the VQA model answers "Yes" given the (single-frame) item.
ScoreRecord vqascore(const BackendClient& likelihood, const VisualItem& item,
                     const std::string& text, const ScorerOptions& options = {});

// Mean of per-frame scores over the sampled frames; any frame failure fails
// the whole item (no partial means). detail carries the per-frame scores.
ScoreRecord video_score(const BackendClient& likelihood, const VisualItem& item,
                        const std::string& text, const ScorerOptions& options = {});

// Cosine similarity between image and text embeddings, in [-1, 1].
ScoreRecord embed_similarity_score(const BackendClient& embedding, const VisualItem& item,
                                   const std::string& text);

double cosine_similarity(const std::vector<double>& a,
                         const std::vector<double>& b);  // DimensionMismatch, ZeroVector

// Frame indices scored for a clip of `frame_count` frames under `cap`.
std::vector<std::size_t> sample_frame_indices(std::size_t frame_count, std::size_t cap);

// One yes/no verification question, optionally conditioned on a parent
// question that must have been answered as expected first.
struct QAPair {
  std::string qid;
  std::string question;
  bool expect_yes = true;
  std::optional<std::string> depends_on;
};

// Parses the generation output: a JSON array of
// {"id", "question", "answer": "Yes"|"No", "depends_on": id|null},
// ignoring any surrounding prose. Enforces acyclic, resolvable dependencies.
std::vector<QAPair> parse_qa_pairs(const std::string& raw);

std::string render_template(const std::string& tmpl, const std::string& text);

// Decomposes a prompt into QA pairs via the generation backend.
// prompt_template must contain a {text} placeholder.
std::vector<QAPair> qga_generate(const BackendClient& generation, const std::string& text,
                                 const std::string& prompt_template);

// Evaluates questions in dependency order. A question is answered "Yes" iff
// P(Yes) >= 0.5. When a parent was not answered as expected, the follow-up is
// skipped (skips propagate) and, by default, counted as incorrect.
ScoreRecord qga_score(const BackendClient& likelihood, const VisualItem& item,
                      const std::vector<QAPair>& qas, const ScorerOptions& options = {});

enum class MetricKind { vqascore, embed_similarity, qga };
MetricKind metric_kind_from_string(const std::string& name);  // ConfigError
const char* to_string(MetricKind kind);

// Backends and options bound to one metric for a dataset run.
struct DatasetScorer {
  MetricKind kind = MetricKind::vqascore;
  std::string metric_id;  // defaults to the kind's name
  const BackendClient* likelihood = nullptr;
  const BackendClient* embedding = nullptr;
  const BackendClient* generation = nullptr;
  std::string qg_template;  // required for qga
  ScorerOptions options;
};

struct ScoreRunSummary {
  std::size_t scored = 0;
  std::size_t reused = 0;
  std::size_t failed = 0;
};

// Scores one item with the configured metric; throws on failure.
ScoreRecord score_item(const DatasetScorer& scorer, const VisualItem& item,
                       const std::string& text);

// Scores every item (input order) and appends new records to out_path.
// Items already scored there for this metric are reused without backend
// calls; error records are retried. Returns one record per input item.
std::vector<ScoreRecord> score_dataset(const DatasetScorer& scorer,
                                       const std::vector<VisualItem>& items,
                                       const PromptSet& prompts, const std::string& out_path,
                                       ScoreRunSummary* summary = nullptr);

}  // namespace visrank
