#include "visrank/scorers.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "visrank/jsonl.hpp"

namespace visrank {

namespace {

// Frame-score mean. Returns the common value exactly when all entries are
// equal (k identical frames score exactly like the single frame) and sums in
// sorted order so the result is independent of frame order.
double mean_of(const std::vector<double>& xs) {
  bool all_equal = true;
  for (double x : xs) all_equal = all_equal && x == xs.front();
  if (all_equal) return xs.front();
  std::vector<double> sorted(xs);
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double x : sorted) sum += x;
  return sum / static_cast<double>(sorted.size());
}

nlohmann::json error_detail(const std::string& message) {
  return nlohmann::json{{"error", message}};
}

}  // namespace

std::string format_question(const std::string& text) {
  if (text.empty()) raise(ErrorCode::InvalidArgument, "prompt text must be non-empty");
  return "Does this figure show '" + text + "'? Please answer yes or no.";
}

namespace {

// P(Yes) for one frame; in normalized mode P(Yes)/(P(Yes)+P(No)).
double frame_probability(const BackendClient& likelihood, const std::string& frame,
                         const std::string& question, const ScorerOptions& options) {
  const double p_yes = likelihood.answer_probability({{frame}, question, "Yes"});
  if (!options.normalize_yes_no) return p_yes;
  const double p_no = likelihood.answer_probability({{frame}, question, "No"});
  if (p_yes + p_no == 0.0) {
    raise(ErrorCode::ProbabilityOutOfRange, "P(Yes)+P(No) = 0, cannot normalize");
  }
  return p_yes / (p_yes + p_no);
}

}  // namespace

ScoreRecord vqascore(const BackendClient& likelihood, const VisualItem& item,
                     const std::string& text, const ScorerOptions& options) {
  if (item.media.size() != 1) {
    raise(ErrorCode::InvalidArgument, "vqascore expects a single-frame item, got " +
                                          std::to_string(item.media.size()) + " frames");
  }
  ScoreRecord record;
  record.item_id = item.item_id;
  record.metric_id = options.metric_id.empty() ? "vqascore" : options.metric_id;
  record.score = frame_probability(likelihood, item.media[0], format_question(text), options);
  return record;
}

std::vector<std::size_t> sample_frame_indices(std::size_t frame_count, std::size_t cap) {
  std::vector<std::size_t> indices;
  if (cap == 0 || frame_count <= cap) {
    indices.resize(frame_count);
    for (std::size_t i = 0; i < frame_count; ++i) indices[i] = i;
    return indices;
  }
  // Uniformly spaced, first and last frames always included.
  for (std::size_t i = 0; i < cap; ++i) {
    double pos = static_cast<double>(i) * static_cast<double>(frame_count - 1) /
                 static_cast<double>(cap - 1);
    indices.push_back(static_cast<std::size_t>(std::llround(pos)));
  }
  return indices;
}

ScoreRecord video_score(const BackendClient& likelihood, const VisualItem& item,
                        const std::string& text, const ScorerOptions& options) {
  if (item.media.empty()) {
    raise(ErrorCode::InvalidArgument, "video_score needs at least one frame");
  }
  const std::string question = format_question(text);
  const std::vector<std::size_t> frames =
      sample_frame_indices(item.media.size(), options.video_frame_cap);

  std::vector<double> frame_scores;
  frame_scores.reserve(frames.size());
  for (std::size_t idx : frames) {
    frame_scores.push_back(frame_probability(likelihood, item.media[idx], question, options));
  }

  ScoreRecord record;
  record.item_id = item.item_id;
  record.metric_id = options.metric_id.empty() ? "vqascore" : options.metric_id;
  record.score = mean_of(frame_scores);
  record.detail = {{"kind", "video"}, {"frame_scores", frame_scores}};
  return record;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    raise(ErrorCode::DimensionMismatch, std::to_string(a.size()) + " vs " +
                                            std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) raise(ErrorCode::ZeroVector, "cannot take cosine of zero vector");
  double sim = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(sim, -1.0, 1.0);
}

ScoreRecord embed_similarity_score(const BackendClient& embedding, const VisualItem& item,
                                   const std::string& text) {
  if (item.media.size() != 1) {
    raise(ErrorCode::InvalidArgument, "embed_similarity_score expects a single-frame item");
  }
  ScoreRecord record;
  record.item_id = item.item_id;
  record.metric_id = "embed_sim";
  record.score = cosine_similarity(embedding.embedding_of_image(item.media[0]),
                                   embedding.embedding_of_text(text));
  return record;
}

std::string render_template(const std::string& tmpl, const std::string& text) {
  const std::string placeholder = "{text}";
  auto pos = tmpl.find(placeholder);
  if (pos == std::string::npos) {
    raise(ErrorCode::ConfigError, "template has no {text} placeholder");
  }
  std::string out = tmpl;
  while (pos != std::string::npos) {
    out.replace(pos, placeholder.size(), text);
    pos = out.find(placeholder, pos + text.size());
  }
  return out;
}

namespace {

// Kahn's algorithm; throws on cycles. Ties broken by input position so the
// evaluation order is deterministic.
std::vector<std::size_t> topological_order(const std::vector<QAPair>& qas) {
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < qas.size(); ++i) by_id[qas[i].qid] = i;

  std::vector<std::size_t> indegree(qas.size(), 0);
  std::vector<std::vector<std::size_t>> children(qas.size());
  for (std::size_t i = 0; i < qas.size(); ++i) {
    if (!qas[i].depends_on) continue;
    std::size_t parent = by_id.at(*qas[i].depends_on);
    children[parent].push_back(i);
    ++indegree[i];
  }

  std::vector<std::size_t> order;
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < qas.size(); ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  while (!ready.empty()) {
    std::size_t i = ready.front();
    ready.erase(ready.begin());
    order.push_back(i);
    for (std::size_t c : children[i]) {
      if (--indegree[c] == 0) ready.push_back(c);
    }
  }
  if (order.size() != qas.size()) {
    raise(ErrorCode::CyclicDependency, "question dependencies form a cycle");
  }
  return order;
}

}  // namespace

std::vector<QAPair> parse_qa_pairs(const std::string& raw) {
  auto begin = raw.find('[');
  auto end = raw.rfind(']');
  if (begin == std::string::npos || end == std::string::npos || end < begin) {
    raise(ErrorCode::ParseError, "no JSON array in generation output: " + raw);
  }
  nlohmann::json doc = nlohmann::json::parse(raw.substr(begin, end - begin + 1), nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) {
    raise(ErrorCode::ParseError, "generation output is not a JSON array: " + raw);
  }
  if (doc.empty()) raise(ErrorCode::ParseError, "generation produced no QA pairs");

  std::vector<QAPair> qas;
  std::map<std::string, bool> seen;
  for (const auto& entry : doc) {
    if (!entry.is_object()) raise(ErrorCode::ParseError, "QA entry is not an object");
    QAPair qa;
    qa.qid = entry.value("id", "");
    qa.question = entry.value("question", "");
    if (qa.qid.empty() || qa.question.empty()) {
      raise(ErrorCode::ParseError, "QA entry needs non-empty 'id' and 'question'");
    }
    if (seen.count(qa.qid)) raise(ErrorCode::ParseError, "duplicate question id " + qa.qid);
    seen[qa.qid] = true;
    std::string answer = entry.value("answer", "");
    std::transform(answer.begin(), answer.end(), answer.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (answer == "yes") {
      qa.expect_yes = true;
    } else if (answer == "no") {
      qa.expect_yes = false;
    } else {
      raise(ErrorCode::ParseError, "answer must be Yes or No for question " + qa.qid);
    }
    if (entry.contains("depends_on") && !entry["depends_on"].is_null()) {
      if (!entry["depends_on"].is_string()) {
        raise(ErrorCode::ParseError, "depends_on must be a question id or null");
      }
      qa.depends_on = entry["depends_on"].get<std::string>();
    }
    qas.push_back(std::move(qa));
  }
  for (const QAPair& qa : qas) {
    if (qa.depends_on && !seen.count(*qa.depends_on)) {
      raise(ErrorCode::ParseError,
            "question " + qa.qid + " depends on unknown id " + *qa.depends_on);
    }
  }
  topological_order(qas);  // acyclicity check
  return qas;
}

std::vector<QAPair> qga_generate(const BackendClient& generation, const std::string& text,
                                 const std::string& prompt_template) {
  if (text.empty()) raise(ErrorCode::InvalidArgument, "prompt text must be non-empty");
  return parse_qa_pairs(generation.text_generation(render_template(prompt_template, text)));
}

ScoreRecord qga_score(const BackendClient& likelihood, const VisualItem& item,
                      const std::vector<QAPair>& qas, const ScorerOptions& options) {
  if (item.media.size() != 1) {
    raise(ErrorCode::InvalidArgument, "qga_score expects a single-frame item");
  }
  if (qas.empty()) raise(ErrorCode::InvalidArgument, "qga_score needs at least one question");

  enum class Status { matched, mismatched, skipped };
  std::map<std::string, Status> status;
  nlohmann::json questions = nlohmann::json::array();
  std::size_t matched = 0, skipped = 0;

  for (std::size_t i : topological_order(qas)) {
    const QAPair& qa = qas[i];
    nlohmann::json entry = {{"id", qa.qid},
                            {"question", qa.question},
                            {"expected", qa.expect_yes ? "Yes" : "No"}};
    const bool parent_ok = !qa.depends_on || status.at(*qa.depends_on) == Status::matched;
    if (!parent_ok) {
      status[qa.qid] = Status::skipped;
      ++skipped;
      entry["skipped"] = true;
    } else {
      const double p_yes =
          frame_probability(likelihood, item.media[0], qa.question, options);
      const bool answered_yes = p_yes >= 0.5;
      const bool match = answered_yes == qa.expect_yes;
      status[qa.qid] = match ? Status::matched : Status::mismatched;
      matched += match ? 1 : 0;
      entry["p_yes"] = p_yes;
      entry["answered"] = answered_yes ? "Yes" : "No";
      entry["skipped"] = false;
    }
    questions.push_back(std::move(entry));
  }

  const std::size_t denom =
      options.qga_skip_counts_incorrect ? qas.size() : qas.size() - skipped;

  ScoreRecord record;
  record.item_id = item.item_id;
  record.metric_id = options.metric_id.empty() ? "qga" : options.metric_id;
  record.score = denom == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(denom);
  record.detail = {{"kind", "qga"}, {"questions", questions}};
  return record;
}

MetricKind metric_kind_from_string(const std::string& name) {
  if (name == "vqascore") return MetricKind::vqascore;
  if (name == "embed_sim") return MetricKind::embed_similarity;
  if (name == "qga") return MetricKind::qga;
  raise(ErrorCode::ConfigError, "unknown metric '" + name + "'");
}

const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::vqascore: return "vqascore";
    case MetricKind::embed_similarity: return "embed_sim";
    case MetricKind::qga: return "qga";
  }
  return "?";
}

namespace {

nlohmann::json record_to_json(const ScoreRecord& r) {
  return {{"item_id", r.item_id},
          {"metric_id", r.metric_id},
          {"score", r.score ? nlohmann::json(*r.score) : nlohmann::json(nullptr)},
          {"detail", r.detail.is_null() ? nlohmann::json(nullptr) : r.detail}};
}

}  // namespace

std::vector<ScoreRecord> load_scores(const std::string& path) {
  std::vector<ScoreRecord> records;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  jsonl::for_each_record(path, [&](std::size_t line, const nlohmann::json& record) {
    ScoreRecord r;
    r.item_id = jsonl::require_string(record, "item_id", line);
    r.metric_id = jsonl::require_string(record, "metric_id", line);
    if (record.contains("score") && record["score"].is_number()) {
      r.score = record["score"].get<double>();
    } else if (!record.contains("score") || !record["score"].is_null()) {
      raise(ErrorCode::MalformedRecord,
            "line " + std::to_string(line) + ": score must be a number or null");
    }
    if (record.contains("detail")) r.detail = record["detail"];
    auto key = std::make_pair(r.item_id, r.metric_id);
    auto it = index.find(key);
    if (it != index.end()) {
      records[it->second] = std::move(r);  // appended later, wins
    } else {
      index.emplace(key, records.size());
      records.push_back(std::move(r));
    }
  });
  return records;
}

void save_scores(const std::vector<ScoreRecord>& records, const std::string& path) {
  jsonl::Writer out(path);
  for (const ScoreRecord& r : records) out.write(record_to_json(r));
}

namespace {

ScoreRecord score_one_item(const DatasetScorer& scorer, const VisualItem& item,
                           const std::string& text, const std::string& metric_id,
                           std::map<std::string, std::vector<double>>& text_embedding_cache,
                           std::map<std::string, std::vector<QAPair>>& qa_cache) {
  ScorerOptions options = scorer.options;
  options.metric_id = metric_id;

  switch (scorer.kind) {
    case MetricKind::vqascore: {
      if (!scorer.likelihood) raise(ErrorCode::ConfigError, "vqascore needs a likelihood backend");
      if (item.is_video()) return video_score(*scorer.likelihood, item, text, options);
      return vqascore(*scorer.likelihood, item, text, options);
    }
    case MetricKind::embed_similarity: {
      if (!scorer.embedding) {
        raise(ErrorCode::ConfigError, "embed_sim needs an embedding backend");
      }
      auto cached = text_embedding_cache.find(item.prompt_id);
      if (cached == text_embedding_cache.end()) {
        cached = text_embedding_cache
                     .emplace(item.prompt_id, scorer.embedding->embedding_of_text(text))
                     .first;
      }
      std::vector<double> frame_scores;
      for (const std::string& frame : item.media) {
        frame_scores.push_back(
            cosine_similarity(scorer.embedding->embedding_of_image(frame), cached->second));
      }
      ScoreRecord record;
      record.item_id = item.item_id;
      record.metric_id = metric_id;
      record.score = mean_of(frame_scores);
      if (item.is_video()) {
        record.detail = {{"kind", "video"}, {"frame_scores", frame_scores}};
      }
      return record;
    }
    case MetricKind::qga: {
      if (!scorer.likelihood || !scorer.generation) {
        raise(ErrorCode::ConfigError, "qga needs generation and likelihood backends");
      }
      if (scorer.qg_template.empty()) {
        raise(ErrorCode::ConfigError, "qga needs a question-generation template");
      }
      auto cached = qa_cache.find(item.prompt_id);
      if (cached == qa_cache.end()) {
        cached = qa_cache
                     .emplace(item.prompt_id,
                              qga_generate(*scorer.generation, text, scorer.qg_template))
                     .first;
      }
      // Items with several frames are frame-averaged like vqascore.
      if (!item.is_video()) return qga_score(*scorer.likelihood, item, cached->second, options);
      std::vector<double> frame_scores;
      for (const std::string& frame : item.media) {
        VisualItem frame_item = item;
        frame_item.media = {frame};
        frame_scores.push_back(
            *qga_score(*scorer.likelihood, frame_item, cached->second, options).score);
      }
      ScoreRecord record;
      record.item_id = item.item_id;
      record.metric_id = metric_id;
      record.score = mean_of(frame_scores);
      record.detail = {{"kind", "video"}, {"frame_scores", frame_scores}};
      return record;
    }
  }
  raise(ErrorCode::ConfigError, "unhandled metric kind");
}

}  // namespace

namespace {

// Batched vqascore over a chunk of items: one flat likelihood batch (bounded
// by the backend's max_concurrency), then a per-item reduction in input order.
// A failed frame query fails its item; other items are unaffected.
std::vector<ScoreRecord> score_vqascore_chunk(const DatasetScorer& scorer,
                                              const std::vector<const VisualItem*>& chunk,
                                              const PromptSet& prompts,
                                              const std::string& metric_id) {
  const bool normalized = scorer.options.normalize_yes_no;
  const std::size_t per_frame = normalized ? 2 : 1;

  struct Span {
    std::size_t first = 0;
    std::size_t frames = 0;
    bool video = false;
  };
  std::vector<LikelihoodQuery> queries;
  std::vector<Span> spans;
  for (const VisualItem* item : chunk) {
    const std::string question = format_question(prompts.at(item->prompt_id).text);
    const auto frames = sample_frame_indices(item->media.size(), scorer.options.video_frame_cap);
    spans.push_back({queries.size(), frames.size(), item->is_video()});
    for (std::size_t idx : frames) {
      queries.push_back({{item->media[idx]}, question, "Yes"});
      if (normalized) queries.push_back({{item->media[idx]}, question, "No"});
    }
  }

  const auto results = scorer.likelihood->batch_answer_probability(queries);

  std::vector<ScoreRecord> records;
  for (std::size_t c = 0; c < chunk.size(); ++c) {
    ScoreRecord record;
    record.item_id = chunk[c]->item_id;
    record.metric_id = metric_id;
    std::vector<double> frame_scores;
    std::string error;
    for (std::size_t f = 0; f < spans[c].frames && error.empty(); ++f) {
      const auto& yes = results[spans[c].first + f * per_frame];
      if (!yes.ok()) {
        error = yes.error;
        break;
      }
      if (!normalized) {
        frame_scores.push_back(*yes.value);
        continue;
      }
      const auto& no = results[spans[c].first + f * per_frame + 1];
      if (!no.ok()) {
        error = no.error;
      } else if (*yes.value + *no.value == 0.0) {
        error = "ProbabilityOutOfRange: P(Yes)+P(No) = 0, cannot normalize";
      } else {
        frame_scores.push_back(*yes.value / (*yes.value + *no.value));
      }
    }
    if (!error.empty()) {
      record.detail = error_detail(error);  // no partial means
    } else {
      record.score = mean_of(frame_scores);
      if (spans[c].video) record.detail = {{"kind", "video"}, {"frame_scores", frame_scores}};
    }
    records.push_back(std::move(record));
  }
  return records;
}

constexpr std::size_t kMaxQueriesPerChunk = 256;

}  // namespace

ScoreRecord score_item(const DatasetScorer& scorer, const VisualItem& item,
                       const std::string& text) {
  const std::string metric_id =
      scorer.metric_id.empty() ? to_string(scorer.kind) : scorer.metric_id;
  std::map<std::string, std::vector<double>> text_cache;
  std::map<std::string, std::vector<QAPair>> qa_cache;
  return score_one_item(scorer, item, text, metric_id, text_cache, qa_cache);
}

std::vector<ScoreRecord> score_dataset(const DatasetScorer& scorer,
                                       const std::vector<VisualItem>& items,
                                       const PromptSet& prompts, const std::string& out_path,
                                       ScoreRunSummary* summary) {
  const std::string metric_id =
      scorer.metric_id.empty() ? to_string(scorer.kind) : scorer.metric_id;
  if (scorer.kind == MetricKind::vqascore && !scorer.likelihood) {
    raise(ErrorCode::ConfigError, "vqascore needs a likelihood backend");
  }

  std::map<std::string, ScoreRecord> done;
  const bool resuming = std::filesystem::exists(out_path);
  if (resuming) {
    for (ScoreRecord& r : load_scores(out_path)) {
      if (r.metric_id == metric_id && r.ok()) done.emplace(r.item_id, std::move(r));
    }
  }

  ScoreRunSummary counts;
  jsonl::Writer out(out_path, /*append=*/resuming);
  std::map<std::string, std::vector<double>> text_embedding_cache;
  std::map<std::string, std::vector<QAPair>> qa_cache;

  std::vector<ScoreRecord> records(items.size());
  std::vector<std::size_t> pending;  // indices still to score, input order
  for (std::size_t i = 0; i < items.size(); ++i) {
    prompts.at(items[i].prompt_id);  // unresolvable prompts fail the run up front
    auto it = done.find(items[i].item_id);
    if (it != done.end()) {
      records[i] = it->second;
      ++counts.reused;
    } else {
      pending.push_back(i);
    }
  }

  auto finish = [&](std::size_t i, ScoreRecord record) {
    counts.scored += record.ok() ? 1 : 0;
    counts.failed += record.ok() ? 0 : 1;
    out.write(record_to_json(record));
    records[i] = std::move(record);
  };

  if (scorer.kind == MetricKind::vqascore) {
    std::size_t begin = 0;
    while (begin < pending.size()) {
      std::vector<const VisualItem*> chunk;
      std::size_t queries = 0, end = begin;
      while (end < pending.size() && (chunk.empty() || queries < kMaxQueriesPerChunk)) {
        const VisualItem& item = items[pending[end]];
        chunk.push_back(&item);
        queries += sample_frame_indices(item.media.size(), scorer.options.video_frame_cap).size();
        ++end;
      }
      auto chunk_records = score_vqascore_chunk(scorer, chunk, prompts, metric_id);
      for (std::size_t c = 0; c < chunk.size(); ++c) {
        finish(pending[begin + c], std::move(chunk_records[c]));
      }
      begin = end;
    }
  } else {
    for (std::size_t i : pending) {
      const VisualItem& item = items[i];
      ScoreRecord record;
      try {
        record = score_one_item(scorer, item, prompts.at(item.prompt_id).text, metric_id,
                                text_embedding_cache, qa_cache);
      } catch (const Error& e) {
        record.item_id = item.item_id;
        record.metric_id = metric_id;
        record.detail = error_detail(e.what());
      }
      finish(i, std::move(record));
    }
  }
  if (summary) *summary = counts;
  return records;
}

}  // namespace visrank
