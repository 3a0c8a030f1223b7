#include "visrank/dataset.hpp"

#include <algorithm>
#include <numeric>

#include "visrank/jsonl.hpp"

namespace visrank {

SkillTier tier_of(SkillCategory category) {
  switch (category) {
    case SkillCategory::counting:
    case SkillCategory::differentiation:
    case SkillCategory::comparison:
    case SkillCategory::negation:
    case SkillCategory::universality:
      return SkillTier::advanced;
    default:
      return SkillTier::basic;
  }
}

const char* to_string(SkillCategory category) {
  switch (category) {
    case SkillCategory::object: return "object";
    case SkillCategory::attribute: return "attribute";
    case SkillCategory::scene: return "scene";
    case SkillCategory::spatial_relation: return "spatial_relation";
    case SkillCategory::action_relation: return "action_relation";
    case SkillCategory::part_relation: return "part_relation";
    case SkillCategory::counting: return "counting";
    case SkillCategory::differentiation: return "differentiation";
    case SkillCategory::comparison: return "comparison";
    case SkillCategory::negation: return "negation";
    case SkillCategory::universality: return "universality";
  }
  return "?";
}

const char* to_string(SkillTier tier) {
  return tier == SkillTier::basic ? "basic" : "advanced";
}

const std::vector<SkillCategory>& all_skill_categories() {
  static const std::vector<SkillCategory> kAll = {
      SkillCategory::object,          SkillCategory::attribute,
      SkillCategory::scene,           SkillCategory::spatial_relation,
      SkillCategory::action_relation, SkillCategory::part_relation,
      SkillCategory::counting,        SkillCategory::differentiation,
      SkillCategory::comparison,      SkillCategory::negation,
      SkillCategory::universality,
  };
  return kAll;
}

SkillCategory skill_category_from_string(const std::string& name) {
  for (SkillCategory c : all_skill_categories()) {
    if (name == to_string(c)) return c;
  }
  raise(ErrorCode::UnknownSkillCategory, "'" + name + "'");
}

bool Prompt::is_advanced() const {
  return std::any_of(tags.begin(), tags.end(),
                     [](SkillCategory c) { return tier_of(c) == SkillTier::advanced; });
}

void PromptSet::add(Prompt prompt) {
  if (prompt.id.empty()) {
    raise(ErrorCode::MalformedRecord, "prompt with empty id");
  }
  if (prompt.text.empty()) {
    raise(ErrorCode::MalformedRecord, "prompt '" + prompt.id + "' has empty text");
  }
  if (prompt.tags.empty()) {
    raise(ErrorCode::EmptyTagSet, "prompt '" + prompt.id + "' has no skill tags");
  }
  if (index_.count(prompt.id)) {
    raise(ErrorCode::DuplicateId, "'" + prompt.id + "'");
  }
  index_.emplace(prompt.id, prompts_.size());
  prompts_.push_back(std::move(prompt));
}

const Prompt* PromptSet::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &prompts_[it->second];
}

const Prompt& PromptSet::at(const std::string& id) const {
  const Prompt* p = find(id);
  if (!p) raise(ErrorCode::UnknownItem, "unknown prompt id '" + id + "'");
  return *p;
}

void validate_item(const VisualItem& item) {
  if (item.item_id.empty() || item.prompt_id.empty()) {
    raise(ErrorCode::MalformedRecord, "item with empty item_id or prompt_id");
  }
  if (item.media.empty()) {
    raise(ErrorCode::MalformedRecord, "item '" + item.item_id + "' has no media");
  }
  if (item.candidate_index && *item.candidate_index < 0) {
    raise(ErrorCode::MalformedRecord,
          "item '" + item.item_id + "' has negative candidate_index");
  }
}

void RatingTable::add(const std::string& item_id, const std::string& rater_id, int rating) {
  if (rating < 1 || rating > 5) {
    raise(ErrorCode::RatingOutOfRange, "item '" + item_id + "' rater '" + rater_id +
                                           "' rating " + std::to_string(rating));
  }
  auto [it, inserted] = entries_.emplace(Key(item_id, rater_id), rating);
  if (!inserted) {
    raise(ErrorCode::DuplicateEntry, "item '" + item_id + "' rater '" + rater_id + "'");
  }
}

bool RatingTable::has_item(const std::string& item_id) const {
  auto it = entries_.lower_bound(Key(item_id, ""));
  return it != entries_.end() && it->first.first == item_id;
}

std::vector<int> RatingTable::ratings_for(const std::string& item_id) const {
  std::vector<int> out;
  for (auto it = entries_.lower_bound(Key(item_id, ""));
       it != entries_.end() && it->first.first == item_id; ++it) {
    out.push_back(it->second);
  }
  return out;
}

std::vector<std::string> RatingTable::item_ids() const {
  std::vector<std::string> ids;
  for (const auto& [key, rating] : entries_) {
    if (ids.empty() || ids.back() != key.first) ids.push_back(key.first);
  }
  return ids;
}

double mean_rating(const RatingTable& table, const std::string& item_id) {
  std::vector<int> ratings = table.ratings_for(item_id);
  if (ratings.empty()) {
    raise(ErrorCode::UnknownItem, "no ratings for item '" + item_id + "'");
  }
  double sum = std::accumulate(ratings.begin(), ratings.end(), 0.0);
  return sum / static_cast<double>(ratings.size());
}

PromptSet load_prompts(const std::string& path) {
  PromptSet set(path);
  jsonl::for_each_record(path, [&](std::size_t line, const nlohmann::json& record) {
    Prompt p;
    p.id = jsonl::require_string(record, "id", line);
    p.text = jsonl::require_string(record, "text", line);
    if (!record.contains("tags") || !record["tags"].is_array()) {
      raise(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": missing tags array");
    }
    for (const auto& tag : record["tags"]) {
      if (!tag.is_string()) {
        raise(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": non-string tag");
      }
      p.tags.insert(skill_category_from_string(tag.get<std::string>()));
    }
    set.add(std::move(p));
  });
  return set;
}

void save_prompts(const PromptSet& prompts, const std::string& path) {
  jsonl::Writer out(path);
  for (const Prompt& p : prompts.prompts()) {
    nlohmann::json tags = nlohmann::json::array();
    for (SkillCategory c : p.tags) tags.push_back(to_string(c));
    out.write({{"id", p.id}, {"text", p.text}, {"tags", tags}});
  }
}

RatingTable load_ratings(const std::string& path) {
  RatingTable table;
  jsonl::for_each_record(path, [&](std::size_t line, const nlohmann::json& record) {
    table.add(jsonl::require_string(record, "item_id", line),
              jsonl::require_string(record, "rater_id", line),
              jsonl::require_int(record, "rating", line));
  });
  return table;
}

void save_ratings(const RatingTable& table, const std::string& path) {
  jsonl::Writer out(path);
  for (const auto& [key, rating] : table.entries()) {
    out.write({{"item_id", key.first}, {"rater_id", key.second}, {"rating", rating}});
  }
}

std::vector<VisualItem> load_items(const std::string& path) {
  std::vector<VisualItem> items;
  std::set<std::string> seen;
  jsonl::for_each_record(path, [&](std::size_t line, const nlohmann::json& record) {
    VisualItem item;
    item.item_id = jsonl::require_string(record, "item_id", line);
    item.prompt_id = jsonl::require_string(record, "prompt_id", line);
    item.model_id = jsonl::require_string(record, "model_id", line);
    if (!record.contains("media") || !record["media"].is_array()) {
      raise(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": missing media array");
    }
    for (const auto& m : record["media"]) {
      if (!m.is_string()) {
        raise(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": non-string media ref");
      }
      item.media.push_back(m.get<std::string>());
    }
    if (record.contains("candidate_index") && !record["candidate_index"].is_null()) {
      if (!record["candidate_index"].is_number_integer()) {
        raise(ErrorCode::MalformedRecord,
              "line " + std::to_string(line) + ": candidate_index must be an integer or null");
      }
      item.candidate_index = record["candidate_index"].get<int>();
    }
    validate_item(item);
    if (!seen.insert(item.item_id).second) {
      raise(ErrorCode::DuplicateId, "'" + item.item_id + "'");
    }
    items.push_back(std::move(item));
  });
  return items;
}

void save_items(const std::vector<VisualItem>& items, const std::string& path) {
  jsonl::Writer out(path);
  for (const VisualItem& item : items) {
    nlohmann::json record = {{"item_id", item.item_id},
                             {"prompt_id", item.prompt_id},
                             {"model_id", item.model_id},
                             {"media", item.media}};
    record["candidate_index"] =
        item.candidate_index ? nlohmann::json(*item.candidate_index) : nlohmann::json(nullptr);
    out.write(record);
  }
}

SkillSelector SkillSelector::parse(const std::string& name) {
  SkillSelector s;
  if (name == "basic") {
    s.tier = SkillTier::basic;
    return s;
  }
  if (name == "advanced") {
    s.tier = SkillTier::advanced;
    return s;
  }
  for (SkillCategory c : all_skill_categories()) {
    if (name == to_string(c)) {
      s.category = c;
      return s;
    }
  }
  raise(ErrorCode::UnknownCategory, "'" + name + "'");
}

bool SkillSelector::matches(const Prompt& prompt) const {
  if (category) return prompt.tags.count(*category) > 0;
  if (tier) {
    for (SkillCategory c : prompt.tags) {
      if (tier_of(c) == *tier) return true;
    }
    return false;
  }
  return false;
}

std::vector<std::string> slice_by_skill(const PromptSet& prompts,
                                        const std::vector<VisualItem>& items,
                                        const SkillSelector& selector) {
  std::vector<std::string> out;
  for (const VisualItem& item : items) {
    const Prompt& prompt = prompts.at(item.prompt_id);
    if (selector.matches(prompt)) out.push_back(item.item_id);
  }
  return out;
}

}  // namespace visrank
