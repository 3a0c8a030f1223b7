#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "visrank/errors.hpp"

namespace visrank {

// Compositional skill taxonomy. Basic skills cover entities and their
// immediate composition; advanced skills require higher-order reasoning.
enum class SkillCategory {
  object,
  attribute,
  scene,
  spatial_relation,
  action_relation,
  part_relation,
  counting,
  differentiation,
  comparison,
  negation,
  universality,
};

enum class SkillTier { basic, advanced };

SkillTier tier_of(SkillCategory category);
const char* to_string(SkillCategory category);
const char* to_string(SkillTier tier);
SkillCategory skill_category_from_string(const std::string& name);  // UnknownSkillCategory
const std::vector<SkillCategory>& all_skill_categories();

struct Prompt {
  std::string id;
  std::string text;
  std::set<SkillCategory> tags;  // non-empty: every evaluated skill of the prompt

  // A prompt is advanced iff any of its tags is an advanced skill.
  bool is_advanced() const;
  SkillTier tier() const { return is_advanced() ? SkillTier::advanced : SkillTier::basic; }
};

class PromptSet {
 public:
  PromptSet() = default;
  explicit PromptSet(std::string provenance) : provenance_(std::move(provenance)) {}

  void add(Prompt prompt);  // DuplicateId, EmptyTagSet
  const std::vector<Prompt>& prompts() const { return prompts_; }
  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  const Prompt* find(const std::string& id) const;
  const Prompt& at(const std::string& id) const;  // UnknownItem
  std::size_t size() const { return prompts_.size(); }

 private:
  std::vector<Prompt> prompts_;
  std::map<std::string, std::size_t> index_;
  std::string provenance_;
};

// One generated visual: a single image (one media ref) or a video
// (ordered frame refs, >= 2).
struct VisualItem {
  std::string item_id;
  std::string prompt_id;
  std::string model_id;
  std::vector<std::string> media;
  std::optional<int> candidate_index;  // position within a ranking episode

  bool is_video() const { return media.size() >= 2; }
};

void validate_item(const VisualItem& item);  // MalformedRecord

// Per-rater 1-5 Likert ratings, keyed by (item_id, rater_id).
class RatingTable {
 public:
  void add(const std::string& item_id, const std::string& rater_id,
           int rating);  // RatingOutOfRange, DuplicateEntry

  using Key = std::pair<std::string, std::string>;
  const std::map<Key, int>& entries() const { return entries_; }
  bool has_item(const std::string& item_id) const;
  // Ratings of one item, ordered by rater id (deterministic regardless of load order).
  std::vector<int> ratings_for(const std::string& item_id) const;
  std::vector<std::string> item_ids() const;  // unique, sorted
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<Key, int> entries_;
};

double mean_rating(const RatingTable& table, const std::string& item_id);  // UnknownItem

// JSONL persistence. Loaders reject the whole file on the first invalid record.
PromptSet load_prompts(const std::string& path);
void save_prompts(const PromptSet& prompts, const std::string& path);
RatingTable load_ratings(const std::string& path);
void save_ratings(const RatingTable& table, const std::string& path);
std::vector<VisualItem> load_items(const std::string& path);
void save_items(const std::vector<VisualItem>& items, const std::string& path);

// Either one category or one whole tier.
struct SkillSelector {
  std::optional<SkillCategory> category;
  std::optional<SkillTier> tier;

  static SkillSelector parse(const std::string& name);  // UnknownCategory
  bool matches(const Prompt& prompt) const;
};

// Items whose prompt carries the selected tag (or tier), input order preserved.
std::vector<std::string> slice_by_skill(const PromptSet& prompts,
                                        const std::vector<VisualItem>& items,
                                        const SkillSelector& selector);

}  // namespace visrank
