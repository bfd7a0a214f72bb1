#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "recgpt/data_model.hpp"
#include "recgpt/templates.hpp"
#include "recgpt/token_counter.hpp"

namespace recgpt::corpus {

inline constexpr std::size_t kDefaultBudget = 2048;
inline constexpr double kDefaultPretrainRatio = 0.995;

// "{r}/{scale}" with one decimal on both sides, e.g. "4.0/5.0".
std::string format_rating(double rating, double scale);

// Joins the entry's present fields as "Label: value" segments with "; ".
// Absent optional values (attribute, review, rating) drop their segment.
// Throws kUnknownTemplateField when the item carries an attribute the
// template does not declare.
std::string render_entry(const HistoryEntry& entry, const TemplateSpec& spec,
                         std::span<const TemplateField> fields);

// Header line followed by one line per entry; no trailing newline.
std::string render_history(const UserHistory& history, const TemplateSpec& spec, FieldSet set);

// Sizes of `count` items split into `chunks` near-equal parts, larger parts
// first.
std::vector<std::size_t> chunk_sizes(std::size_t count, std::size_t chunks);

// Splits a history into the fewest near-equal chunks whose renders all stay
// strictly under `budget` tokens. Throws kEntryExceedsBudget (detail = entry
// index) when a single entry cannot fit on its own.
std::vector<UserHistory> chunk_history(const UserHistory& history, const TemplateSpec& spec,
                                       std::size_t budget, const TokenCounter& counter,
                                       FieldSet set = FieldSet::kPretrain);

// Membership is a pure function of (user_id, seed): a stable hash mapped to
// [0, 1) compared against `ratio`.
bool is_pretrain_user(std::string_view user_id, double ratio, std::uint64_t seed);

struct UserSplit {
  std::vector<std::string> pretrain;
  std::vector<std::string> finetune;
};

UserSplit split_users(std::span<const std::string> user_ids, double ratio, std::uint64_t seed);

struct CorpusDocument {
  std::string text;
  std::string user_id;
  std::string dataset_id;
  std::size_t chunk_index = 0;

  bool operator==(const CorpusDocument&) const = default;
};

void to_json(nlohmann::json& j, const CorpusDocument& doc);
void from_json(const nlohmann::json& j, CorpusDocument& doc);

// Template per dataset_id.
using TemplateLookup = std::map<std::string, TemplateSpec>;

const TemplateSpec& template_for(const TemplateLookup& templates, const std::string& dataset_id);

struct CorpusOptions {
  std::size_t budget = kDefaultBudget;
  double ratio = kDefaultPretrainRatio;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

// Renders every pre-training-side history (chunked under the budget) with
// the pre-training field set. Output is ordered by (dataset_id, user_id,
// chunk_index).
std::vector<CorpusDocument> build_corpus(std::span<const UserHistory> histories,
                                         const TemplateLookup& templates,
                                         const TokenCounter& counter, const CorpusOptions& options);

}  // namespace recgpt::corpus
