#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recgpt/corpus.hpp"
#include "recgpt/data_model.hpp"
#include "recgpt/templates.hpp"
#include "recgpt/token_counter.hpp"

namespace recgpt::sft {

enum class Task { kRating, kSeqrec };

const char* to_string(Task task);
Task task_from_string(const std::string& name);
// Parses "rating,seqrec".
std::vector<Task> parse_tasks(const std::string& csv);

inline constexpr const char* kInstructionMarker = "### Instruction:\n";
inline constexpr const char* kResponseMarker = "### Response:\n";

// One instruction-tuning pair. The prompt ends with the response marker
// line, so the training text is prompt + response.
struct PromptSample {
  std::string prompt;
  std::string response;
  Task task = Task::kSeqrec;
  std::string user_id;
  std::string dataset_id;
  std::string label_item_id;

  std::string serialize() const { return prompt + response; }
  bool operator==(const PromptSample&) const = default;
};

void to_json(nlohmann::json& j, const PromptSample& s);
void from_json(const nlohmann::json& j, PromptSample& s);

// Which history position supplies the rating label. The default is the
// second-to-last item; kLast is the conventional alternative.
enum class RatingLabel { kSecondToLast, kLast };

// Context i_1..i_{n-2} with full rating fields, then i_{n-1} rendered up to
// "Rating:"; response is the hidden rating as "{r}/{scale}".
PromptSample make_rating_sample(const UserHistory& history, const TemplateSpec& spec,
                                RatingLabel label = RatingLabel::kSecondToLast);

// Context i_1..i_{n-1} with seqrec fields; response is i_n rendered with the
// response fields.
PromptSample make_seqrec_sample(const UserHistory& history, const TemplateSpec& spec);

struct SftOptions {
  std::size_t budget = corpus::kDefaultBudget;
  RatingLabel rating_label = RatingLabel::kSecondToLast;
  std::size_t workers = 1;
};

// Builds the sample for one task, shrinking the context to its most recent
// chunk when the serialized pair would reach the budget. Returns nullopt
// when the history does not satisfy the task's preconditions.
std::optional<PromptSample> make_sample(const UserHistory& history, const TemplateSpec& spec,
                                        Task task, const TokenCounter& counter,
                                        const SftOptions& options);

// One sample per (history, task) whose preconditions hold, ordered by
// (dataset_id, user_id, task).
std::vector<PromptSample> build_sft_dataset(std::span<const UserHistory> histories,
                                            const corpus::TemplateLookup& templates,
                                            std::span<const Task> tasks,
                                            const TokenCounter& counter,
                                            const SftOptions& options);

}  // namespace recgpt::sft
