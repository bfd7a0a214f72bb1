#include "recgpt/sft.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

#include "recgpt/error.hpp"
#include "recgpt/parallel.hpp"

namespace recgpt::sft {

namespace {

struct Layout {
  std::size_t label;          // index of the label entry
  std::size_t context_begin;  // first context entry kept
};

std::string frame(const std::string& instruction, const TemplateSpec& spec,
                  const std::vector<std::string>& lines) {
  std::string prompt = kInstructionMarker;
  prompt += instruction;
  prompt += '\n';
  prompt += spec.header;
  for (const auto& line : lines) {
    prompt += '\n';
    prompt += line;
  }
  prompt += '\n';
  prompt += kResponseMarker;
  return prompt;
}

std::size_t rating_label_index(const UserHistory& history, RatingLabel label) {
  if (history.size() < 2) {
    throw Error(ErrorCode::kHistoryTooShort, history.user_id + " has fewer than 2 entries");
  }
  return label == RatingLabel::kLast ? history.size() - 1 : history.size() - 2;
}

PromptSample rating_sample(const UserHistory& history, const TemplateSpec& spec,
                           std::size_t label, std::size_t context_begin) {
  if (!spec.supports_rating()) {
    throw Error(ErrorCode::kInvalidTemplate, spec.domain_id + " has no rating task");
  }
  const HistoryEntry& target = history.entries[label];
  if (!target.interaction.rating) {
    throw Error(ErrorCode::kMissingLabelRating, history.user_id);
  }
  const auto fields = spec.fields(FieldSet::kRating);
  std::vector<std::string> lines;
  for (std::size_t i = context_begin; i < label; ++i) {
    lines.push_back(corpus::render_entry(history.entries[i], spec, fields));
  }
  std::string last = corpus::render_entry(target, spec, fields.first(fields.size() - 1));
  last += "; " + fields.back().label + ":";
  lines.push_back(std::move(last));

  PromptSample s;
  s.prompt = frame(spec.instruction_rating, spec, lines);
  s.response = corpus::format_rating(*target.interaction.rating, spec.rating_scale);
  s.task = Task::kRating;
  s.user_id = history.user_id;
  s.dataset_id = history.dataset_id;
  s.label_item_id = target.item.item_id;
  return s;
}

PromptSample seqrec_sample(const UserHistory& history, const TemplateSpec& spec,
                           std::size_t context_begin) {
  if (history.size() < 2) {
    throw Error(ErrorCode::kHistoryTooShort, history.user_id + " has fewer than 2 entries");
  }
  const std::size_t label = history.size() - 1;
  std::vector<std::string> lines;
  for (std::size_t i = context_begin; i < label; ++i) {
    lines.push_back(corpus::render_entry(history.entries[i], spec, spec.fields(FieldSet::kSeqrec)));
  }
  PromptSample s;
  s.prompt = frame(spec.instruction_seqrec, spec, lines);
  s.response =
      corpus::render_entry(history.entries[label], spec, spec.fields(FieldSet::kSeqrecResponse));
  s.task = Task::kSeqrec;
  s.user_id = history.user_id;
  s.dataset_id = history.dataset_id;
  s.label_item_id = history.entries[label].item.item_id;
  return s;
}

}  // namespace

const char* to_string(Task task) { return task == Task::kRating ? "rating" : "seqrec"; }

Task task_from_string(const std::string& name) {
  if (name == "rating") return Task::kRating;
  if (name == "seqrec") return Task::kSeqrec;
  throw Error(ErrorCode::kInvalidConfig, "unknown task '" + name + "'");
}

std::vector<Task> parse_tasks(const std::string& csv) {
  std::vector<Task> tasks;
  std::stringstream in(csv);
  std::string name;
  while (std::getline(in, name, ',')) {
    name = trim(name);
    if (name.empty()) continue;
    Task t = task_from_string(name);
    if (std::find(tasks.begin(), tasks.end(), t) == tasks.end()) tasks.push_back(t);
  }
  if (tasks.empty()) throw Error(ErrorCode::kInvalidConfig, "no tasks requested");
  return tasks;
}

void to_json(nlohmann::json& j, const PromptSample& s) {
  j = {{"prompt", s.prompt},
       {"response", s.response},
       {"task", to_string(s.task)},
       {"user_id", s.user_id},
       {"dataset_id", s.dataset_id},
       {"label_item_id", s.label_item_id}};
}

void from_json(const nlohmann::json& j, PromptSample& s) {
  s.prompt = j.at("prompt").get<std::string>();
  s.response = j.at("response").get<std::string>();
  s.task = task_from_string(j.at("task").get<std::string>());
  s.user_id = j.at("user_id").get<std::string>();
  s.dataset_id = j.at("dataset_id").get<std::string>();
  s.label_item_id = j.value("label_item_id", std::string());
}

PromptSample make_rating_sample(const UserHistory& history, const TemplateSpec& spec,
                                RatingLabel label) {
  return rating_sample(history, spec, rating_label_index(history, label), 0);
}

PromptSample make_seqrec_sample(const UserHistory& history, const TemplateSpec& spec) {
  return seqrec_sample(history, spec, 0);
}

std::optional<PromptSample> make_sample(const UserHistory& history, const TemplateSpec& spec,
                                        Task task, const TokenCounter& counter,
                                        const SftOptions& options) {
  if (history.size() < 2) return std::nullopt;
  std::size_t label = history.size() - 1;
  if (task == Task::kRating) {
    if (!spec.supports_rating()) return std::nullopt;
    label = rating_label_index(history, options.rating_label);
    if (!history.entries[label].interaction.rating) return std::nullopt;
  }
  auto build = [&](std::size_t context_begin) {
    return task == Task::kRating ? rating_sample(history, spec, label, context_begin)
                                 : seqrec_sample(history, spec, context_begin);
  };

  PromptSample sample = build(0);
  if (counter.count(sample.serialize()) < options.budget) return sample;

  // Same near-equal partition as corpus chunking, keeping the last chunk.
  const std::size_t context = label;
  for (std::size_t c = 2; c <= context; ++c) {
    const std::size_t keep = corpus::chunk_sizes(context, c).back();
    sample = build(context - keep);
    if (counter.count(sample.serialize()) < options.budget) return sample;
  }
  throw Error(ErrorCode::kEntryExceedsBudget,
              history.user_id + " " + to_string(task) + " sample cannot fit the budget",
              static_cast<std::int64_t>(label));
}

std::vector<PromptSample> build_sft_dataset(std::span<const UserHistory> histories,
                                            const corpus::TemplateLookup& templates,
                                            std::span<const Task> tasks,
                                            const TokenCounter& counter,
                                            const SftOptions& options) {
  std::vector<const UserHistory*> ordered;
  for (const auto& h : histories) ordered.push_back(&h);
  std::sort(ordered.begin(), ordered.end(), [](const UserHistory* a, const UserHistory* b) {
    return std::tie(a->dataset_id, a->user_id) < std::tie(b->dataset_id, b->user_id);
  });
  std::vector<Task> sorted_tasks(tasks.begin(), tasks.end());
  std::sort(sorted_tasks.begin(), sorted_tasks.end());

  auto per_user = parallel_map<std::vector<PromptSample>>(
      ordered.size(), options.workers, [&](std::size_t i) {
        const UserHistory& history = *ordered[i];
        const TemplateSpec& spec = corpus::template_for(templates, history.dataset_id);
        std::vector<PromptSample> samples;
        for (Task task : sorted_tasks) {
          if (auto s = make_sample(history, spec, task, counter, options)) {
            samples.push_back(std::move(*s));
          }
        }
        return samples;
      });

  std::vector<PromptSample> out;
  for (auto& samples : per_user) std::move(samples.begin(), samples.end(), std::back_inserter(out));
  return out;
}

}  // namespace recgpt::sft
