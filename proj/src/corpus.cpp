#include "recgpt/corpus.hpp"

#include <algorithm>
#include <cstdio>

#include "recgpt/error.hpp"
#include "recgpt/hashing.hpp"
#include "recgpt/parallel.hpp"

namespace recgpt::corpus {

namespace {

std::string one_decimal(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", value);
  return buf;
}

void check_attributes(const Item& item, const TemplateSpec& spec) {
  auto declared = [&spec](const std::string& name) {
    for (auto set : {FieldSet::kPretrain, FieldSet::kRating, FieldSet::kSeqrec,
                     FieldSet::kSeqrecResponse}) {
      for (const auto& f : spec.fields(set)) {
        if (f.source == name) return true;
      }
    }
    return false;
  };
  for (const auto& [name, value] : item.attributes) {
    if (!declared(name)) {
      throw Error(ErrorCode::kUnknownTemplateField,
                  "attribute '" + name + "' is not declared by template " + spec.domain_id);
    }
  }
}

std::string join_chunk(const std::string& header, const std::vector<std::string>& lines,
                       std::size_t begin, std::size_t end) {
  std::size_t size = header.size();
  for (std::size_t i = begin; i < end; ++i) size += lines[i].size() + 1;
  std::string text;
  text.reserve(size);
  text += header;
  for (std::size_t i = begin; i < end; ++i) {
    text += '\n';
    text += lines[i];
  }
  return text;
}

}  // namespace

std::string format_rating(double rating, double scale) {
  return one_decimal(rating) + "/" + one_decimal(scale);
}

std::string render_entry(const HistoryEntry& entry, const TemplateSpec& spec,
                         std::span<const TemplateField> fields) {
  check_attributes(entry.item, spec);
  std::string line;
  auto append = [&line](const std::string& label, const std::string& value) {
    if (!line.empty()) line += "; ";
    line += label;
    line += ": ";
    line += value;
  };
  for (const auto& field : fields) {
    if (field.source == "title") {
      append(field.label, entry.item.title);
    } else if (field.source == "review") {
      if (entry.interaction.review) append(field.label, *entry.interaction.review);
    } else if (field.source == "rating") {
      if (entry.interaction.rating) {
        append(field.label, format_rating(*entry.interaction.rating, spec.rating_scale));
      }
    } else if (auto it = entry.item.attributes.find(field.source);
               it != entry.item.attributes.end()) {
      append(field.label, it->second);
    }
  }
  return line;
}

std::string render_history(const UserHistory& history, const TemplateSpec& spec, FieldSet set) {
  std::string text = spec.header;
  for (const auto& entry : history.entries) {
    text += '\n';
    text += render_entry(entry, spec, spec.fields(set));
  }
  return text;
}

std::vector<std::size_t> chunk_sizes(std::size_t count, std::size_t chunks) {
  std::vector<std::size_t> sizes(chunks, count / chunks);
  for (std::size_t i = 0; i < count % chunks; ++i) ++sizes[i];
  return sizes;
}

std::vector<UserHistory> chunk_history(const UserHistory& history, const TemplateSpec& spec,
                                       std::size_t budget, const TokenCounter& counter,
                                       FieldSet set) {
  const std::size_t n = history.entries.size();
  if (n == 0) return {history};

  std::vector<std::string> lines;
  lines.reserve(n);
  for (const auto& entry : history.entries) lines.push_back(render_entry(entry, spec, spec.fields(set)));
  for (std::size_t i = 0; i < n; ++i) {
    if (counter.count(join_chunk(spec.header, lines, i, i + 1)) >= budget) {
      throw Error(ErrorCode::kEntryExceedsBudget,
                  history.user_id + " entry " + std::to_string(i) + " alone reaches the budget",
                  static_cast<std::int64_t>(i));
    }
  }

  // The largest chunk comes first, so an infeasible c usually fails on its
  // first render; c = n always fits given the check above.
  std::vector<std::size_t> sizes;
  for (std::size_t c = 1; c <= n; ++c) {
    sizes = chunk_sizes(n, c);
    bool fits = true;
    for (std::size_t k = 0, begin = 0; k < c && fits; begin += sizes[k], ++k) {
      fits = counter.count(join_chunk(spec.header, lines, begin, begin + sizes[k])) < budget;
    }
    if (fits) break;
  }

  std::vector<UserHistory> chunks;
  chunks.reserve(sizes.size());
  auto it = history.entries.begin();
  for (std::size_t size : sizes) {
    UserHistory chunk{history.user_id, history.dataset_id, {}};
    chunk.entries.assign(it, it + static_cast<std::ptrdiff_t>(size));
    it += static_cast<std::ptrdiff_t>(size);
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

bool is_pretrain_user(std::string_view user_id, double ratio, std::uint64_t seed) {
  return unit_interval(stable_hash64(user_id, seed)) < ratio;
}

UserSplit split_users(std::span<const std::string> user_ids, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(ErrorCode::kBadRatios, "split ratio must lie in (0, 1)");
  }
  UserSplit split;
  for (const auto& user : user_ids) {
    (is_pretrain_user(user, ratio, seed) ? split.pretrain : split.finetune).push_back(user);
  }
  return split;
}

void to_json(nlohmann::json& j, const CorpusDocument& doc) {
  j = {{"text", doc.text},
       {"user_id", doc.user_id},
       {"dataset_id", doc.dataset_id},
       {"chunk_index", doc.chunk_index}};
}

void from_json(const nlohmann::json& j, CorpusDocument& doc) {
  doc.text = j.at("text").get<std::string>();
  doc.user_id = j.at("user_id").get<std::string>();
  doc.dataset_id = j.at("dataset_id").get<std::string>();
  doc.chunk_index = j.at("chunk_index").get<std::size_t>();
}

const TemplateSpec& template_for(const TemplateLookup& templates, const std::string& dataset_id) {
  auto it = templates.find(dataset_id);
  if (it == templates.end()) {
    throw Error(ErrorCode::kInvalidTemplate, "no template bound to dataset " + dataset_id);
  }
  return it->second;
}

std::vector<CorpusDocument> build_corpus(std::span<const UserHistory> histories,
                                         const TemplateLookup& templates,
                                         const TokenCounter& counter,
                                         const CorpusOptions& options) {
  std::vector<const UserHistory*> selected;
  for (const auto& h : histories) {
    if (is_pretrain_user(h.user_id, options.ratio, options.seed)) selected.push_back(&h);
  }
  std::sort(selected.begin(), selected.end(), [](const UserHistory* a, const UserHistory* b) {
    return std::tie(a->dataset_id, a->user_id) < std::tie(b->dataset_id, b->user_id);
  });

  auto per_user = parallel_map<std::vector<CorpusDocument>>(
      selected.size(), options.workers, [&](std::size_t i) {
        const UserHistory& history = *selected[i];
        const TemplateSpec& spec = template_for(templates, history.dataset_id);
        std::vector<CorpusDocument> docs;
        auto chunks = chunk_history(history, spec, options.budget, counter, FieldSet::kPretrain);
        for (std::size_t k = 0; k < chunks.size(); ++k) {
          docs.push_back({render_history(chunks[k], spec, FieldSet::kPretrain), history.user_id,
                          history.dataset_id, k});
        }
        return docs;
      });

  std::vector<CorpusDocument> out;
  for (auto& docs : per_user) {
    std::move(docs.begin(), docs.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace recgpt::corpus
