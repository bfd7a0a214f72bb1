#include "recgpt/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <string_view>

#include "recgpt/error.hpp"

namespace recgpt {

namespace {

constexpr std::string_view kAttributePrefix = "attributes.";

bool is_schema_field(const std::string& name) {
  static const char* kScalar[] = {"user_id", "item_id", "title", "rating", "review", "timestamp"};
  for (const char* field : kScalar) {
    if (name == field) return true;
  }
  return name.size() > kAttributePrefix.size() && name.starts_with(kAttributePrefix);
}

std::optional<std::string> lookup(const RawRecord& raw, const DatasetDescriptor& d,
                                  const std::string& schema_field) {
  const std::string* source = d.source_for(schema_field);
  if (source == nullptr) return std::nullopt;
  auto it = raw.find(*source);
  if (it == raw.end()) return std::nullopt;
  return it->second;
}

std::string require(const RawRecord& raw, const DatasetDescriptor& d, const std::string& field) {
  auto value = lookup(raw, d, field);
  if (!value || trim(*value).empty()) throw Error(ErrorCode::kMissingField, field);
  return *value;
}

}  // namespace

std::string trim(std::string_view text) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return std::string(text);
}

const std::string* DatasetDescriptor::source_for(const std::string& schema_field) const {
  auto it = fields.find(schema_field);
  return it == fields.end() ? nullptr : &it->second;
}

DatasetDescriptor descriptor_from_json(const nlohmann::json& j) {
  DatasetDescriptor d;
  try {
    d.dataset_id = j.at("dataset_id").get<std::string>();
    const auto format = j.at("source_format").get<std::string>();
    if (format == "jsonl") {
      d.source_format = SourceFormat::kJsonl;
    } else if (format == "csv") {
      d.source_format = SourceFormat::kCsv;
    } else {
      throw Error(ErrorCode::kInvalidDescriptor, "unknown source_format '" + format + "'");
    }
    for (const auto& [source, schema] : j.at("mapping").items()) {
      const auto field = schema.get<std::string>();
      if (!is_schema_field(field)) {
        throw Error(ErrorCode::kInvalidDescriptor, "unknown schema field '" + field + "'");
      }
      if (!d.fields.emplace(field, source).second) {
        throw Error(ErrorCode::kInvalidDescriptor, "schema field '" + field + "' mapped twice");
      }
    }
    d.template_id = j.at("template").get<std::string>();
    if (j.contains("version_tag") && !j["version_tag"].is_null()) {
      d.version_tag = j["version_tag"].get<std::string>();
    }
    if (j.contains("rating_scale")) d.rating_scale = j["rating_scale"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidDescriptor, e.what());
  }
  for (const char* required : {"user_id", "item_id", "title"}) {
    if (d.source_for(required) == nullptr) {
      throw Error(ErrorCode::kInvalidDescriptor, std::string("mapping must cover ") + required);
    }
  }
  return d;
}

nlohmann::json descriptor_to_json(const DatasetDescriptor& d) {
  nlohmann::json mapping = nlohmann::json::object();
  for (const auto& [schema, source] : d.fields) mapping[source] = schema;
  nlohmann::json j = {
      {"dataset_id", d.dataset_id},
      {"source_format", d.source_format == SourceFormat::kCsv ? "csv" : "jsonl"},
      {"mapping", mapping},
      {"template", d.template_id},
      {"rating_scale", d.rating_scale},
  };
  if (d.version_tag) j["version_tag"] = *d.version_tag;
  return j;
}

Interaction validate_interaction(const RawRecord& raw, const DatasetDescriptor& descriptor) {
  Interaction out;
  out.user_id = require(raw, descriptor, "user_id");
  out.item_id = require(raw, descriptor, "item_id");
  out.dataset_id = descriptor.dataset_id;

  if (auto rating = lookup(raw, descriptor, "rating"); rating && !trim(*rating).empty()) {
    const std::string text = trim(*rating);
    double value = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(value)) {
      throw Error(ErrorCode::kRatingOutOfRange, "rating '" + text + "' is not a number");
    }
    if (value < 0.0 || value > descriptor.rating_scale) {
      throw Error(ErrorCode::kRatingOutOfRange,
                  text + " outside [0, " + std::to_string(descriptor.rating_scale) + "]");
    }
    out.rating = value;
  }

  if (auto review = lookup(raw, descriptor, "review"); review && !trim(*review).empty()) {
    out.review = *review;
  }

  if (auto ts = lookup(raw, descriptor, "timestamp"); ts && !trim(*ts).empty()) {
    const std::string text = trim(*ts);
    std::int64_t value = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size()) {
      throw Error(ErrorCode::kMalformedTimestamp, "'" + text + "'");
    }
    out.timestamp = value;
  }
  return out;
}

Item validate_item(const RawRecord& raw, const DatasetDescriptor& descriptor) {
  Item item;
  item.item_id = require(raw, descriptor, "item_id");
  item.title = trim(lookup(raw, descriptor, "title").value_or(""));
  for (const auto& [schema, source] : descriptor.fields) {
    if (!schema.starts_with(kAttributePrefix)) continue;
    auto it = raw.find(source);
    if (it == raw.end()) continue;
    std::string value = trim(it->second);
    if (!value.empty()) item.attributes[schema.substr(kAttributePrefix.size())] = std::move(value);
  }
  return item;
}

ItemLookup make_item_lookup(const std::vector<Item>& items) {
  ItemLookup lookup;
  lookup.reserve(items.size());
  for (const auto& item : items) lookup.emplace(item.item_id, item);
  return lookup;
}

std::vector<UserHistory> build_histories(const std::vector<Interaction>& interactions,
                                         const ItemLookup& items) {
  std::map<std::string, std::vector<const Interaction*>> by_user;
  for (const auto& interaction : interactions) {
    if (!items.contains(interaction.item_id)) {
      throw Error(ErrorCode::kUnresolvedItem, interaction.item_id);
    }
    by_user[interaction.user_id].push_back(&interaction);
  }

  std::vector<UserHistory> histories;
  histories.reserve(by_user.size());
  for (auto& [user_id, rows] : by_user) {
    std::stable_sort(rows.begin(), rows.end(), [](const Interaction* a, const Interaction* b) {
      if (a->timestamp && b->timestamp) return *a->timestamp < *b->timestamp;
      return a->timestamp.has_value() && !b->timestamp.has_value();
    });
    UserHistory history;
    history.user_id = user_id;
    history.dataset_id = rows.front()->dataset_id;
    history.entries.reserve(rows.size());
    for (const Interaction* row : rows) {
      history.entries.push_back({items.at(row->item_id), *row});
    }
    histories.push_back(std::move(history));
  }
  return histories;
}

void to_json(nlohmann::json& j, const Item& item) {
  j = {{"item_id", item.item_id}, {"title", item.title}, {"attributes", item.attributes}};
}

void from_json(const nlohmann::json& j, Item& item) {
  item.item_id = j.at("item_id").get<std::string>();
  item.title = j.at("title").get<std::string>();
  item.attributes.clear();
  if (j.contains("attributes") && !j["attributes"].is_null()) {
    item.attributes = j["attributes"].get<std::map<std::string, std::string>>();
  }
}

void to_json(nlohmann::json& j, const Interaction& x) {
  j = {{"user_id", x.user_id},
       {"item_id", x.item_id},
       {"rating", x.rating ? nlohmann::json(*x.rating) : nlohmann::json(nullptr)},
       {"review", x.review ? nlohmann::json(*x.review) : nlohmann::json(nullptr)},
       {"timestamp", x.timestamp ? nlohmann::json(*x.timestamp) : nlohmann::json(nullptr)},
       {"dataset_id", x.dataset_id}};
}

void from_json(const nlohmann::json& j, Interaction& x) {
  x.user_id = j.at("user_id").get<std::string>();
  x.item_id = j.at("item_id").get<std::string>();
  x.dataset_id = j.value("dataset_id", std::string());
  auto optional_field = [&j](const char* key) -> const nlohmann::json* {
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? nullptr : &*it;
  };
  x.rating.reset();
  x.review.reset();
  x.timestamp.reset();
  if (auto* v = optional_field("rating")) x.rating = v->get<double>();
  if (auto* v = optional_field("review")) x.review = v->get<std::string>();
  if (auto* v = optional_field("timestamp")) x.timestamp = v->get<std::int64_t>();
}

void for_each_json_line(std::istream& in, const std::function<void(const nlohmann::json&)>& fn) {
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    fn(nlohmann::json::parse(line));
  }
}

std::vector<Interaction> read_interactions_jsonl(std::istream& in) {
  std::vector<Interaction> out;
  for_each_json_line(in, [&out](const nlohmann::json& j) { out.push_back(j.get<Interaction>()); });
  return out;
}

std::vector<Item> read_items_jsonl(std::istream& in) {
  std::vector<Item> out;
  for_each_json_line(in, [&out](const nlohmann::json& j) { out.push_back(j.get<Item>()); });
  return out;
}

void write_interactions_jsonl(std::ostream& out, const std::vector<Interaction>& interactions) {
  for (const auto& x : interactions) out << nlohmann::json(x).dump() << '\n';
}

void write_items_jsonl(std::ostream& out, const std::vector<Item>& items) {
  for (const auto& item : items) out << nlohmann::json(item).dump() << '\n';
}

Dataset history_to_records(const UserHistory& history) {
  Dataset out;
  out.dataset_id = history.dataset_id;
  std::unordered_map<std::string, bool> seen;
  for (const auto& entry : history.entries) {
    if (seen.emplace(entry.item.item_id, true).second) out.items.push_back(entry.item);
    out.interactions.push_back(entry.interaction);
  }
  return out;
}

}  // namespace recgpt
