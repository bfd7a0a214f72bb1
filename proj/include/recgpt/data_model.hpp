#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace recgpt {

struct Item {
  std::string item_id;
  std::string title;
  std::map<std::string, std::string> attributes;

  bool operator==(const Item&) const = default;
};

struct Interaction {
  std::string user_id;
  std::string item_id;
  std::optional<double> rating;
  std::optional<std::string> review;
  std::optional<std::int64_t> timestamp;
  std::string dataset_id;

  bool operator==(const Interaction&) const = default;
};

struct HistoryEntry {
  Item item;
  Interaction interaction;

  bool operator==(const HistoryEntry&) const = default;
};

// Chronologically ordered interactions of one user within one dataset.
struct UserHistory {
  std::string user_id;
  std::string dataset_id;
  std::vector<HistoryEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool operator==(const UserHistory&) const = default;
};

enum class SourceFormat { kJsonl, kCsv };

// How one raw source maps onto the unified schema. `fields` maps a schema
// field (user_id, item_id, title, rating, review, timestamp or
// attributes.<name>) to the source column that feeds it.
struct DatasetDescriptor {
  std::string dataset_id;
  SourceFormat source_format = SourceFormat::kJsonl;
  std::map<std::string, std::string> fields;
  std::string template_id;
  std::optional<std::string> version_tag;
  double rating_scale = 5.0;

  const std::string* source_for(const std::string& schema_field) const;
};

// Canonical dataset snapshot: an item catalog plus interactions in source
// order.
struct Dataset {
  std::string dataset_id;
  std::vector<Item> items;
  std::vector<Interaction> interactions;
};

// One raw source row, source column name -> textual value. Null or absent
// source values are simply not present.
using RawRecord = std::map<std::string, std::string>;

std::string trim(std::string_view text);

// Parses the descriptor JSON. The on-disk "mapping" object is keyed by
// source column name with the schema field as value.
DatasetDescriptor descriptor_from_json(const nlohmann::json& j);
nlohmann::json descriptor_to_json(const DatasetDescriptor& d);

Interaction validate_interaction(const RawRecord& raw, const DatasetDescriptor& descriptor);

// Builds the item half of a raw row. The title may come back empty; cleaning
// is what removes titleless items.
Item validate_item(const RawRecord& raw, const DatasetDescriptor& descriptor);

using ItemLookup = std::unordered_map<std::string, Item>;

ItemLookup make_item_lookup(const std::vector<Item>& items);

// Groups interactions per user (output sorted by user_id) and stably sorts
// each history by timestamp; entries without a timestamp follow all
// timestamped ones in source order.
std::vector<UserHistory> build_histories(const std::vector<Interaction>& interactions,
                                         const ItemLookup& items);

// Canonical record format.
void to_json(nlohmann::json& j, const Item& item);
void from_json(const nlohmann::json& j, Item& item);
void to_json(nlohmann::json& j, const Interaction& interaction);
void from_json(const nlohmann::json& j, Interaction& interaction);

// Streams one JSON object per line; blank lines are ignored.
void for_each_json_line(std::istream& in, const std::function<void(const nlohmann::json&)>& fn);

std::vector<Interaction> read_interactions_jsonl(std::istream& in);
std::vector<Item> read_items_jsonl(std::istream& in);
void write_interactions_jsonl(std::ostream& out, const std::vector<Interaction>& interactions);
void write_items_jsonl(std::ostream& out, const std::vector<Item>& items);

// Flattens a history back into canonical records (catalog deduplicated,
// first-seen order).
Dataset history_to_records(const UserHistory& history);

}  // namespace recgpt
