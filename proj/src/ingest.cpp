#include "recgpt/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "recgpt/error.hpp"

namespace recgpt::ingest {

namespace {

std::string json_value_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string joined;
    for (const auto& element : v) {
      if (!joined.empty()) joined += ", ";
      joined += json_value_text(element);
    }
    return joined;
  }
  return v.dump();
}

bool emit(const DatasetDescriptor& d, const RawRecord& raw,
          const std::function<void(SourceRecord&&)>& sink) {
  try {
    SourceRecord record{validate_item(raw, d), validate_interaction(raw, d)};
    sink(std::move(record));
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::string first_content_line(std::istream& in, std::vector<std::string>& buffered) {
  std::string line;
  while (std::getline(in, line)) {
    buffered.push_back(line);
    if (!trim(line).empty()) return trim(line);
  }
  return {};
}

ReadStats read_jsonl(const DatasetDescriptor& d, std::istream& in, std::vector<std::string> head,
                     const std::function<void(SourceRecord&&)>& sink) {
  ReadStats stats;
  auto handle = [&](const std::string& line) {
    if (trim(line).empty()) return;
    RawRecord raw;
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object()) {
        ++stats.skipped;
        return;
      }
      for (const auto& [key, value] : j.items()) {
        if (!value.is_null()) raw[key] = json_value_text(value);
      }
    } catch (const nlohmann::json::exception&) {
      ++stats.skipped;
      return;
    }
    emit(d, raw, sink) ? ++stats.records : ++stats.skipped;
  };
  for (const auto& line : head) handle(line);
  std::string line;
  while (std::getline(in, line)) handle(line);
  return stats;
}

ReadStats read_csv(const DatasetDescriptor& d, std::istream& in, std::vector<std::string> head,
                   const std::function<void(SourceRecord&&)>& sink) {
  ReadStats stats;
  std::vector<std::string> columns;
  std::vector<std::string> cells;
  std::size_t next_head = 0;
  auto next_line = [&](std::string& out) -> bool {
    if (next_head < head.size()) {
      out = head[next_head++];
      return true;
    }
    return static_cast<bool>(std::getline(in, out));
  };

  std::string line;
  while (next_line(line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    // Quoted cells may span physical lines.
    while (!split_csv_line(line, cells)) {
      std::string more;
      if (!next_line(more)) break;
      line += '\n' + more;
    }
    if (columns.empty()) {
      if (!split_csv_line(line, columns)) throw Error(ErrorCode::kFormatMismatch, "bad CSV header");
      for (auto& c : columns) c = trim(c);
      continue;
    }
    if (!split_csv_line(line, cells) || cells.size() != columns.size()) {
      ++stats.skipped;
      continue;
    }
    RawRecord raw;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (!cells[i].empty()) raw[columns[i]] = cells[i];
    }
    emit(d, raw, sink) ? ++stats.records : ++stats.skipped;
  }
  return stats;
}

}  // namespace

bool split_csv_line(const std::string& line, std::vector<std::string>& cells) {
  cells.clear();
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return !quoted;
}

ReadStats read_dataset(const DatasetDescriptor& descriptor, std::istream& source,
                       const std::function<void(SourceRecord&&)>& sink) {
  if (!source) throw Error(ErrorCode::kUnreadableSource, descriptor.dataset_id);
  std::vector<std::string> head;
  const std::string first = first_content_line(source, head);
  if (source.bad()) throw Error(ErrorCode::kUnreadableSource, descriptor.dataset_id);
  const bool looks_json = !first.empty() && first.front() == '{';
  if (descriptor.source_format == SourceFormat::kCsv && looks_json) {
    throw Error(ErrorCode::kFormatMismatch, "declared csv but content is JSON lines");
  }
  if (descriptor.source_format == SourceFormat::kJsonl && !first.empty() && !looks_json) {
    throw Error(ErrorCode::kFormatMismatch, "declared jsonl but content is not JSON objects");
  }
  return descriptor.source_format == SourceFormat::kCsv
             ? read_csv(descriptor, source, std::move(head), sink)
             : read_jsonl(descriptor, source, std::move(head), sink);
}

Dataset read_dataset_files(const DatasetDescriptor& descriptor,
                           const std::vector<std::filesystem::path>& paths, ReadStats* stats) {
  using Chunk = std::pair<std::vector<SourceRecord>, ReadStats>;
  std::vector<std::future<Chunk>> parts;
  for (const auto& path : paths) {
    parts.push_back(std::async(std::launch::async, [&descriptor, path] {
      std::ifstream in(path);
      if (!in) throw Error(ErrorCode::kUnreadableSource, path.string());
      Chunk chunk;
      chunk.second = read_dataset(descriptor, in, [&chunk](SourceRecord&& r) {
        chunk.first.push_back(std::move(r));
      });
      return chunk;
    }));
  }

  Dataset dataset;
  dataset.dataset_id = descriptor.dataset_id;
  std::unordered_map<std::string, std::size_t> item_slot;
  ReadStats total;
  for (auto& part : parts) {
    auto [records, part_stats] = part.get();
    total.records += part_stats.records;
    total.skipped += part_stats.skipped;
    for (auto& record : records) {
      auto [it, inserted] = item_slot.emplace(record.item.item_id, dataset.items.size());
      if (inserted) {
        dataset.items.push_back(std::move(record.item));
      } else if (dataset.items[it->second].title.empty() && !record.item.title.empty()) {
        dataset.items[it->second] = std::move(record.item);
      }
      dataset.interactions.push_back(std::move(record.interaction));
    }
  }
  if (stats != nullptr) *stats = total;
  return dataset;
}

CleanResult clean(const Dataset& dataset) {
  CleanResult result;
  CleanLog& log = result.log;
  Dataset& out = result.dataset;
  out.dataset_id = dataset.dataset_id;

  std::unordered_set<std::string> titled;
  for (const auto& item : dataset.items) {
    if (trim(item.title).empty()) {
      ++log.titleless_items_removed;
    } else {
      titled.insert(item.item_id);
      out.items.push_back(item);
    }
  }

  using Key = std::tuple<std::string, std::string, std::optional<std::int64_t>>;
  std::set<Key> seen;
  std::vector<const Interaction*> kept;
  kept.reserve(dataset.interactions.size());
  std::unordered_map<std::string, std::size_t> per_user;
  for (const auto& x : dataset.interactions) {
    if (!titled.contains(x.item_id)) {
      ++log.titleless_interactions_removed;
      continue;
    }
    if (!seen.emplace(x.user_id, x.item_id, x.timestamp).second) {
      ++log.duplicate_interactions_removed;
      continue;
    }
    kept.push_back(&x);
    ++per_user[x.user_id];
  }

  for (const auto& [user, count] : per_user) {
    if (count < kMinUserInteractions) ++log.sparse_users_removed;
  }
  for (const Interaction* x : kept) {
    if (per_user[x->user_id] < kMinUserInteractions) {
      ++log.sparse_user_interactions_removed;
    } else {
      out.interactions.push_back(*x);
    }
  }
  return result;
}

Dataset dedup_versions(const Dataset& older, const Dataset& newer) {
  std::unordered_set<std::string> old_users;
  for (const auto& x : older.interactions) old_users.insert(x.user_id);
  Dataset out;
  out.dataset_id = newer.dataset_id;
  out.items = newer.items;
  for (const auto& x : newer.interactions) {
    if (!old_users.contains(x.user_id)) out.interactions.push_back(x);
  }
  return out;
}

StatsReport dataset_stats(const Dataset& dataset) {
  std::unordered_set<std::string> users;
  std::unordered_set<std::string> items;
  for (const auto& x : dataset.interactions) {
    users.insert(x.user_id);
    items.insert(x.item_id);
  }
  return {dataset.dataset_id, users.size(), items.size(), dataset.interactions.size()};
}

std::string format_stats_table(const std::vector<StatsReport>& reports) {
  auto grouped = [](std::size_t n) {
    std::string digits = std::to_string(n);
    for (int i = static_cast<int>(digits.size()) - 3; i > 0; i -= 3) digits.insert(i, ",");
    return digits;
  };
  std::size_t name_width = std::string("Total").size();
  for (const auto& r : reports) name_width = std::max(name_width, r.dataset_id.size());

  std::ostringstream out;
  auto row = [&](const std::string& name, const std::string& a, const std::string& b,
                 const std::string& c) {
    out << std::left << std::setw(static_cast<int>(name_width)) << name << " | " << std::right
        << std::setw(12) << a << " | " << std::setw(12) << b << " | " << std::setw(14) << c
        << '\n';
  };
  row("Dataset", "# Users", "# Items", "# Interactions");
  StatsReport total;
  for (const auto& r : reports) {
    row(r.dataset_id, grouped(r.n_users), grouped(r.n_items), grouped(r.n_interactions));
    total.n_users += r.n_users;
    total.n_items += r.n_items;
    total.n_interactions += r.n_interactions;
  }
  row("Total", grouped(total.n_users), grouped(total.n_items), grouped(total.n_interactions));
  return out.str();
}

}  // namespace recgpt::ingest
