#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <istream>
#include <string>
#include <vector>

#include "recgpt/data_model.hpp"

namespace recgpt::ingest {

struct SourceRecord {
  Item item;
  Interaction interaction;
};

struct ReadStats {
  std::size_t records = 0;
  std::size_t skipped = 0;
};

// Streams `source` in the descriptor's format, invoking `sink` per valid row
// in source order. Malformed rows are counted and skipped. Throws
// kFormatMismatch when the content is obviously in the other format and
// kUnreadableSource when the stream cannot be read.
ReadStats read_dataset(const DatasetDescriptor& descriptor, std::istream& source,
                       const std::function<void(SourceRecord&&)>& sink);

// Reads several files (concurrently, merged in argument order) into one
// dataset snapshot. The catalog keeps the first titled occurrence of every
// item id.
Dataset read_dataset_files(const DatasetDescriptor& descriptor,
                           const std::vector<std::filesystem::path>& paths,
                           ReadStats* stats = nullptr);

// Splits one CSV record (RFC 4180 quoting). Returns false on an unterminated
// quote.
bool split_csv_line(const std::string& line, std::vector<std::string>& cells);

struct CleanLog {
  std::size_t titleless_items_removed = 0;
  std::size_t titleless_interactions_removed = 0;
  std::size_t duplicate_interactions_removed = 0;
  std::size_t sparse_users_removed = 0;
  std::size_t sparse_user_interactions_removed = 0;
};

struct CleanResult {
  Dataset dataset;
  CleanLog log;
};

inline constexpr std::size_t kMinUserInteractions = 5;

// Drops titleless items with their interactions, then duplicate
// (user, item, timestamp) records, then users left with fewer than five
// interactions. One pass; orphaned items are kept.
CleanResult clean(const Dataset& dataset);

// Removes from `newer` every user that also appears in `older`.
Dataset dedup_versions(const Dataset& older, const Dataset& newer);

struct StatsReport {
  std::string dataset_id;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_interactions = 0;

  bool operator==(const StatsReport&) const = default;
};

// Items are counted over interactions, so catalog entries nobody touched do
// not inflate the count.
StatsReport dataset_stats(const Dataset& dataset);

// Renders reports as a "Dataset | # Users | # Items | # Interactions" table
// with a trailing total row.
std::string format_stats_table(const std::vector<StatsReport>& reports);

}  // namespace recgpt::ingest
