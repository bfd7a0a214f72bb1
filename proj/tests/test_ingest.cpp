#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "recgpt/error.hpp"
#include "recgpt/ingest.hpp"
#include "support.hpp"

using namespace recgpt;
using recgpt::test::code_of;

namespace {

DatasetDescriptor jsonl_descriptor() {
  DatasetDescriptor d;
  d.dataset_id = "toy";
  d.source_format = SourceFormat::kJsonl;
  d.fields = {{"user_id", "user"},  {"item_id", "item"},      {"title", "title"},
              {"rating", "rating"}, {"timestamp", "ts"},       {"attributes.genres", "genres"}};
  d.template_id = "movielens";
  return d;
}

DatasetDescriptor csv_descriptor() {
  auto d = jsonl_descriptor();
  d.source_format = SourceFormat::kCsv;
  return d;
}

std::vector<ingest::SourceRecord> read_all(const DatasetDescriptor& d, const std::string& text,
                                           ingest::ReadStats* stats = nullptr) {
  std::istringstream in(text);
  std::vector<ingest::SourceRecord> out;
  auto s = ingest::read_dataset(d, in, [&out](ingest::SourceRecord&& r) { out.push_back(std::move(r)); });
  if (stats != nullptr) *stats = s;
  return out;
}

Dataset make(std::vector<std::pair<std::string, std::string>> items,
             std::vector<std::tuple<std::string, std::string, std::int64_t>> interactions) {
  Dataset d;
  d.dataset_id = "toy";
  for (auto& [id, title] : items) d.items.push_back({id, title, {}});
  for (auto& [u, i, ts] : interactions) {
    Interaction x;
    x.user_id = u;
    x.item_id = i;
    x.timestamp = ts;
    x.dataset_id = "toy";
    d.interactions.push_back(x);
  }
  return d;
}

std::set<std::string> users_of(const Dataset& d) {
  std::set<std::string> out;
  for (const auto& x : d.interactions) out.insert(x.user_id);
  return out;
}

}  // namespace

TEST(Read, ThreeJsonLines) {
  ingest::ReadStats stats;
  const auto records = read_all(jsonl_descriptor(),
                                R"({"user":"u1","item":"a","title":"A","rating":4,"ts":1}
{"user":"u1","item":"b","title":"B","rating":3.5,"ts":2}
{"user":"u2","item":"a","title":"A","genres":["Drama","Crime"]}
)",
                                &stats);
  EXPECT_EQ(stats.records, 3u);
  EXPECT_EQ(stats.skipped, 0u);
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[1].interaction.rating, 3.5);
  EXPECT_EQ(records[2].item.attributes.at("genres"), "Drama, Crime");
}

TEST(Read, CsvSkipsMalformedRow) {
  ingest::ReadStats stats;
  std::string wrong_width = "user,item,title,rating,ts\n";
  for (int i = 0; i < 10; ++i) {
    wrong_width += "u" + std::to_string(i) + ",i" + std::to_string(i) + ",T" + std::to_string(i) + ",4.0" +
                   (i == 3 ? "" : "," + std::to_string(i)) + "\n";
  }
  read_all(csv_descriptor(), wrong_width, &stats);
  EXPECT_EQ(stats.records, 9u);
  EXPECT_EQ(stats.skipped, 1u);
}

TEST(Read, CsvQuotedCells) {
  const auto records = read_all(csv_descriptor(),
                                "user,item,title,genres\r\n"
                                "u1,i1,\"Heat, the \"\"film\"\"\",Crime\r\n"
                                "u1,i2,\"Two\nlines\",Drama\r\n");
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].item.title, "Heat, the \"film\"");
  EXPECT_EQ(records[1].item.title, "Two\nlines");
}

TEST(Read, InvalidRecordsAreSkipped) {
  ingest::ReadStats stats;
  read_all(jsonl_descriptor(),
           "{\"user\":\"u1\",\"item\":\"a\",\"title\":\"A\"}\n"
           "{\"item\":\"a\"}\n"
           "not json\n"
           "{\"user\":\"u1\",\"item\":\"a\",\"rating\":9}\n",
           &stats);
  EXPECT_EQ(stats.records, 1u);
  EXPECT_EQ(stats.skipped, 3u);
}

TEST(Read, FormatMismatch) {
  EXPECT_EQ(code_of([] { read_all(csv_descriptor(), "{\"user\":\"u1\"}\n"); }), ErrorCode::kFormatMismatch);
  EXPECT_EQ(code_of([] { read_all(jsonl_descriptor(), "user,item\nu1,a\n"); }), ErrorCode::kFormatMismatch);
}

TEST(Read, FilesMergeInOrder) {
  test::TempDir dir;
  std::ofstream(dir.path() / "a.jsonl") << "{\"user\":\"u1\",\"item\":\"x\",\"title\":\"\"}\n"
                                        << "{\"user\":\"u1\",\"item\":\"y\",\"title\":\"Y\"}\n";
  std::ofstream(dir.path() / "b.jsonl") << "{\"user\":\"u2\",\"item\":\"x\",\"title\":\"X\"}\n";
  ingest::ReadStats stats;
  const auto d = ingest::read_dataset_files(jsonl_descriptor(), {dir.path() / "a.jsonl", dir.path() / "b.jsonl"},
                                            &stats);
  EXPECT_EQ(stats.records, 3u);
  ASSERT_EQ(d.items.size(), 2u);
  EXPECT_EQ(d.items[0].item_id, "x");
  EXPECT_EQ(d.items[0].title, "X");
  EXPECT_EQ(d.interactions[2].user_id, "u2");
  EXPECT_EQ(code_of([&] { ingest::read_dataset_files(jsonl_descriptor(), {dir.path() / "missing.jsonl"}); }),
            ErrorCode::kUnreadableSource);
}

TEST(Clean, SparseUserRemoved) {
  auto d = make({{"a", "A"}, {"b", "B"}, {"c", "C"}, {"d", "D"}, {"e", "E"}},
                {{"u1", "a", 1}, {"u1", "b", 2}, {"u1", "c", 3}, {"u1", "d", 4},
                 {"u2", "a", 1}, {"u2", "b", 2}, {"u2", "c", 3}, {"u2", "d", 4}, {"u2", "e", 5}});
  const auto r = ingest::clean(d);
  EXPECT_EQ(users_of(r.dataset), std::set<std::string>{"u2"});
  EXPECT_EQ(r.log.sparse_users_removed, 1u);
  EXPECT_EQ(r.log.sparse_user_interactions_removed, 4u);
}

TEST(Clean, TitlelessItemRemoved) {
  auto d = make({{"a", "A"}, {"b", "B"}, {"c", "C"}, {"d", "D"}, {"e", "E"}, {"t", ""}},
                {{"u1", "a", 1}, {"u1", "b", 2}, {"u1", "c", 3}, {"u1", "d", 4}, {"u1", "e", 5},
                 {"u1", "t", 6}});
  const auto r = ingest::clean(d);
  EXPECT_EQ(r.dataset.items.size(), 5u);
  EXPECT_EQ(r.dataset.interactions.size(), 5u);
  EXPECT_EQ(r.log.titleless_items_removed, 1u);
  EXPECT_EQ(r.log.titleless_interactions_removed, 1u);
}

// Five interactions, one on a titleless item: the title rule runs first, so
// the user falls to four and is dropped.
TEST(Clean, TitleRuleCascades) {
  auto d = make({{"a", "A"}, {"b", "B"}, {"c", "C"}, {"d", "D"}, {"t", " "}},
                {{"u1", "a", 1}, {"u1", "b", 2}, {"u1", "c", 3}, {"u1", "d", 4}, {"u1", "t", 5},
                 {"u2", "a", 9}});
  const auto r = ingest::clean(d);
  EXPECT_TRUE(r.dataset.interactions.empty());
  EXPECT_EQ(r.log.sparse_users_removed, 2u);
}

TEST(Clean, ExactDuplicatesCollapse) {
  auto d = make({{"a", "A"}, {"b", "B"}, {"c", "C"}, {"d", "D"}},
                {{"u1", "a", 1}, {"u1", "a", 1}, {"u1", "b", 2}, {"u1", "c", 3}, {"u1", "d", 4},
                 {"u1", "a", 5}});
  const auto r = ingest::clean(d);
  EXPECT_EQ(r.log.duplicate_interactions_removed, 1u);
  EXPECT_EQ(r.dataset.interactions.size(), 5u);
}

TEST(DedupVersions, Cases) {
  auto older = make({{"a", "A"}}, {{"a", "a", 1}, {"b", "a", 1}});
  auto newer = make({{"a", "A"}}, {{"b", "a", 2}, {"c", "a", 2}});
  EXPECT_EQ(users_of(ingest::dedup_versions(older, newer)), std::set<std::string>{"c"});
  auto disjoint = make({{"a", "A"}}, {{"x", "a", 1}});
  EXPECT_EQ(ingest::dedup_versions(disjoint, newer).interactions, newer.interactions);
  auto subset = make({{"a", "A"}}, {{"b", "a", 1}});
  EXPECT_TRUE(ingest::dedup_versions(older, subset).interactions.empty());
}

TEST(Stats, HandCounted) {
  auto d = make({{"a", "A"}, {"b", "B"}, {"c", "C"}, {"d", "D"}},
                {{"u1", "a", 1}, {"u1", "b", 2}, {"u1", "c", 3}, {"u2", "b", 1}, {"u2", "c", 2}, {"u2", "d", 3}});
  const auto s = ingest::dataset_stats(d);
  EXPECT_EQ(s.n_users, 2u);
  EXPECT_EQ(s.n_items, 4u);
  EXPECT_EQ(s.n_interactions, 6u);
  const auto empty = ingest::dataset_stats(Dataset{"none", {}, {}});
  EXPECT_EQ(empty.n_users + empty.n_items + empty.n_interactions, 0u);
}

TEST(Stats, TableColumns) {
  const auto table = ingest::format_stats_table({{"amazon", 1234567, 89, 1000}, {"steam", 1, 2, 3}});
  EXPECT_NE(table.find("# Users"), std::string::npos);
  EXPECT_NE(table.find("# Items"), std::string::npos);
  EXPECT_NE(table.find("# Interactions"), std::string::npos);
  EXPECT_NE(table.find("1,234,567"), std::string::npos);
  EXPECT_NE(table.find("1,234,568"), std::string::npos);  // total row
}

TEST(Property, CleanInvariants) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    auto d = test::random_dataset(rng, 1 + rng() % 12, 1 + rng() % 20, 9);
    for (auto& item : d.items) {
      if (rng() % 6 == 0) item.title = rng() % 2 ? "" : "  ";
    }
    const std::size_t n = d.interactions.size();
    for (std::size_t k = 0; k < n / 5; ++k) d.interactions.push_back(d.interactions[rng() % n]);

    const auto once = ingest::clean(d);
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& x : once.dataset.interactions) ++counts[x.user_id];
    for (const auto& [user, count] : counts) ASSERT_GE(count, ingest::kMinUserInteractions);
    for (const auto& item : once.dataset.items) ASSERT_FALSE(trim(item.title).empty());
    const auto twice = ingest::clean(once.dataset);
    ASSERT_EQ(twice.dataset.interactions, once.dataset.interactions);
    ASSERT_EQ(twice.dataset.items, once.dataset.items);
  }
}
