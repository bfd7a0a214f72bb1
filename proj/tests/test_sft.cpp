#include <gtest/gtest.h>

#include "recgpt/error.hpp"
#include "recgpt/sft.hpp"
#include "support.hpp"

using namespace recgpt;
using recgpt::test::code_of;
using recgpt::test::fixture_history;
using recgpt::test::templates;

namespace {

UserHistory netflix_history(const std::string& user, std::size_t n, std::size_t title_len = 8) {
  UserHistory h{user, "netflix", {}};
  for (std::size_t i = 0; i < n; ++i) {
    std::string title = "Film " + std::to_string(i) + " ";
    title.resize(std::max(title.size(), title_len), 'z');
    h.entries.push_back(test::make_entry(user, "m" + std::to_string(i), title, static_cast<std::int64_t>(i),
                                         1.0 + static_cast<double>(i % 5)));
  }
  return h;
}

}  // namespace

TEST(Rating, TooShort) {
  EXPECT_EQ(code_of([] { sft::make_rating_sample(netflix_history("u", 1), templates().at("netflix")); }),
            ErrorCode::kHistoryTooShort);
  EXPECT_EQ(code_of([] { sft::make_seqrec_sample(netflix_history("u", 1), templates().at("netflix")); }),
            ErrorCode::kHistoryTooShort);
}

TEST(Rating, AnimeScale) {
  auto h = fixture_history("anime");
  h.entries[h.size() - 2].interaction.rating = 7.0;
  EXPECT_EQ(sft::make_rating_sample(h, templates().at("anime")).response, "7.0/10.0");
}

TEST(Rating, LastItemLabel) {
  const auto h = netflix_history("u", 4);
  const auto s = sft::make_rating_sample(h, templates().at("netflix"), sft::RatingLabel::kLast);
  EXPECT_EQ(s.label_item_id, "m3");
  EXPECT_EQ(s.response, "4.0/5.0");
  EXPECT_NE(s.prompt.find("Film 2"), std::string::npos);
}

TEST(Rating, UnratedLabel) {
  auto h = netflix_history("u", 3);
  h.entries[1].interaction.rating.reset();
  EXPECT_EQ(code_of([&] { sft::make_rating_sample(h, templates().at("netflix")); }),
            ErrorCode::kMissingLabelRating);
}

TEST(Seqrec, MovieLensResponseIsTitleOnly) {
  const auto s = sft::make_seqrec_sample(fixture_history("movielens"), templates().at("movielens"));
  EXPECT_EQ(s.response, "Title: Casino (1995)");
  EXPECT_NE(s.prompt.find("Title: Heat (1995); Genres: Action|Crime|Thriller\n"), std::string::npos);
  EXPECT_EQ(s.label_item_id, "movielens-2");
}

TEST(Seqrec, TwoEntriesGiveOneContextItem) {
  const auto& spec = templates().at("netflix");
  const auto s = sft::make_seqrec_sample(netflix_history("u", 2), spec);
  EXPECT_EQ(s.prompt, std::string(sft::kInstructionMarker) + spec.instruction_seqrec + "\n" + spec.header +
                          "\nTitle: Film 0 z\n" + sft::kResponseMarker);
  EXPECT_EQ(s.response, "Title: Film 1 z");
}

TEST(Build, TenHistoriesBothTasks) {
  std::vector<UserHistory> hs;
  for (int u = 0; u < 10; ++u) hs.push_back(netflix_history("u" + std::to_string(u), 3 + u % 4));
  const std::vector<sft::Task> tasks = {sft::Task::kSeqrec, sft::Task::kRating};
  const auto samples = sft::build_sft_dataset(hs, {{"netflix", templates().at("netflix")}}, tasks,
                                              ByteQuarterCounter(), {2048, sft::RatingLabel::kSecondToLast, 3});
  ASSERT_EQ(samples.size(), 20u);
  EXPECT_EQ(samples[0].user_id, "u0");
  EXPECT_EQ(samples[0].task, sft::Task::kRating);
  EXPECT_EQ(samples[1].task, sft::Task::kSeqrec);
}

TEST(Build, UnratedLabelGivesSeqrecOnly) {
  auto h = netflix_history("u", 4);
  h.entries[2].interaction.rating.reset();
  const std::vector<sft::Task> tasks = {sft::Task::kRating, sft::Task::kSeqrec};
  const auto samples = sft::build_sft_dataset(std::vector<UserHistory>{h}, {{"netflix", templates().at("netflix")}},
                                              tasks, ByteQuarterCounter(), {});
  ASSERT_EQ(samples.size(), 1u);
  EXPECT_EQ(samples[0].task, sft::Task::kSeqrec);
}

TEST(Build, NoRatingTaskDomainSkips) {
  const std::vector<sft::Task> tasks = {sft::Task::kRating, sft::Task::kSeqrec};
  const auto samples = sft::build_sft_dataset(std::vector<UserHistory>{fixture_history("steam")},
                                              {{"steam", templates().at("steam")}}, tasks, ByteQuarterCounter(), {});
  ASSERT_EQ(samples.size(), 1u);
  EXPECT_EQ(samples[0].task, sft::Task::kSeqrec);
}

TEST(Budget, OverBudgetKeepsRecentContext) {
  const auto& spec = templates().at("netflix");
  const auto h = netflix_history("u", 60, 120);
  const ByteQuarterCounter counter;
  const sft::SftOptions options{512, sft::RatingLabel::kSecondToLast, 1};
  for (auto task : {sft::Task::kRating, sft::Task::kSeqrec}) {
    const auto full = task == sft::Task::kRating ? sft::make_rating_sample(h, spec) : sft::make_seqrec_sample(h, spec);
    ASSERT_GE(counter.count(full.serialize()), options.budget);
    const auto s = sft::make_sample(h, spec, task, counter, options);
    ASSERT_TRUE(s);
    EXPECT_LT(counter.count(s->serialize()), options.budget);
    EXPECT_EQ(s->response, full.response);
    EXPECT_EQ(s->label_item_id, full.label_item_id);
    // The context ends right before the label item.
    const std::size_t label = task == sft::Task::kRating ? h.size() - 2 : h.size() - 1;
    const std::string previous = "Title: " + h.entries[label - 1].item.title;
    EXPECT_NE(s->prompt.find(previous), std::string::npos);
    EXPECT_EQ(s->prompt.find("Title: " + h.entries[0].item.title), std::string::npos);
  }
}

TEST(Budget, LabelAloneTooLarge) {
  auto h = netflix_history("u", 3);
  h.entries[2].item.title.assign(20000, 'q');
  EXPECT_EQ(code_of([&] {
              sft::make_sample(h, templates().at("netflix"), sft::Task::kSeqrec, ByteQuarterCounter(), {});
            }),
            ErrorCode::kEntryExceedsBudget);
}

TEST(Tasks, Parse) {
  EXPECT_EQ(sft::parse_tasks("rating,seqrec"), (std::vector<sft::Task>{sft::Task::kRating, sft::Task::kSeqrec}));
  EXPECT_EQ(sft::parse_tasks("seqrec"), (std::vector<sft::Task>{sft::Task::kSeqrec}));
  EXPECT_EQ(code_of([] { sft::parse_tasks("ranking"); }), ErrorCode::kInvalidConfig);
}

TEST(Json, RoundTrip) {
  const auto s = sft::make_seqrec_sample(fixture_history("amazon"), templates().at("amazon"));
  EXPECT_EQ(nlohmann::json(s).get<sft::PromptSample>(), s);
}
