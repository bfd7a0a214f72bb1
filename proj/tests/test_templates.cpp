#include <gtest/gtest.h>

#include "recgpt/corpus.hpp"
#include "recgpt/error.hpp"
#include "recgpt/sft.hpp"
#include "recgpt/templates.hpp"
#include "support.hpp"

using namespace recgpt;
using recgpt::test::code_of;
using recgpt::test::fixture_history;
using recgpt::test::golden_dir;
using recgpt::test::read_text;
using recgpt::test::templates;

namespace {

std::string golden(const std::string& name) { return read_text(golden_dir() / (name + ".txt")); }

std::string framed(const std::string& instruction, const std::string& body) {
  return std::string(sft::kInstructionMarker) + instruction + "\n" + body + "\n" + sft::kResponseMarker;
}

nlohmann::json minimal_template() {
  return nlohmann::json::parse(R"({
    "domain_id": "toy",
    "header": "History:",
    "rating_scale": 5.0,
    "instruction_rating": "Rate.",
    "instruction_seqrec": "Next.",
    "item_fields_pretrain": [["Title", "title"], ["Rating", "rating"]],
    "item_fields_rating": [["Title", "title"], ["Rating", "rating"]],
    "item_fields_seqrec": [["Title", "title"]],
    "response_fields_seqrec": [["Title", "title"]]
  })");
}

}  // namespace

TEST(ReferenceExample, Pretraining) {
  const auto& spec = templates().at("amazon");
  EXPECT_EQ(corpus::render_history(fixture_history("amazon", "pretrain_history"), spec, FieldSet::kPretrain),
            golden("reference_pretrain"));
}

TEST(ReferenceExample, FirstEntryIsFirstTwoLines) {
  const auto& spec = templates().at("amazon");
  auto h = fixture_history("amazon", "pretrain_history");
  h.entries.resize(1);
  const auto text = golden("reference_pretrain");
  const auto second_newline = text.find('\n', text.find('\n') + 1);
  EXPECT_EQ(corpus::render_history(h, spec, FieldSet::kPretrain), text.substr(0, second_newline));
}

TEST(ReferenceExample, RatingPrompt) {
  const auto& spec = templates().at("amazon");
  const auto s = sft::make_rating_sample(fixture_history("amazon"), spec);
  EXPECT_EQ(s.prompt, framed(spec.instruction_rating, golden("reference_rating_body")));
  EXPECT_EQ(s.response, golden("reference_rating_response"));
  EXPECT_EQ(s.response, "4.0/5.0");
}

TEST(ReferenceExample, SeqrecPrompt) {
  const auto& spec = templates().at("amazon");
  const auto s = sft::make_seqrec_sample(fixture_history("amazon"), spec);
  EXPECT_EQ(s.prompt, framed(spec.instruction_seqrec, golden("reference_seqrec_body")));
  EXPECT_EQ(s.response, "Title: Animal Hats; Brand: ZoopurPets");
  EXPECT_EQ(s.response, golden("reference_seqrec_response"));
}

class DomainGolden : public ::testing::TestWithParam<std::string> {};

TEST_P(DomainGolden, Pretraining) {
  const auto& domain = GetParam();
  const auto key = domain == "amazon" ? "pretrain_history" : "history";
  EXPECT_EQ(corpus::render_history(fixture_history(domain, key), templates().at(domain), FieldSet::kPretrain),
            golden(domain + "_pretrain"));
}

TEST_P(DomainGolden, Rating) {
  const auto& domain = GetParam();
  const auto& spec = templates().at(domain);
  if (!spec.supports_rating()) {
    EXPECT_EQ(code_of([&] { sft::make_rating_sample(fixture_history(domain), spec); }),
              ErrorCode::kInvalidTemplate);
    return;
  }
  EXPECT_EQ(sft::make_rating_sample(fixture_history(domain), spec).serialize(), golden(domain + "_rating"));
}

TEST_P(DomainGolden, Seqrec) {
  const auto& domain = GetParam();
  EXPECT_EQ(sft::make_seqrec_sample(fixture_history(domain), templates().at(domain)).serialize(),
            golden(domain + "_seqrec"));
}

INSTANTIATE_TEST_SUITE_P(AllDomains, DomainGolden,
                         ::testing::Values("amazon", "amazon_books", "anime", "bookcrossing", "food",
                                           "goodreads", "hotelrec", "movielens", "netflix", "steam",
                                           "wikirec", "yelp"));

TEST(Registry, CoversEveryDomain) {
  EXPECT_EQ(templates().domains().size(), 12u);
  EXPECT_EQ(templates().at("anime").rating_scale, 10.0);
  EXPECT_EQ(templates().at("bookcrossing").rating_scale, 10.0);
  EXPECT_EQ(templates().find("nope"), nullptr);
  EXPECT_EQ(code_of([] { templates().at("nope"); }), ErrorCode::kInvalidTemplate);
}

TEST(Registry, MissingFileNamesPath) {
  try {
    TemplateRegistry::load("/no/such/dir/templates.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("/no/such/dir/templates.json"), std::string::npos);
  }
}

TEST(Validate, AcceptsMinimal) { EXPECT_NO_THROW(template_from_json(minimal_template())); }

TEST(Validate, RejectsOddScale) {
  auto j = minimal_template();
  j["rating_scale"] = 7.0;
  EXPECT_EQ(code_of([&] { template_from_json(j); }), ErrorCode::kInvalidTemplate);
}

TEST(Validate, RatingFieldsMustEndWithRating) {
  auto j = minimal_template();
  j["item_fields_rating"] = nlohmann::json::parse(R"([["Rating", "rating"], ["Title", "title"]])");
  EXPECT_EQ(code_of([&] { template_from_json(j); }), ErrorCode::kInvalidTemplate);
}

TEST(Validate, SeqrecExcludesRatingAndReview) {
  auto j = minimal_template();
  j["item_fields_seqrec"] = nlohmann::json::parse(R"([["Title", "title"], ["Review", "review"]])");
  EXPECT_EQ(code_of([&] { template_from_json(j); }), ErrorCode::kInvalidTemplate);
  j = minimal_template();
  j["response_fields_seqrec"] = nlohmann::json::parse(R"([["Title", "title"], ["Rating", "rating"]])");
  EXPECT_EQ(code_of([&] { template_from_json(j); }), ErrorCode::kInvalidTemplate);
}

TEST(Validate, EmptyLabel) {
  auto j = minimal_template();
  j["item_fields_seqrec"] = nlohmann::json::parse(R"([["", "title"]])");
  EXPECT_EQ(code_of([&] { template_from_json(j); }), ErrorCode::kUnknownTemplateField);
}

TEST(Render, NetflixTitleAndRating) {
  const auto& spec = templates().at("netflix");
  const auto e = test::make_entry("u", "n1", "Dinosaur Planet", 0, 5.0);
  EXPECT_EQ(corpus::render_entry(e, spec, spec.fields(FieldSet::kPretrain)),
            "Title: Dinosaur Planet; Rating: 5.0/5.0");
}

TEST(Render, MissingOptionalFieldDropsSegment) {
  const auto& spec = templates().at("amazon");
  auto e = test::make_entry("u", "a1", "Hat", 0, 3.0);
  EXPECT_EQ(corpus::render_entry(e, spec, spec.fields(FieldSet::kPretrain)), "Title: Hat; Rating: 3.0/5.0");
  e.item.attributes["brand"] = "Acme";
  e.interaction.review = "Fine";
  EXPECT_EQ(corpus::render_entry(e, spec, spec.fields(FieldSet::kPretrain)),
            "Title: Hat; Brand: Acme; Review: Fine; Rating: 3.0/5.0");
}

TEST(Render, UndeclaredAttribute) {
  auto e = test::make_entry("u", "a1", "Hat", 0);
  e.item.attributes["colour"] = "red";
  EXPECT_EQ(code_of([&] {
              corpus::render_entry(e, templates().at("amazon"), templates().at("amazon").fields(FieldSet::kPretrain));
            }),
            ErrorCode::kUnknownTemplateField);
}

TEST(Render, EmptyHistoryIsHeader) {
  const auto& spec = templates().at("amazon");
  EXPECT_EQ(corpus::render_history(UserHistory{"u", "amazon", {}}, spec, FieldSet::kPretrain), spec.header);
}
