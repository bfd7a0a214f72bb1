#include <gtest/gtest.h>

#include "recgpt/error.hpp"
#include "recgpt/pipeline.hpp"
#include "support.hpp"

using namespace recgpt;
using namespace recgpt::pipeline;
using recgpt::test::code_of;
using recgpt::test::read_text;
using recgpt::test::TempDir;

namespace {

PipelineConfig e2e_config(const fs::path& out, double hit_rate) {
  auto config = load_config(test::fixtures_dir() / "e2e" / "config.json");
  config.output_dir = out;
  config.backend.mock_hit_rate = hit_rate;
  return config;
}

}  // namespace

TEST(AtomicFile, CommitAndAbandon) {
  TempDir dir;
  const auto target = dir.path() / "a.txt";
  {
    AtomicFile f(target);
    f.stream() << "hello";
    EXPECT_FALSE(fs::exists(target));
    f.commit();
  }
  EXPECT_EQ(read_text(target), "hello");
  {
    AtomicFile f(target);
    f.stream() << "partial";
  }
  EXPECT_EQ(read_text(target), "hello");
  EXPECT_EQ(std::distance(fs::directory_iterator(dir.path()), fs::directory_iterator()), 1);
}

TEST(DataDir, RoundTripAndMerge) {
  TempDir dir;
  std::mt19937_64 rng(3);
  StoredDataset a{test::random_dataset(rng, 4, 6, 5, "a"), "amazon", 5.0, "v2"};
  StoredDataset b{test::random_dataset(rng, 3, 6, 5, "b"), "anime", 10.0, std::nullopt};
  write_data_dir(dir.path(), {a});
  write_data_dir(dir.path(), {b});
  const auto loaded = read_data_dir(dir.path());
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].dataset.dataset_id, "a");
  EXPECT_EQ(loaded[0].dataset.interactions, a.dataset.interactions);
  EXPECT_EQ(loaded[0].version_tag, "v2");
  EXPECT_EQ(loaded[1].template_id, "anime");
  EXPECT_EQ(loaded[1].rating_scale, 10.0);
  EXPECT_EQ(bind_templates(loaded, test::templates()).at("b").domain_id, "anime");
}

TEST(Config, RelativePathsResolve) {
  const auto dir = test::fixtures_dir() / "e2e";
  const auto c = load_config(dir / "config.json");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.datasets.at(0).descriptor, dir / "descriptor.json");
  EXPECT_EQ(c.output_dir, dir / "out");
  EXPECT_NO_THROW(validate_config_paths(c));
  const auto again = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(again), config_to_json(c));
}

TEST(Config, Errors) {
  EXPECT_EQ(code_of([] { config_from_json(nlohmann::json{{"seed", "x"}}); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { load_config("/nonexistent/config.json"); }), ErrorCode::kIo);
  auto c = load_config(test::fixtures_dir() / "e2e" / "config.json");
  c.templates = "/nonexistent/templates.json";
  try {
    validate_config_paths(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/templates.json"), std::string::npos);
  }
}

TEST(Manifest, Fields) {
  RunManifest m{"stats", nlohmann::json{{"a", 1}}, 7, {{"rows", 3}}, {{"embedder", "x"}}};
  const auto j = manifest_json(m);
  EXPECT_EQ(j.at("command"), "stats");
  EXPECT_EQ(j.at("config_hash"), config_hash(nlohmann::json{{"a", 1}}));
  EXPECT_EQ(j.at("versions").at("recgpt"), kVersion);
  EXPECT_EQ(j.at("counts").at("rows"), 3);
  EXPECT_TRUE(j.contains("created_at"));
  EXPECT_NE(config_hash(nlohmann::json{{"a", 2}}), config_hash(nlohmann::json{{"a", 1}}));
}

TEST(Descriptor, ScaleFromTemplate) {
  const auto d = load_descriptor(test::fixtures_dir() / "e2e" / "descriptor.json", &test::templates());
  EXPECT_EQ(d.dataset_id, "shop");
  EXPECT_EQ(d.rating_scale, 5.0);
}

TEST(E2E, PerfectAndBlindMock) {
  TempDir dir;
  const auto hit = run_e2e(e2e_config(dir.path() / "hit", 1.0));
  EXPECT_DOUBLE_EQ(hit.overall.hr_at.at(10), 1.0);
  EXPECT_DOUBLE_EQ(*hit.overall.rmse, 0.0);
  EXPECT_DOUBLE_EQ(*hit.overall.mae, 0.0);
  const auto metrics = nlohmann::json::parse(read_text(dir.path() / "hit" / "metrics.json"));
  for (const char* key : {"hr_at", "ndcg_at", "rmse", "mae"}) EXPECT_TRUE(metrics.at("overall").contains(key)) << key;
  EXPECT_TRUE(metrics.at("datasets").contains("shop"));
  for (const char* file : {"corpus.jsonl", "sft.jsonl", "eval_prompts.jsonl", "generations.jsonl",
                           "predictions.jsonl", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir.path() / "hit" / file)) << file;
  }

  const auto miss = run_e2e(e2e_config(dir.path() / "miss", 0.0));
  EXPECT_DOUBLE_EQ(miss.overall.hr_at.at(10), 0.0);
  EXPECT_DOUBLE_EQ(miss.overall.ndcg_at.at(10), 0.0);
}

TEST(E2E, Deterministic) {
  TempDir dir;
  auto a = e2e_config(dir.path() / "a", 0.6);
  auto b = e2e_config(dir.path() / "b", 0.6);
  b.workers = 3;
  run_e2e(a);
  run_e2e(b);
  for (const char* file : {"corpus.jsonl", "sft.jsonl", "generations.jsonl", "predictions.jsonl", "metrics.json"}) {
    EXPECT_EQ(read_text(dir.path() / "a" / file), read_text(dir.path() / "b" / file)) << file;
  }
}
