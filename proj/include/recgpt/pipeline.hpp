#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "recgpt/corpus.hpp"
#include "recgpt/data_model.hpp"
#include "recgpt/generation.hpp"
#include "recgpt/ingest.hpp"
#include "recgpt/leakage.hpp"
#include "recgpt/matcher.hpp"
#include "recgpt/metrics.hpp"
#include "recgpt/sft.hpp"
#include "recgpt/templates.hpp"

namespace recgpt::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

// Writes to a sibling temp file and renames it over the target on commit().
// An uncommitted file is removed on destruction.
class AtomicFile {
 public:
  explicit AtomicFile(fs::path target);
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  ~AtomicFile();

  std::ostream& stream() { return out_; }
  void commit();

 private:
  fs::path target_;
  fs::path temp_;
  std::ofstream out_;
  bool committed_ = false;
};

void write_file_atomic(const fs::path& target, const std::string& content);

template <class T>
void write_jsonl_atomic(const fs::path& target, const std::vector<T>& rows) {
  AtomicFile file(target);
  for (const auto& row : rows) file.stream() << nlohmann::json(row).dump() << '\n';
  file.commit();
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path);

// A cleaned dataset together with the template it renders with.
struct StoredDataset {
  Dataset dataset;
  std::string template_id;
  double rating_scale = 5.0;
  std::optional<std::string> version_tag;
};

// Layout: <dir>/datasets.json registry plus <dir>/<dataset_id>/items.jsonl
// and interactions.jsonl. Existing registry entries for other datasets are
// kept.
void write_data_dir(const fs::path& dir, const std::vector<StoredDataset>& datasets);
std::vector<StoredDataset> read_data_dir(const fs::path& dir);

corpus::TemplateLookup bind_templates(const std::vector<StoredDataset>& datasets,
                                      const TemplateRegistry& registry);

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> counts;
  std::map<std::string, std::string> versions;
};

std::string config_hash(const nlohmann::json& config);
// Manifest JSON; `created_at` is the only non-deterministic field.
nlohmann::json manifest_json(const RunManifest& manifest);
void write_manifest(const fs::path& path, const RunManifest& manifest);

struct BackendConfig {
  std::string kind = "mock";  // "mock" or an http(s) URL
  std::string auth_token_env;
  int timeout_ms = 30000;
  int retries = 3;
  std::size_t max_in_flight = 8;
  double mock_hit_rate = 1.0;
  std::uint64_t mock_seed = 0;
};

struct DatasetInput {
  fs::path descriptor;
  std::vector<fs::path> inputs;
};

struct PipelineConfig {
  std::vector<DatasetInput> datasets;
  fs::path templates;
  std::uint64_t seed = 0;
  std::size_t budget = corpus::kDefaultBudget;
  double split_ratio = corpus::kDefaultPretrainRatio;
  std::vector<sft::Task> tasks = {sft::Task::kRating, sft::Task::kSeqrec};
  sft::RatingLabel rating_label = sft::RatingLabel::kSecondToLast;
  BackendConfig backend;
  fs::path output_dir;
  std::size_t workers = 1;
  std::vector<std::size_t> cutoffs = {5, 10};
};

// Relative paths resolve against the config file's directory. Throws
// kInvalidConfig / kIo naming the offending path.
PipelineConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir = {});
PipelineConfig load_config(const fs::path& path);
nlohmann::json config_to_json(const PipelineConfig& config);
// Every referenced input path must exist.
void validate_config_paths(const PipelineConfig& config);

// Builds a backend from config. For the mock, `answers` and `distractors`
// supply the oracle.
std::unique_ptr<generation::Backend> make_backend(
    const BackendConfig& config, std::unordered_map<std::string, std::string> answers = {},
    std::vector<std::string> distractors = {});

// Loads, cleans and (optionally) de-duplicates one dataset against an older
// version.
struct IngestOutcome {
  StoredDataset stored;
  ingest::ReadStats read;
  ingest::CleanLog clean;
  std::size_t dedup_removed = 0;
};

IngestOutcome ingest_dataset(const DatasetDescriptor& descriptor,
                             const std::vector<fs::path>& inputs,
                             const TemplateRegistry* registry,
                             const std::optional<StoredDataset>& older = std::nullopt);

// Descriptor JSON plus the template-derived rating scale.
DatasetDescriptor load_descriptor(const fs::path& path, const TemplateRegistry* registry);

// Match text of a catalog item: the seqrec response rendering.
matcher::MatchText match_text_for(const TemplateSpec& spec);

std::string query_id(const sft::PromptSample& sample);

// One generate output line.
nlohmann::json generation_record(const sft::PromptSample& sample,
                                 const generation::BatchRecord& record);

// Grounds generation records onto a catalog; every output becomes a
// candidate with its matched item.
std::vector<metrics::RankedPrediction> ground_generations(
    const std::vector<nlohmann::json>& generations, const matcher::ItemIndex& index,
    const matcher::Embedder& embedder);

std::vector<metrics::RatingGeneration> rating_generations(
    const std::vector<nlohmann::json>& generations, double* scale_out);

struct E2EResult {
  std::map<std::string, metrics::MetricReport> seqrec;  // per dataset
  std::map<std::string, metrics::MetricReport> rating;  // per dataset
  // Seqrec and rating pooled over every dataset; carries all four metrics.
  metrics::MetricReport overall;
  std::map<std::string, std::size_t> counts;
};

// Offline/online end-to-end run: ingest + clean, corpus, SFT, leave-last-out
// evaluation prompts over every user, generation, grounding and metrics.
// Artifacts land in config.output_dir.
E2EResult run_e2e(const PipelineConfig& config);

}  // namespace recgpt::pipeline
