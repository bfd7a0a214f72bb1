#include "recgpt/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <random>
#include <regex>
#include <sstream>

#include "recgpt/error.hpp"
#include "recgpt/hashing.hpp"
#include "recgpt/log.hpp"

namespace recgpt::pipeline {

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

AtomicFile::AtomicFile(fs::path target) : target_(std::move(target)) {
  if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
  std::random_device rd;
  temp_ = target_;
  temp_ += ".tmp-" + hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  out_.open(temp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorCode::kIo, "cannot write " + temp_.string());
}

AtomicFile::~AtomicFile() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    fs::remove(temp_, ec);
  }
}

void AtomicFile::commit() {
  out_.flush();
  if (!out_) throw Error(ErrorCode::kIo, "short write to " + temp_.string());
  out_.close();
  fs::rename(temp_, target_);
  committed_ = true;
}

void write_file_atomic(const fs::path& target, const std::string& content) {
  AtomicFile file(target);
  file.stream() << content;
  file.commit();
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<nlohmann::json> rows;
  try {
    for_each_json_line(in, [&rows](const nlohmann::json& j) { rows.push_back(j); });
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, path.string() + ": " + e.what());
  }
  return rows;
}

// ---------------------------------------------------------------------------

void write_data_dir(const fs::path& dir, const std::vector<StoredDataset>& datasets) {
  fs::create_directories(dir);
  nlohmann::json registry = nlohmann::json::object();
  if (fs::exists(dir / "datasets.json")) {
    std::ifstream in(dir / "datasets.json");
    in >> registry;
  }
  for (const auto& stored : datasets) {
    const auto& d = stored.dataset;
    {
      AtomicFile items(dir / d.dataset_id / "items.jsonl");
      write_items_jsonl(items.stream(), d.items);
      items.commit();
    }
    {
      AtomicFile interactions(dir / d.dataset_id / "interactions.jsonl");
      write_interactions_jsonl(interactions.stream(), d.interactions);
      interactions.commit();
    }
    nlohmann::json entry = {{"template", stored.template_id}, {"rating_scale", stored.rating_scale}};
    if (stored.version_tag) entry["version_tag"] = *stored.version_tag;
    registry[d.dataset_id] = entry;
  }
  write_file_atomic(dir / "datasets.json", registry.dump(2) + "\n");
}

std::vector<StoredDataset> read_data_dir(const fs::path& dir) {
  const fs::path registry_path = dir / "datasets.json";
  std::ifstream in(registry_path);
  if (!in) throw Error(ErrorCode::kIo, "no dataset registry at " + registry_path.string());
  nlohmann::json registry;
  in >> registry;
  std::vector<StoredDataset> out;
  for (const auto& [id, entry] : registry.items()) {
    StoredDataset stored;
    stored.dataset.dataset_id = id;
    stored.template_id = entry.at("template").get<std::string>();
    stored.rating_scale = entry.value("rating_scale", 5.0);
    if (entry.contains("version_tag")) stored.version_tag = entry["version_tag"].get<std::string>();
    std::ifstream items(dir / id / "items.jsonl");
    std::ifstream interactions(dir / id / "interactions.jsonl");
    if (!items || !interactions) throw Error(ErrorCode::kIo, "missing files for dataset " + id);
    stored.dataset.items = read_items_jsonl(items);
    stored.dataset.interactions = read_interactions_jsonl(interactions);
    out.push_back(std::move(stored));
  }
  return out;
}

corpus::TemplateLookup bind_templates(const std::vector<StoredDataset>& datasets,
                                      const TemplateRegistry& registry) {
  corpus::TemplateLookup lookup;
  for (const auto& stored : datasets) {
    lookup.emplace(stored.dataset.dataset_id, registry.at(stored.template_id));
  }
  return lookup;
}

// ---------------------------------------------------------------------------

std::string config_hash(const nlohmann::json& config) {
  return hex64(stable_hash64(config.dump()));
}

nlohmann::json manifest_json(const RunManifest& m) {
  nlohmann::json versions = {{"recgpt", kVersion}};
  for (const auto& [k, v] : m.versions) versions[k] = v;
  return {{"command", m.command},
          {"config_hash", config_hash(m.config)},
          {"config", m.config},
          {"seed", m.seed},
          {"versions", versions},
          {"counts", m.counts},
          {"created_at", utc_now()}};
}

void write_manifest(const fs::path& path, const RunManifest& manifest) {
  write_file_atomic(path, manifest_json(manifest).dump(2) + "\n");
}

PipelineConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    for (const auto& d : j.value("datasets", nlohmann::json::array())) {
      DatasetInput input;
      input.descriptor = resolve(base_dir, d.at("descriptor").get<std::string>());
      for (const auto& p : d.at("inputs")) input.inputs.push_back(resolve(base_dir, p.get<std::string>()));
      c.datasets.push_back(std::move(input));
    }
    if (j.contains("templates")) c.templates = resolve(base_dir, j["templates"].get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.budget = j.value("budget", c.budget);
    c.split_ratio = j.value("split_ratio", c.split_ratio);
    if (j.contains("tasks")) {
      c.tasks.clear();
      for (const auto& t : j["tasks"]) c.tasks.push_back(sft::task_from_string(t.get<std::string>()));
    }
    if (j.value("rating_label", std::string("second_to_last")) == "last") {
      c.rating_label = sft::RatingLabel::kLast;
    }
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      c.backend.kind = b.value("kind", c.backend.kind);
      c.backend.auth_token_env = b.value("auth_token_env", c.backend.auth_token_env);
      c.backend.timeout_ms = b.value("timeout_ms", c.backend.timeout_ms);
      c.backend.retries = b.value("retries", c.backend.retries);
      c.backend.max_in_flight = b.value("max_in_flight", c.backend.max_in_flight);
      c.backend.mock_hit_rate = b.value("mock_hit_rate", c.backend.mock_hit_rate);
      c.backend.mock_seed = b.value("mock_seed", c.backend.mock_seed);
    }
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    c.workers = j.value("workers", c.workers);
    if (j.contains("cutoffs")) c.cutoffs = j["cutoffs"].get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json datasets = nlohmann::json::array();
  for (const auto& d : c.datasets) {
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& p : d.inputs) inputs.push_back(p.string());
    datasets.push_back({{"descriptor", d.descriptor.string()}, {"inputs", inputs}});
  }
  nlohmann::json tasks = nlohmann::json::array();
  for (auto t : c.tasks) tasks.push_back(sft::to_string(t));
  return {{"datasets", datasets},
          {"templates", c.templates.string()},
          {"seed", c.seed},
          {"budget", c.budget},
          {"split_ratio", c.split_ratio},
          {"tasks", tasks},
          {"rating_label", c.rating_label == sft::RatingLabel::kLast ? "last" : "second_to_last"},
          {"backend",
           {{"kind", c.backend.kind},
            {"auth_token_env", c.backend.auth_token_env},
            {"timeout_ms", c.backend.timeout_ms},
            {"retries", c.backend.retries},
            {"max_in_flight", c.backend.max_in_flight},
            {"mock_hit_rate", c.backend.mock_hit_rate},
            {"mock_seed", c.backend.mock_seed}}},
          {"output_dir", c.output_dir.string()},
          {"cutoffs", c.cutoffs}};
}

void validate_config_paths(const PipelineConfig& c) {
  auto require = [](const fs::path& p, const char* what) {
    if (p.empty() || !fs::exists(p)) {
      throw Error(ErrorCode::kIo, std::string(what) + " not found: " + p.string());
    }
  };
  require(c.templates, "template file");
  for (const auto& d : c.datasets) {
    require(d.descriptor, "descriptor");
    for (const auto& p : d.inputs) require(p, "input");
  }
  if (c.datasets.empty()) throw Error(ErrorCode::kInvalidConfig, "no datasets configured");
  if (c.output_dir.empty()) throw Error(ErrorCode::kInvalidConfig, "no output_dir configured");
}

std::unique_ptr<generation::Backend> make_backend(
    const BackendConfig& config, std::unordered_map<std::string, std::string> answers,
    std::vector<std::string> distractors) {
  if (config.kind == "mock") {
    generation::MockConfig mock;
    mock.seed = config.mock_seed;
    mock.hit_rate = config.mock_hit_rate;
    mock.answers = std::move(answers);
    mock.distractors = std::move(distractors);
    return std::make_unique<generation::MockBackend>(std::move(mock));
  }
  generation::HttpBackendConfig http;
  http.url = config.kind;
  http.auth_token_env = config.auth_token_env;
  http.timeout = std::chrono::milliseconds(config.timeout_ms);
  http.retries = config.retries;
  return std::make_unique<generation::HttpBackend>(std::move(http));
}

// ---------------------------------------------------------------------------

DatasetDescriptor load_descriptor(const fs::path& path, const TemplateRegistry* registry) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open descriptor " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidDescriptor, path.string() + ": " + e.what());
  }
  DatasetDescriptor d = descriptor_from_json(j);
  if (registry != nullptr) {
    const TemplateSpec& spec = registry->at(d.template_id);
    if (!j.contains("rating_scale")) d.rating_scale = spec.rating_scale;
    const auto declared = spec.declared_attributes();
    for (const auto& [schema, source] : d.fields) {
      if (!schema.starts_with("attributes.")) continue;
      const std::string name = schema.substr(std::string("attributes.").size());
      if (std::find(declared.begin(), declared.end(), name) == declared.end()) {
        throw Error(ErrorCode::kInvalidDescriptor,
                    "attribute '" + name + "' is not used by template " + d.template_id);
      }
    }
  }
  return d;
}

IngestOutcome ingest_dataset(const DatasetDescriptor& descriptor,
                             const std::vector<fs::path>& inputs,
                             const TemplateRegistry* registry,
                             const std::optional<StoredDataset>& older) {
  if (registry != nullptr) registry->at(descriptor.template_id);
  IngestOutcome outcome;
  Dataset raw = ingest::read_dataset_files(descriptor, inputs, &outcome.read);
  auto cleaned = ingest::clean(raw);
  outcome.clean = cleaned.log;
  Dataset result = std::move(cleaned.dataset);
  if (older) {
    const std::size_t before = result.interactions.size();
    result = ingest::dedup_versions(older->dataset, result);
    outcome.dedup_removed = before - result.interactions.size();
  }
  outcome.stored = {std::move(result), descriptor.template_id, descriptor.rating_scale,
                    descriptor.version_tag};
  return outcome;
}

matcher::MatchText match_text_for(const TemplateSpec& spec) {
  return [spec](const Item& item) {
    HistoryEntry entry{item, {}};
    return corpus::render_entry(entry, spec, spec.fields(FieldSet::kSeqrecResponse));
  };
}

std::string query_id(const sft::PromptSample& s) {
  return s.dataset_id + "/" + s.user_id + "/" + sft::to_string(s.task);
}

nlohmann::json generation_record(const sft::PromptSample& sample,
                                 const generation::BatchRecord& record) {
  nlohmann::json outputs = nlohmann::json::array();
  if (record.result) {
    for (const auto& o : record.result->outputs) outputs.push_back({{"text", o.text}, {"score", o.score}});
  }
  nlohmann::json j = {{"query_id", record.prompt_id},
                      {"prompt", sample.prompt},
                      {"outputs", outputs},
                      {"task", sft::to_string(sample.task)},
                      {"dataset_id", sample.dataset_id},
                      {"user_id", sample.user_id},
                      {"reference", sample.response},
                      {"label_item_id", sample.label_item_id}};
  if (!record.result) j["error"] = record.error;
  return j;
}

std::vector<metrics::RankedPrediction> ground_generations(
    const std::vector<nlohmann::json>& generations, const matcher::ItemIndex& index,
    const matcher::Embedder& embedder) {
  std::vector<metrics::RankedPrediction> out;
  for (const auto& g : generations) {
    metrics::RankedPrediction p;
    p.query_id = g.at("query_id").get<std::string>();
    p.truth_item_id = g.value("label_item_id", std::string());
    for (const auto& o : g.at("outputs")) {
      const auto text = o.at("text").get<std::string>();
      if (trim(text).empty()) continue;
      auto best = matcher::match_top(index, embedder, text, 1);
      p.candidates.push_back({text, o.at("score").get<double>(), best.front().item_id});
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<metrics::RatingGeneration> rating_generations(
    const std::vector<nlohmann::json>& generations, double* scale_out) {
  static const std::regex kReference(R"(^\s*(\d+(?:\.\d+)?)\s*/\s*(\d+(?:\.\d+)?)\s*$)");
  std::vector<metrics::RatingGeneration> out;
  std::optional<double> scale;
  for (const auto& g : generations) {
    const auto reference = g.at("reference").get<std::string>();
    std::smatch m;
    if (!std::regex_match(reference, m, kReference)) {
      throw Error(ErrorCode::kInvalidConfig, "rating reference '" + reference + "' is not x/scale");
    }
    const double s = std::stod(m[2].str());
    if (scale && *scale != s) throw Error(ErrorCode::kInvalidConfig, "mixed rating scales in one run");
    scale = s;
    const auto& outputs = g.at("outputs");
    out.push_back({g.at("query_id").get<std::string>(),
                   outputs.empty() ? std::string() : outputs[0].at("text").get<std::string>(),
                   std::stod(m[1].str())});
  }
  if (scale_out != nullptr) *scale_out = scale.value_or(5.0);
  return out;
}

// ---------------------------------------------------------------------------

E2EResult run_e2e(const PipelineConfig& config) {
  validate_config_paths(config);
  const TemplateRegistry registry = TemplateRegistry::load(config.templates);
  const fs::path out = config.output_dir;
  fs::create_directories(out);
  E2EResult result;

  std::vector<StoredDataset> datasets;
  for (const auto& input : config.datasets) {
    const DatasetDescriptor descriptor = load_descriptor(input.descriptor, &registry);
    auto outcome = ingest_dataset(descriptor, input.inputs, &registry);
    log::info("ingest " + descriptor.dataset_id + ": " + std::to_string(outcome.read.records) +
              " records, " + std::to_string(outcome.read.skipped) + " skipped, " +
              std::to_string(outcome.stored.dataset.interactions.size()) + " after cleaning");
    result.counts["records_read"] += outcome.read.records;
    result.counts["records_skipped"] += outcome.read.skipped;
    datasets.push_back(std::move(outcome.stored));
  }
  write_data_dir(out / "data", datasets);
  const auto templates = bind_templates(datasets, registry);

  std::vector<UserHistory> histories;
  for (const auto& stored : datasets) {
    auto h = build_histories(stored.dataset.interactions, make_item_lookup(stored.dataset.items));
    std::move(h.begin(), h.end(), std::back_inserter(histories));
  }
  result.counts["users"] = histories.size();

  const ByteQuarterCounter counter;
  corpus::CorpusOptions corpus_options{config.budget, config.split_ratio, config.seed, config.workers};
  const auto documents = corpus::build_corpus(histories, templates, counter, corpus_options);
  write_jsonl_atomic(out / "corpus.jsonl", documents);
  result.counts["corpus_documents"] = documents.size();
  log::info("corpus: " + std::to_string(documents.size()) + " documents");

  std::vector<UserHistory> finetune;
  for (const auto& h : histories) {
    if (!corpus::is_pretrain_user(h.user_id, config.split_ratio, config.seed)) finetune.push_back(h);
  }
  sft::SftOptions sft_options{config.budget, config.rating_label, config.workers};
  const auto sft_samples =
      sft::build_sft_dataset(finetune, templates, config.tasks, counter, sft_options);
  write_jsonl_atomic(out / "sft.jsonl", sft_samples);
  result.counts["sft_samples"] = sft_samples.size();
  log::info("sft: " + std::to_string(sft_samples.size()) + " samples");

  // Evaluation prompts: every user's history with its final item(s) as label.
  const auto eval_samples =
      sft::build_sft_dataset(histories, templates, config.tasks, counter, sft_options);
  write_jsonl_atomic(out / "eval_prompts.jsonl", eval_samples);
  result.counts["eval_prompts"] = eval_samples.size();

  const matcher::TrigramEmbedder embedder;
  std::vector<nlohmann::json> all_generations;
  std::vector<metrics::RankedPrediction> all_predictions;
  std::vector<metrics::RatingGeneration> all_ratings;
  std::optional<double> pooled_scale;
  bool mixed_scales = false;
  std::unique_ptr<generation::Backend> shared_backend;
  if (config.backend.kind != "mock") shared_backend = make_backend(config.backend);

  for (const auto& stored : datasets) {
    const auto& id = stored.dataset.dataset_id;
    const TemplateSpec& spec = templates.at(id);
    const auto render = match_text_for(spec);

    for (sft::Task task : config.tasks) {
      std::vector<const sft::PromptSample*> samples;
      std::vector<generation::PromptRequest> requests;
      std::unordered_map<std::string, std::string> answers;
      for (const auto& s : eval_samples) {
        if (s.dataset_id != id || s.task != task) continue;
        samples.push_back(&s);
        requests.push_back({query_id(s), s.prompt});
        answers.emplace(s.prompt, s.response);
      }
      if (requests.empty()) continue;

      std::vector<std::string> distractors;
      if (task == sft::Task::kSeqrec) {
        for (const auto& item : stored.dataset.items) distractors.push_back(render(item));
      } else {
        for (int r = 1; r <= static_cast<int>(spec.rating_scale); ++r) {
          distractors.push_back(corpus::format_rating(r, spec.rating_scale));
        }
      }
      std::unique_ptr<generation::Backend> mock;
      generation::Backend* backend = shared_backend.get();
      if (!backend) {
        mock = make_backend(config.backend, std::move(answers), std::move(distractors));
        backend = mock.get();
      }
      const auto params = task == sft::Task::kSeqrec ? generation::beam_params()
                                                     : generation::sampling_params();
      const std::string run_id = config_hash(config_to_json(config)) + ":" + id + ":" +
                                 sft::to_string(task);
      const auto records =
          generation::run_batch(requests, params, *backend, config.backend.max_in_flight, run_id);

      std::vector<nlohmann::json> generations;
      std::size_t failures = 0;
      for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].result) ++failures;
        generations.push_back(generation_record(*samples[i], records[i]));
      }
      result.counts["generation_errors"] += failures;
      log::info("generate " + id + "/" + sft::to_string(task) + ": " +
                std::to_string(records.size()) + " prompts, " + std::to_string(failures) +
                " errors");

      if (task == sft::Task::kSeqrec) {
        const auto index = matcher::build_index(stored.dataset.items, embedder, render);
        auto predictions = ground_generations(generations, index, embedder);
        result.seqrec[id] = metrics::evaluate_seqrec_run(predictions, config.cutoffs);
        std::move(predictions.begin(), predictions.end(), std::back_inserter(all_predictions));
      } else {
        double scale = spec.rating_scale;
        const auto ratings = rating_generations(generations, &scale);
        result.rating[id] = metrics::evaluate_rating_run(ratings, scale);
        if (!pooled_scale) pooled_scale = scale;
        if (*pooled_scale != scale) mixed_scales = true;
        all_ratings.insert(all_ratings.end(), ratings.begin(), ratings.end());
      }
      std::move(generations.begin(), generations.end(), std::back_inserter(all_generations));
    }
  }

  write_jsonl_atomic(out / "generations.jsonl", all_generations);
  write_jsonl_atomic(out / "predictions.jsonl", all_predictions);

  if (!all_predictions.empty()) {
    result.overall = metrics::evaluate_seqrec_run(all_predictions, config.cutoffs);
  }
  if (mixed_scales) {
    log::warn("rating scales differ across datasets; no pooled RMSE/MAE");
  } else if (!all_ratings.empty()) {
    const auto pooled = metrics::evaluate_rating_run(all_ratings, pooled_scale.value_or(5.0));
    result.overall.rmse = pooled.rmse;
    result.overall.mae = pooled.mae;
    result.overall.n_parse_failures += pooled.n_parse_failures;
    result.overall.n_evaluated += pooled.n_evaluated;
  }
  nlohmann::json overall = metrics::to_json(result.overall);
  overall["task"] = "all";

  nlohmann::json report = {{"overall", overall}, {"datasets", nlohmann::json::object()}};
  for (const auto& [id, r] : result.seqrec) report["datasets"][id]["seqrec"] = metrics::to_json(r);
  for (const auto& [id, r] : result.rating) report["datasets"][id]["rating"] = metrics::to_json(r);
  write_file_atomic(out / "metrics.json", report.dump(2) + "\n");

  RunManifest manifest;
  manifest.command = "e2e";
  manifest.config = config_to_json(config);
  manifest.seed = config.seed;
  manifest.counts = result.counts;
  manifest.versions = {{"token_counter", counter.id()}, {"embedder", embedder.id()}};
  write_manifest(out / "manifest.json", manifest);
  return result;
}

}  // namespace recgpt::pipeline
