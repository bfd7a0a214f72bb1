// recgpt command line: one subcommand per pipeline stage plus e2e.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "recgpt/error.hpp"
#include "recgpt/log.hpp"
#include "recgpt/parallel.hpp"
#include "recgpt/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace recgpt;

namespace {

struct Globals {
  std::optional<fs::path> config;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::string log_level;
};

struct Context {
  pipeline::PipelineConfig config;
  json flags = json::object();
};

Context make_context(const Globals& g) {
  Context ctx;
  json raw = json::object();
  if (g.config) {
    std::ifstream in(*g.config);
    if (!in) throw Error(ErrorCode::kIo, "cannot open config " + g.config->string());
    try {
      in >> raw;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig, g.config->string() + ": " + e.what());
    }
    ctx.config = pipeline::config_from_json(raw, g.config->parent_path());
  }
  if (g.workers) {
    ctx.config.workers = *g.workers;
  } else if (!raw.contains("workers")) {
    ctx.config.workers = default_workers();
  }
  if (g.seed) ctx.config.seed = *g.seed;
  return ctx;
}

template <class T>
T pick(const std::optional<T>& flag, const T& fallback) {
  return flag ? *flag : fallback;
}

fs::path require_path(const std::optional<fs::path>& flag, const fs::path& fallback,
                      const char* what) {
  fs::path p = pick(flag, fallback);
  if (p.empty()) throw Error(ErrorCode::kInvalidConfig, std::string("no ") + what + " given");
  return p;
}

fs::path manifest_path_for(const fs::path& out) {
  fs::path p = out;
  p += ".manifest.json";
  return p;
}

void write_manifest(const fs::path& path, const std::string& command, const Context& ctx,
                    json flags, std::map<std::string, std::size_t> counts,
                    std::map<std::string, std::string> versions = {}) {
  pipeline::RunManifest m;
  m.command = command;
  m.config = {{"pipeline", pipeline::config_to_json(ctx.config)}, {"flags", std::move(flags)}};
  m.seed = ctx.config.seed;
  m.counts = std::move(counts);
  m.versions = std::move(versions);
  pipeline::write_manifest(path, m);
}

std::vector<Interaction> read_interactions_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_interactions_jsonl(in);
}

std::vector<Item> read_items_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_items_jsonl(in);
}

leakage::KeyMode parse_key_mode(const std::string& key) {
  if (key == "user,item") return leakage::KeyMode::kUserItem;
  if (key == "user,item,time" || key == "user,item,timestamp") return leakage::KeyMode::kUserItemTime;
  throw Error(ErrorCode::kInvalidConfig, "unknown key '" + key + "'");
}

std::vector<std::size_t> parse_cutoffs(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    const std::string cell = trim(text.substr(pos, comma - pos));
    if (!cell.empty()) out.push_back(std::stoul(cell));
    pos = comma + 1;
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidConfig, "no cutoffs in '" + text + "'");
  return out;
}

std::vector<UserHistory> load_histories(const std::vector<pipeline::StoredDataset>& datasets) {
  std::vector<UserHistory> out;
  for (const auto& s : datasets) {
    auto h = build_histories(s.dataset.interactions, make_item_lookup(s.dataset.items));
    std::move(h.begin(), h.end(), std::back_inserter(out));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::optional<fs::path> descriptor, templates, older;
  std::vector<fs::path> inputs;
  std::optional<fs::path> out;
};

int run_ingest(const Context& ctx, const IngestArgs& a) {
  const fs::path templates_path = pick(a.templates, ctx.config.templates);
  std::optional<TemplateRegistry> registry;
  if (!templates_path.empty()) registry = TemplateRegistry::load(templates_path);
  const TemplateRegistry* reg = registry ? &*registry : nullptr;

  std::vector<pipeline::DatasetInput> inputs;
  if (a.descriptor) {
    inputs.push_back({*a.descriptor, a.inputs});
  } else {
    inputs = ctx.config.datasets;
  }
  if (inputs.empty()) throw Error(ErrorCode::kInvalidConfig, "no descriptor given");
  const fs::path out = require_path(a.out, ctx.config.output_dir / "data", "--out");

  std::optional<std::vector<pipeline::StoredDataset>> older;
  if (a.older) older = pipeline::read_data_dir(*a.older);

  std::vector<pipeline::StoredDataset> stored;
  std::map<std::string, std::size_t> counts;
  for (const auto& input : inputs) {
    const auto descriptor = pipeline::load_descriptor(input.descriptor, reg);
    std::optional<pipeline::StoredDataset> previous;
    if (older) {
      for (const auto& s : *older) {
        if (s.dataset.dataset_id == descriptor.dataset_id) previous = s;
      }
    }
    auto outcome = pipeline::ingest_dataset(descriptor, input.inputs, reg, previous);
    const auto& c = outcome.clean;
    log::info("ingest " + descriptor.dataset_id + ": read " + std::to_string(outcome.read.records) +
              ", skipped " + std::to_string(outcome.read.skipped) + ", titleless " +
              std::to_string(c.titleless_interactions_removed) + ", duplicates " +
              std::to_string(c.duplicate_interactions_removed) + ", sparse users " +
              std::to_string(c.sparse_users_removed) + ", cross-version " +
              std::to_string(outcome.dedup_removed));
    counts["records_read"] += outcome.read.records;
    counts["records_skipped"] += outcome.read.skipped;
    counts["titleless_items_removed"] += c.titleless_items_removed;
    counts["titleless_interactions_removed"] += c.titleless_interactions_removed;
    counts["duplicate_interactions_removed"] += c.duplicate_interactions_removed;
    counts["sparse_users_removed"] += c.sparse_users_removed;
    counts["sparse_user_interactions_removed"] += c.sparse_user_interactions_removed;
    counts["cross_version_removed"] += outcome.dedup_removed;
    counts["interactions"] += outcome.stored.dataset.interactions.size();
    counts["items"] += outcome.stored.dataset.items.size();
    stored.push_back(std::move(outcome.stored));
  }
  pipeline::write_data_dir(out, stored);
  write_manifest(out / "manifest.json", "ingest", ctx, {{"out", out.string()}}, counts);
  return 0;
}

struct StatsArgs {
  std::optional<fs::path> data, out;
  bool as_json = false;
};

int run_stats(const Context& ctx, const StatsArgs& a) {
  const fs::path data = require_path(a.data, ctx.config.output_dir / "data", "--data");
  std::vector<ingest::StatsReport> reports;
  for (const auto& s : pipeline::read_data_dir(data)) reports.push_back(ingest::dataset_stats(s.dataset));
  json j = json::array();
  for (const auto& r : reports) {
    j.push_back({{"dataset_id", r.dataset_id},
                 {"n_users", r.n_users},
                 {"n_items", r.n_items},
                 {"n_interactions", r.n_interactions}});
  }
  const std::string text = a.as_json ? j.dump(2) + "\n" : ingest::format_stats_table(reports);
  std::cout << text;
  if (a.out) {
    pipeline::write_file_atomic(*a.out, text);
    write_manifest(manifest_path_for(*a.out), "stats", ctx, {{"data", data.string()}},
                   {{"datasets", reports.size()}});
  }
  return 0;
}

struct CorpusArgs {
  std::optional<fs::path> data, templates, out;
  std::optional<std::size_t> budget;
  std::optional<double> split;
};

int run_build_corpus(const Context& ctx, const CorpusArgs& a) {
  const fs::path data = require_path(a.data, ctx.config.output_dir / "data", "--data");
  const fs::path out = require_path(a.out, ctx.config.output_dir / "corpus.jsonl", "--out");
  const auto registry =
      TemplateRegistry::load(require_path(a.templates, ctx.config.templates, "--templates"));
  const auto datasets = pipeline::read_data_dir(data);
  const auto histories = load_histories(datasets);
  const ByteQuarterCounter counter;
  corpus::CorpusOptions options{pick(a.budget, ctx.config.budget),
                                pick(a.split, ctx.config.split_ratio), ctx.config.seed,
                                ctx.config.workers};
  corpus::split_users(std::vector<std::string>{}, options.ratio, options.seed);
  const auto docs = corpus::build_corpus(histories, pipeline::bind_templates(datasets, registry),
                                         counter, options);
  log::info("build-corpus: " + std::to_string(histories.size()) + " users, " +
            std::to_string(docs.size()) + " documents");
  pipeline::write_jsonl_atomic(out, docs);
  write_manifest(manifest_path_for(out), "build-corpus", ctx,
                 {{"data", data.string()}, {"budget", options.budget}, {"split", options.ratio}},
                 {{"users", histories.size()}, {"documents", docs.size()}},
                 {{"token_counter", counter.id()}});
  return 0;
}

struct SftArgs {
  std::optional<fs::path> data, templates, out;
  std::optional<std::string> tasks, rating_label;
  std::optional<std::size_t> budget;
  std::optional<double> split;
  bool all_users = false;
};

int run_build_sft(const Context& ctx, const SftArgs& a) {
  const fs::path data = require_path(a.data, ctx.config.output_dir / "data", "--data");
  const fs::path out = require_path(a.out, ctx.config.output_dir / "sft.jsonl", "--out");
  const auto registry =
      TemplateRegistry::load(require_path(a.templates, ctx.config.templates, "--templates"));
  const auto datasets = pipeline::read_data_dir(data);
  const auto tasks = a.tasks ? sft::parse_tasks(*a.tasks) : ctx.config.tasks;
  const double ratio = pick(a.split, ctx.config.split_ratio);

  std::vector<UserHistory> histories;
  for (auto& h : load_histories(datasets)) {
    if (a.all_users || !corpus::is_pretrain_user(h.user_id, ratio, ctx.config.seed)) {
      histories.push_back(std::move(h));
    }
  }
  sft::SftOptions options{pick(a.budget, ctx.config.budget), ctx.config.rating_label,
                          ctx.config.workers};
  if (a.rating_label) {
    if (*a.rating_label == "last") {
      options.rating_label = sft::RatingLabel::kLast;
    } else if (*a.rating_label == "second_to_last") {
      options.rating_label = sft::RatingLabel::kSecondToLast;
    } else {
      throw Error(ErrorCode::kInvalidConfig, "unknown rating label '" + *a.rating_label + "'");
    }
  }
  const ByteQuarterCounter counter;
  const auto samples = sft::build_sft_dataset(
      histories, pipeline::bind_templates(datasets, registry), tasks, counter, options);
  log::info("build-sft: " + std::to_string(histories.size()) + " users, " +
            std::to_string(samples.size()) + " samples");
  pipeline::write_jsonl_atomic(out, samples);
  json task_names = json::array();
  for (auto t : tasks) task_names.push_back(sft::to_string(t));
  write_manifest(manifest_path_for(out), "build-sft", ctx,
                 {{"data", data.string()}, {"tasks", task_names}, {"all_users", a.all_users}},
                 {{"users", histories.size()}, {"samples", samples.size()}},
                 {{"token_counter", counter.id()}});
  return 0;
}

struct SplitArgs {
  std::optional<fs::path> data, out;
  std::string strategy = "random";
  std::string ratios = "0.8,0.1,0.1";
  std::string key = "user,item,time";
};

int run_split(const Context& ctx, const SplitArgs& a) {
  const fs::path data = require_path(a.data, ctx.config.output_dir / "data", "--data");
  const fs::path out = require_path(a.out, ctx.config.output_dir / "split", "--out");
  const auto mode = parse_key_mode(a.key);
  const auto datasets = pipeline::read_data_dir(data);

  std::vector<Interaction> all;
  for (const auto& s : datasets) {
    all.insert(all.end(), s.dataset.interactions.begin(), s.dataset.interactions.end());
  }
  leakage::SplitAssignment assignment;
  if (a.strategy == "random") {
    leakage::Ratios ratios{};
    std::size_t i = 0, pos = 0;
    for (; i < 3 && pos <= a.ratios.size(); ++i) {
      const auto comma = std::min(a.ratios.find(',', pos), a.ratios.size());
      ratios[i] = std::stod(a.ratios.substr(pos, comma - pos));
      pos = comma + 1;
    }
    if (i != 3) throw Error(ErrorCode::kBadRatios, "need three ratios, got '" + a.ratios + "'");
    assignment = leakage::random_interaction_split(all, ratios, ctx.config.seed, mode);
  } else if (a.strategy == "leave-one-out") {
    assignment = leakage::leave_one_out_assignment(load_histories(datasets), mode);
  } else {
    throw Error(ErrorCode::kInvalidConfig, "unknown strategy '" + a.strategy + "'");
  }

  std::vector<Interaction> train, validation, test;
  for (const auto& x : all) {
    const auto key = leakage::key_of(x, mode);
    if (assignment.test.contains(key)) {
      test.push_back(x);
    } else if (assignment.validation.contains(key)) {
      validation.push_back(x);
    } else if (assignment.train.contains(key)) {
      train.push_back(x);
    }
  }
  pipeline::write_jsonl_atomic(out / "train.jsonl", train);
  pipeline::write_jsonl_atomic(out / "validation.jsonl", validation);
  pipeline::write_jsonl_atomic(out / "test.jsonl", test);
  log::info("split " + a.strategy + ": " + std::to_string(train.size()) + "/" +
            std::to_string(validation.size()) + "/" + std::to_string(test.size()));
  write_manifest(out / "manifest.json", "split", ctx,
                 {{"data", data.string()}, {"strategy", a.strategy}, {"ratios", a.ratios},
                  {"key", a.key}},
                 {{"train", train.size()}, {"validation", validation.size()}, {"test", test.size()}});
  return 0;
}

struct LeakArgs {
  fs::path train, test;
  std::optional<fs::path> validation, out;
  std::string key = "user,item,time";
  std::size_t sample = 10;
};

leakage::KeySet held_out_keys(const LeakArgs& a, leakage::KeyMode mode) {
  auto held = leakage::keys_of(read_interactions_file(a.test), mode);
  if (a.validation) held.merge(leakage::keys_of(read_interactions_file(*a.validation), mode));
  return held;
}

int run_check_leakage(const Context& ctx, const LeakArgs& a) {
  const auto mode = parse_key_mode(a.key);
  const auto train = read_interactions_file(a.train);
  const auto leaks = leakage::find_leaks(leakage::keys_of(train, mode), held_out_keys(a, mode));
  json sample = json::array();
  for (const auto& k : leaks) {
    if (sample.size() >= a.sample) break;
    sample.push_back(leakage::key_to_json(k));
  }
  const json report = {{"n_leaked", leaks.size()}, {"sample_keys", sample}};
  std::cout << report.dump(2) << "\n";
  if (a.out) {
    pipeline::write_file_atomic(*a.out, report.dump(2) + "\n");
    write_manifest(manifest_path_for(*a.out), "check-leakage", ctx,
                   {{"train", a.train.string()}, {"test", a.test.string()}, {"key", a.key}},
                   {{"train", train.size()}, {"leaked", leaks.size()}});
  }
  return 0;
}

int run_fix_leakage(const Context& ctx, const LeakArgs& a) {
  if (!a.out) throw Error(ErrorCode::kInvalidConfig, "fix-leakage needs --out");
  const auto mode = parse_key_mode(a.key);
  const auto train = read_interactions_file(a.train);
  const auto result = leakage::filter_train(train, held_out_keys(a, mode), mode);
  pipeline::write_jsonl_atomic(*a.out, result.train);
  log::info("fix-leakage: removed " + std::to_string(result.removed) + " of " +
            std::to_string(train.size()));
  write_manifest(manifest_path_for(*a.out), "fix-leakage", ctx,
                 {{"train", a.train.string()}, {"test", a.test.string()}, {"key", a.key}},
                 {{"train", train.size()}, {"removed", result.removed},
                  {"kept", result.train.size()}});
  return 0;
}

struct GenerateArgs {
  fs::path sft_path;
  std::string task = "seqrec";
  std::optional<std::string> backend, params, auth_token_env;
  std::optional<int> max_new_tokens, timeout_ms, retries;
  std::optional<std::size_t> max_in_flight;
  std::optional<double> hit_rate;
  std::optional<fs::path> out;
};

int run_generate(const Context& ctx, const GenerateArgs& a) {
  const fs::path out = require_path(a.out, ctx.config.output_dir / "gens.jsonl", "--out");
  const auto task = sft::task_from_string(a.task);
  pipeline::BackendConfig bc = ctx.config.backend;
  if (a.backend) bc.kind = *a.backend;
  if (a.auth_token_env) bc.auth_token_env = *a.auth_token_env;
  if (a.timeout_ms) bc.timeout_ms = *a.timeout_ms;
  if (a.retries) bc.retries = *a.retries;
  if (a.max_in_flight) bc.max_in_flight = *a.max_in_flight;
  if (a.hit_rate) bc.mock_hit_rate = *a.hit_rate;

  const int default_tokens =
      task == sft::Task::kSeqrec ? generation::kSeqrecMaxNewTokens : generation::kRatingMaxNewTokens;
  const std::string params_text =
      pick(a.params, std::string(task == sft::Task::kSeqrec ? "beam:10" : "sampling"));
  const auto params = generation::parse_params(params_text, pick(a.max_new_tokens, default_tokens));

  std::vector<sft::PromptSample> samples;
  for (const auto& j : pipeline::read_jsonl(a.sft_path)) {
    auto s = j.get<sft::PromptSample>();
    if (s.task == task) samples.push_back(std::move(s));
  }
  if (samples.empty()) throw Error(ErrorCode::kEmptyInput, "no " + a.task + " prompts in " + a.sft_path.string());

  std::vector<generation::PromptRequest> requests;
  std::unordered_map<std::string, std::string> answers;
  std::set<std::string> pool;
  for (const auto& s : samples) {
    requests.push_back({pipeline::query_id(s), s.prompt});
    answers.emplace(s.prompt, s.response);
    pool.insert(s.response);
  }
  auto backend = pipeline::make_backend(bc, std::move(answers), {pool.begin(), pool.end()});
  const auto records = generation::run_batch(requests, params, *backend, bc.max_in_flight,
                                             pipeline::config_hash(pipeline::config_to_json(ctx.config)));
  std::vector<json> rows;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].result) ++failures;
    rows.push_back(pipeline::generation_record(samples[i], records[i]));
  }
  if (failures == records.size()) {
    throw Error(ErrorCode::kAllFailed, "every prompt failed; first error: " + records.front().error);
  }
  pipeline::write_jsonl_atomic(out, rows);
  log::info("generate: " + std::to_string(records.size()) + " prompts, " +
            std::to_string(failures) + " errors");
  write_manifest(manifest_path_for(out), "generate", ctx,
                 {{"sft", a.sft_path.string()}, {"task", a.task}, {"backend", bc.kind},
                  {"params", generation::request_json("", params)["decoding"]}},
                 {{"prompts", records.size()}, {"errors", failures}},
                 {{"backend", backend->id()}});
  return 0;
}

struct MatchArgs {
  std::optional<fs::path> catalog, index_path, save_index, gens, templates, out;
  std::optional<std::string> query, template_id;
  std::size_t top = 10;
};

int run_match(const Context& ctx, const MatchArgs& a) {
  const matcher::TrigramEmbedder embedder;
  matcher::MatchText render = [](const Item& item) { return item.title; };
  if (a.template_id) {
    const auto registry =
        TemplateRegistry::load(require_path(a.templates, ctx.config.templates, "--templates"));
    render = pipeline::match_text_for(registry.at(*a.template_id));
  }
  std::optional<matcher::ItemIndex> index;
  if (a.index_path) {
    index = matcher::load_index(*a.index_path);
  } else if (a.catalog) {
    index = matcher::build_index(read_items_file(*a.catalog), embedder, render);
  } else {
    throw Error(ErrorCode::kInvalidConfig, "match needs --catalog or --index");
  }
  if (a.save_index) matcher::save_index(*index, *a.save_index);

  if (a.gens) {
    const auto preds = pipeline::ground_generations(pipeline::read_jsonl(*a.gens), *index, embedder);
    const fs::path out = require_path(a.out, ctx.config.output_dir / "predictions.jsonl", "--out");
    pipeline::write_jsonl_atomic(out, preds);
    write_manifest(manifest_path_for(out), "match", ctx, {{"gens", a.gens->string()}},
                   {{"catalog", index->size()}, {"predictions", preds.size()}},
                   {{"embedder", embedder.id()}});
    return 0;
  }
  if (!a.query) {
    if (!a.save_index) throw Error(ErrorCode::kInvalidConfig, "match needs --query or --gens");
    return 0;
  }
  json rows = json::array();
  for (const auto& m : matcher::match_top(*index, embedder, *a.query, a.top)) {
    rows.push_back({{"item_id", m.item_id}, {"similarity", m.similarity}});
  }
  std::cout << rows.dump(2) << "\n";
  if (a.out) {
    pipeline::write_file_atomic(*a.out, rows.dump(2) + "\n");
    write_manifest(manifest_path_for(*a.out), "match", ctx, {{"query", *a.query}, {"top", a.top}},
                   {{"catalog", index->size()}, {"matches", rows.size()}},
                   {{"embedder", embedder.id()}});
  }
  return 0;
}

struct EvaluateArgs {
  std::string task = "seqrec";
  fs::path predictions;
  std::optional<std::string> cutoffs;
  std::optional<double> scale;
  bool impute_midpoint = false;
  std::optional<fs::path> out;
};

int run_evaluate(const Context& ctx, const EvaluateArgs& a) {
  const auto rows = pipeline::read_jsonl(a.predictions);
  metrics::MetricReport report;
  if (sft::task_from_string(a.task) == sft::Task::kSeqrec) {
    std::vector<metrics::RankedPrediction> preds;
    for (const auto& j : rows) preds.push_back(j.get<metrics::RankedPrediction>());
    const auto cutoffs = a.cutoffs ? parse_cutoffs(*a.cutoffs) : ctx.config.cutoffs;
    report = metrics::evaluate_seqrec_run(preds, cutoffs);
  } else {
    double scale = 5.0;
    const auto gens = pipeline::rating_generations(rows, &scale);
    report = metrics::evaluate_rating_run(gens, pick(a.scale, scale), {a.impute_midpoint});
  }
  std::cout << metrics::format_report(report);
  const json j = metrics::to_json(report);
  std::cout << j.dump() << "\n";
  if (a.out) {
    pipeline::write_file_atomic(*a.out, j.dump(2) + "\n");
    write_manifest(manifest_path_for(*a.out), "evaluate", ctx,
                   {{"task", a.task}, {"predictions", a.predictions.string()}},
                   {{"evaluated", report.n_evaluated}, {"parse_failures", report.n_parse_failures}});
  }
  return 0;
}

struct E2EArgs {
  std::optional<std::string> backend;
  std::optional<fs::path> templates, out;
  std::optional<double> hit_rate;
  std::optional<std::size_t> budget;
};

int run_e2e(const Context& ctx, const E2EArgs& a) {
  auto config = ctx.config;
  if (a.backend) config.backend.kind = *a.backend;
  if (a.templates) config.templates = *a.templates;
  if (a.out) config.output_dir = *a.out;
  if (a.hit_rate) config.backend.mock_hit_rate = *a.hit_rate;
  if (a.budget) config.budget = *a.budget;
  const auto result = pipeline::run_e2e(config);
  for (const auto& [id, r] : result.seqrec) std::cout << id << " seqrec\n" << metrics::format_report(r);
  for (const auto& [id, r] : result.rating) std::cout << id << " rating\n" << metrics::format_report(r);
  return 0;
}

int report_error(const std::string& code, const std::string& message, std::int64_t detail) {
  const json j = {{"error", {{"code", code}, {"message", message}, {"detail", detail}}}};
  std::cerr << j.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RecGPT data and evaluation pipeline"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Pipeline config (JSON)");
  app.add_option("--workers", g.workers, "Worker threads (default: available cores)");
  app.add_option("--seed", g.seed, "Seed");
  app.add_option("--log-level", g.log_level, "debug, info, warn, error or off");

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Read, validate and clean raw datasets");
  ingest->add_option("--descriptor", ingest_args.descriptor);
  ingest->add_option("--input", ingest_args.inputs);
  ingest->add_option("--templates", ingest_args.templates);
  ingest->add_option("--older", ingest_args.older, "Data dir of an older version to de-duplicate against");
  ingest->add_option("--out", ingest_args.out);

  StatsArgs stats_args;
  auto* stats = app.add_subcommand("stats", "Per-dataset user/item/interaction counts");
  stats->add_option("--data", stats_args.data);
  stats->add_option("--out", stats_args.out);
  stats->add_flag("--json", stats_args.as_json);

  CorpusArgs corpus_args;
  auto* build_corpus = app.add_subcommand("build-corpus", "Render pre-training documents");
  build_corpus->add_option("--data", corpus_args.data);
  build_corpus->add_option("--templates", corpus_args.templates);
  build_corpus->add_option("--budget", corpus_args.budget);
  build_corpus->add_option("--split", corpus_args.split);
  build_corpus->add_option("--out", corpus_args.out);

  SftArgs sft_args;
  auto* build_sft = app.add_subcommand("build-sft", "Render instruction prompt/response pairs");
  build_sft->add_option("--data", sft_args.data);
  build_sft->add_option("--templates", sft_args.templates);
  build_sft->add_option("--tasks", sft_args.tasks, "rating,seqrec");
  build_sft->add_option("--budget", sft_args.budget);
  build_sft->add_option("--split", sft_args.split);
  build_sft->add_option("--rating-label", sft_args.rating_label, "second_to_last or last");
  build_sft->add_flag("--all-users", sft_args.all_users, "Use every user, not just the fine-tune side");
  build_sft->add_option("--out", sft_args.out);

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "Benchmark train/validation/test split");
  split->add_option("--data", split_args.data);
  split->add_option("--strategy", split_args.strategy, "random or leave-one-out");
  split->add_option("--ratios", split_args.ratios);
  split->add_option("--key", split_args.key, "user,item or user,item,time");
  split->add_option("--out", split_args.out);

  LeakArgs check_args;
  auto* check = app.add_subcommand("check-leakage", "Count held-out keys present in train");
  check->add_option("--train", check_args.train)->required();
  check->add_option("--test", check_args.test)->required();
  check->add_option("--validation", check_args.validation);
  check->add_option("--key", check_args.key);
  check->add_option("--sample", check_args.sample);
  check->add_option("--out", check_args.out);

  LeakArgs fix_args;
  auto* fix = app.add_subcommand("fix-leakage", "Drop held-out keys from train");
  fix->add_option("--train", fix_args.train)->required();
  fix->add_option("--test", fix_args.test)->required();
  fix->add_option("--validation", fix_args.validation);
  fix->add_option("--key", fix_args.key);
  fix->add_option("--out", fix_args.out)->required();

  GenerateArgs gen_args;
  auto* generate = app.add_subcommand("generate", "Drive a generation backend over SFT prompts");
  generate->add_option("--sft", gen_args.sft_path)->required();
  generate->add_option("--task", gen_args.task);
  generate->add_option("--backend", gen_args.backend, "mock or an http(s) URL");
  generate->add_option("--params", gen_args.params, "beam:<n> or sampling[:temperature=..,top_p=..,top_k=..]");
  generate->add_option("--max-new-tokens", gen_args.max_new_tokens);
  generate->add_option("--max-in-flight", gen_args.max_in_flight);
  generate->add_option("--auth-token-env", gen_args.auth_token_env);
  generate->add_option("--timeout-ms", gen_args.timeout_ms);
  generate->add_option("--retries", gen_args.retries);
  generate->add_option("--mock-hit-rate", gen_args.hit_rate);
  generate->add_option("--out", gen_args.out);

  MatchArgs match_args;
  auto* match = app.add_subcommand("match", "Ground text onto an item catalog");
  match->add_option("--catalog", match_args.catalog, "items.jsonl");
  match->add_option("--index", match_args.index_path, "Load a saved index");
  match->add_option("--save-index", match_args.save_index);
  match->add_option("--query", match_args.query);
  match->add_option("--gens", match_args.gens, "Ground every output of a generate run");
  match->add_option("--templates", match_args.templates);
  match->add_option("--template", match_args.template_id, "Render match text with this domain");
  match->add_option("--top", match_args.top);
  match->add_option("--out", match_args.out);

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Compute rating or seqrec metrics");
  evaluate->add_option("--task", eval_args.task);
  evaluate->add_option("--predictions", eval_args.predictions)->required();
  evaluate->add_option("--cutoffs", eval_args.cutoffs);
  evaluate->add_option("--scale", eval_args.scale);
  evaluate->add_flag("--impute-midpoint", eval_args.impute_midpoint);
  evaluate->add_option("--out", eval_args.out);

  E2EArgs e2e_args;
  auto* e2e = app.add_subcommand("e2e", "Whole pipeline from raw data to metrics");
  e2e->add_option("--backend", e2e_args.backend);
  e2e->add_option("--templates", e2e_args.templates);
  e2e->add_option("--out", e2e_args.out);
  e2e->add_option("--mock-hit-rate", e2e_args.hit_rate);
  e2e->add_option("--budget", e2e_args.budget);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!g.log_level.empty()) {
      static const std::map<std::string, log::Level> kLevels = {
          {"debug", log::Level::kDebug}, {"info", log::Level::kInfo}, {"warn", log::Level::kWarn},
          {"error", log::Level::kError}, {"off", log::Level::kOff}};
      auto it = kLevels.find(g.log_level);
      if (it == kLevels.end()) throw Error(ErrorCode::kInvalidConfig, "unknown log level " + g.log_level);
      log::set_level(it->second);
    }
    const Context ctx = make_context(g);
    if (*ingest) return run_ingest(ctx, ingest_args);
    if (*stats) return run_stats(ctx, stats_args);
    if (*build_corpus) return run_build_corpus(ctx, corpus_args);
    if (*build_sft) return run_build_sft(ctx, sft_args);
    if (*split) return run_split(ctx, split_args);
    if (*check) return run_check_leakage(ctx, check_args);
    if (*fix) return run_fix_leakage(ctx, fix_args);
    if (*generate) return run_generate(ctx, gen_args);
    if (*match) return run_match(ctx, match_args);
    if (*evaluate) return run_evaluate(ctx, eval_args);
    if (*e2e) return run_e2e(ctx, e2e_args);
  } catch (const Error& e) {
    return report_error(to_string(e.code()), e.what(), e.detail());
  } catch (const std::exception& e) {
    return report_error("Internal", e.what(), 0);
  }
  return 1;
}
