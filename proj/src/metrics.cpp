#include "recgpt/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <regex>
#include <sstream>
#include <unordered_set>

namespace recgpt::metrics {

namespace {

using Array = Eigen::ArrayXd;

std::pair<Array, Array> to_arrays(std::span<const RatingPair> pairs) {
  Array pred(static_cast<Eigen::Index>(pairs.size()));
  Array truth(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    pred[static_cast<Eigen::Index>(i)] = pairs[i].predicted;
    truth[static_cast<Eigen::Index>(i)] = pairs[i].truth;
  }
  return {std::move(pred), std::move(truth)};
}

double to_double(const std::string& text) {
  double value = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), value);
  return value;
}

}  // namespace

double rmse(std::span<const RatingPair> pairs) {
  auto [pred, truth] = to_arrays(pairs);
  return rmse(pred, truth);
}

double mae(std::span<const RatingPair> pairs) {
  auto [pred, truth] = to_arrays(pairs);
  return mae(pred, truth);
}

std::optional<std::size_t> rank_of(std::span<const std::string> ranked, std::string_view truth) {
  auto it = std::find(ranked.begin(), ranked.end(), truth);
  if (it == ranked.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ranked.begin()) + 1;
}

int hit_rate_at_k(std::span<const std::string> ranked, std::string_view truth, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidParams, "k must be at least 1");
  auto rank = rank_of(ranked, truth);
  return rank && *rank <= k ? 1 : 0;
}

double ndcg_at_k(std::span<const std::string> ranked, std::string_view truth, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidParams, "k must be at least 1");
  auto rank = rank_of(ranked, truth);
  if (!rank || *rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(*rank) + 1.0);
}

std::optional<double> parse_rating(std::string_view generation, double scale) {
  static const std::regex kFraction(R"((\d+(?:\.\d+)?)\s*/\s*(\d+(?:\.\d+)?))");
  static const std::regex kLeading(R"(^\s*(\d+(?:\.\d+)?))");
  const std::string text(generation);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kFraction);
       it != std::sregex_iterator(); ++it) {
    if (to_double((*it)[2].str()) == scale) return to_double((*it)[1].str());
  }
  std::smatch m;
  if (std::regex_search(text, m, kLeading)) {
    const double value = to_double(m[1].str());
    if (value >= 0.0 && value <= scale) return value;
  }
  return std::nullopt;
}

void to_json(nlohmann::json& j, const RankedPrediction& p) {
  nlohmann::json candidates = nlohmann::json::array();
  for (const auto& c : p.candidates) {
    candidates.push_back({{"text", c.text}, {"score", c.score}, {"item_id", c.matched_item_id}});
  }
  j = {{"query_id", p.query_id}, {"candidates", candidates}, {"truth_item_id", p.truth_item_id}};
}

void from_json(const nlohmann::json& j, RankedPrediction& p) {
  p.query_id = j.at("query_id").get<std::string>();
  p.truth_item_id = j.at("truth_item_id").get<std::string>();
  p.candidates.clear();
  for (const auto& c : j.at("candidates")) {
    p.candidates.push_back({c.value("text", std::string()), c.at("score").get<double>(),
                            c.at("item_id").get<std::string>()});
  }
}

std::vector<Candidate> dedup_by_item(std::span<const Candidate> candidates) {
  std::vector<Candidate> sorted(candidates.begin(), candidates.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  std::vector<Candidate> out;
  std::unordered_set<std::string> seen;
  for (auto& c : sorted) {
    if (seen.insert(c.matched_item_id).second) out.push_back(std::move(c));
  }
  return out;
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["task"] = r.task == MetricTask::kRating ? "rating" : "seqrec";
  j["rmse"] = r.rmse ? nlohmann::json(*r.rmse) : nlohmann::json(nullptr);
  j["mae"] = r.mae ? nlohmann::json(*r.mae) : nlohmann::json(nullptr);
  j["hr_at"] = nlohmann::json::object();
  j["ndcg_at"] = nlohmann::json::object();
  for (const auto& [k, v] : r.hr_at) j["hr_at"][std::to_string(k)] = v;
  for (const auto& [k, v] : r.ndcg_at) j["ndcg_at"][std::to_string(k)] = v;
  j["n_evaluated"] = r.n_evaluated;
  j["n_parse_failures"] = r.n_parse_failures;
  return j;
}

std::string format_report(const MetricReport& r) {
  std::ostringstream out;
  char buf[64];
  auto fixed = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  out << "task: " << (r.task == MetricTask::kRating ? "rating" : "seqrec") << '\n';
  if (r.rmse) out << "RMSE: " << fixed(*r.rmse) << '\n';
  if (r.mae) out << "MAE: " << fixed(*r.mae) << '\n';
  for (const auto& [k, v] : r.hr_at) {
    out << "HR@" << k << ": " << fixed(v) << "  NDCG@" << k << ": " << fixed(r.ndcg_at.at(k))
        << '\n';
  }
  out << "evaluated: " << r.n_evaluated << "  parse failures: " << r.n_parse_failures << '\n';
  return out.str();
}

MetricReport evaluate_seqrec_run(std::span<const RankedPrediction> predictions,
                                 std::span<const std::size_t> cutoffs) {
  MetricReport report;
  report.task = MetricTask::kSeqrec;
  report.n_evaluated = predictions.size();
  const auto n = static_cast<Eigen::Index>(predictions.size());
  const auto n_cutoffs = static_cast<Eigen::Index>(cutoffs.size());
  Eigen::ArrayXXd hits = Eigen::ArrayXXd::Zero(n, n_cutoffs);
  Eigen::ArrayXXd gains = Eigen::ArrayXXd::Zero(n, n_cutoffs);

  for (Eigen::Index q = 0; q < n; ++q) {
    const auto& prediction = predictions[static_cast<std::size_t>(q)];
    std::vector<std::string> ranked;
    for (const auto& c : dedup_by_item(prediction.candidates)) ranked.push_back(c.matched_item_id);
    for (Eigen::Index c = 0; c < n_cutoffs; ++c) {
      const std::size_t k = cutoffs[static_cast<std::size_t>(c)];
      hits(q, c) = hit_rate_at_k(ranked, prediction.truth_item_id, k);
      gains(q, c) = ndcg_at_k(ranked, prediction.truth_item_id, k);
    }
  }
  for (Eigen::Index c = 0; c < n_cutoffs; ++c) {
    const std::size_t k = cutoffs[static_cast<std::size_t>(c)];
    report.hr_at[k] = n == 0 ? 0.0 : hits.col(c).mean();
    report.ndcg_at[k] = n == 0 ? 0.0 : gains.col(c).mean();
  }
  return report;
}

MetricReport evaluate_rating_run(std::span<const RatingGeneration> generations, double scale,
                                 const RatingEvalOptions& options) {
  if (generations.empty()) throw Error(ErrorCode::kEmptyInput, "no rating generations");
  MetricReport report;
  report.task = MetricTask::kRating;
  std::vector<RatingPair> pairs;
  for (const auto& g : generations) {
    auto parsed = parse_rating(g.generation, scale);
    if (!parsed) {
      ++report.n_parse_failures;
      if (!options.impute_midpoint) continue;
      parsed = scale / 2.0;
    }
    pairs.push_back({*parsed, g.truth});
  }
  if (pairs.empty()) throw Error(ErrorCode::kAllFailed, "no generation could be parsed");
  report.n_evaluated = pairs.size();
  report.rmse = rmse(pairs);
  report.mae = mae(pairs);
  return report;
}

}  // namespace recgpt::metrics
