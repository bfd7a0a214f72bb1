#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "recgpt/error.hpp"

namespace recgpt::metrics {

// Root mean squared error over paired predictions/truths.
template <class DerivedP, class DerivedT>
typename DerivedP::Scalar rmse(const Eigen::ArrayBase<DerivedP>& pred,
                               const Eigen::ArrayBase<DerivedT>& truth) {
  if (pred.size() == 0) throw Error(ErrorCode::kEmptyInput, "rmse of no pairs");
  return std::sqrt((pred.derived() - truth.derived()).square().mean());
}

template <class DerivedP, class DerivedT>
typename DerivedP::Scalar mae(const Eigen::ArrayBase<DerivedP>& pred,
                              const Eigen::ArrayBase<DerivedT>& truth) {
  if (pred.size() == 0) throw Error(ErrorCode::kEmptyInput, "mae of no pairs");
  return (pred.derived() - truth.derived()).abs().mean();
}

struct RatingPair {
  double predicted = 0.0;
  double truth = 0.0;
};

double rmse(std::span<const RatingPair> pairs);
double mae(std::span<const RatingPair> pairs);

// 1-based position of `truth` in `ranked`, if present.
std::optional<std::size_t> rank_of(std::span<const std::string> ranked, std::string_view truth);

int hit_rate_at_k(std::span<const std::string> ranked, std::string_view truth, std::size_t k);

// Single relevant item: 1 / log2(rank + 1) when rank <= k, else 0.
double ndcg_at_k(std::span<const std::string> ranked, std::string_view truth, std::size_t k);

// Returns the rating x of the first "x/scale" pattern, else a leading bare
// number within [0, scale], else nullopt.
std::optional<double> parse_rating(std::string_view generation, double scale);

struct Candidate {
  std::string text;
  double score = 0.0;
  std::string matched_item_id;
};

struct RankedPrediction {
  std::string query_id;
  std::vector<Candidate> candidates;
  std::string truth_item_id;
};

void to_json(nlohmann::json& j, const RankedPrediction& p);
void from_json(const nlohmann::json& j, RankedPrediction& p);

// Candidates ordered by descending score (stable), keeping the best-scored
// candidate per matched item.
std::vector<Candidate> dedup_by_item(std::span<const Candidate> candidates);

enum class MetricTask { kRating, kSeqrec };

struct MetricReport {
  MetricTask task = MetricTask::kSeqrec;
  std::optional<double> rmse;
  std::optional<double> mae;
  std::map<std::size_t, double> hr_at;
  std::map<std::size_t, double> ndcg_at;
  std::size_t n_evaluated = 0;
  std::size_t n_parse_failures = 0;
};

nlohmann::json to_json(const MetricReport& report);
std::string format_report(const MetricReport& report);

inline const std::vector<std::size_t> kDefaultCutoffs = {5, 10};

MetricReport evaluate_seqrec_run(std::span<const RankedPrediction> predictions,
                                 std::span<const std::size_t> cutoffs = kDefaultCutoffs);

struct RatingGeneration {
  std::string query_id;
  std::string generation;
  double truth = 0.0;
};

struct RatingEvalOptions {
  // Substitute scale / 2 for unparseable generations instead of excluding
  // them. Failures are still counted.
  bool impute_midpoint = false;
};

// Throws kEmptyInput for no generations and kAllFailed when nothing parses
// (and imputation is off).
MetricReport evaluate_rating_run(std::span<const RatingGeneration> generations, double scale,
                                 const RatingEvalOptions& options = {});

}  // namespace recgpt::metrics
