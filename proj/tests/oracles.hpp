#pragma once

// Brute-force reference implementations. Deliberately written without the
// library's helpers so they can check them.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "recgpt/corpus.hpp"
#include "recgpt/leakage.hpp"
#include "recgpt/matcher.hpp"
#include "recgpt/metrics.hpp"

namespace recgpt::oracle {

// Smallest c whose near-equal split (larger chunks first) renders every chunk
// under budget; nullopt when a single entry cannot fit.
inline std::optional<std::size_t> min_chunks(const UserHistory& h, const TemplateSpec& spec,
                                             std::size_t budget, const TokenCounter& counter) {
  const std::size_t n = h.entries.size();
  if (n == 0) return 1;
  std::vector<std::string> lines;
  for (const auto& e : h.entries) lines.push_back(corpus::render_entry(e, spec, spec.fields(FieldSet::kPretrain)));
  auto fits = [&](std::size_t begin, std::size_t end) {
    std::string text = spec.header;
    for (std::size_t i = begin; i < end; ++i) text += "\n" + lines[i];
    return counter.count(text) < budget;
  };
  for (std::size_t c = 1; c <= n; ++c) {
    bool ok = true;
    std::size_t begin = 0;
    for (std::size_t k = 0; k < c && ok; ++k) {
      const std::size_t size = n / c + (k < n % c ? 1 : 0);
      ok = fits(begin, begin + size);
      begin += size;
    }
    if (ok) return c;
  }
  return std::nullopt;
}

inline double rmse(const std::vector<double>& p, const std::vector<double>& t) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  return std::sqrt(s / static_cast<double>(p.size()));
}

inline double mae(const std::vector<double>& p, const std::vector<double>& t) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - t[i]);
  return s / static_cast<double>(p.size());
}

// Per-query deduplicated item ranking, scanning candidates by descending
// score with ties kept in input order.
inline std::vector<std::string> ranked_items(const metrics::RankedPrediction& p) {
  std::vector<std::size_t> order(p.candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const auto& a = p.candidates[order[i]];
      const auto& b = p.candidates[order[j]];
      if (b.score > a.score || (b.score == a.score && order[j] < order[i])) std::swap(order[i], order[j]);
    }
  }
  std::vector<std::string> out;
  for (auto i : order) {
    const auto& id = p.candidates[i].matched_item_id;
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  }
  return out;
}

inline std::pair<double, double> hr_ndcg(const std::vector<metrics::RankedPrediction>& preds, std::size_t k) {
  if (preds.empty()) return {0.0, 0.0};
  double hr = 0, ndcg = 0;
  for (const auto& p : preds) {
    const auto ranked = ranked_items(p);
    for (std::size_t r = 0; r < ranked.size() && r < k; ++r) {
      if (ranked[r] == p.truth_item_id) {
        hr += 1;
        ndcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        break;
      }
    }
  }
  return {hr / static_cast<double>(preds.size()), ndcg / static_cast<double>(preds.size())};
}

// Full scan in double; ties by item id.
inline std::vector<matcher::Match> naive_top(const matcher::ItemIndex& index,
                                             const matcher::EmbeddingVector& q, std::size_t m) {
  std::vector<matcher::Match> all;
  for (std::size_t i = 0; i < index.size(); ++i) {
    double dot = 0;
    for (Eigen::Index d = 0; d < index.dimension(); ++d) {
      dot += static_cast<double>(index.matrix()(static_cast<Eigen::Index>(i), d)) * static_cast<double>(q(d));
    }
    all.push_back({index.item_ids()[i], dot});
  }
  std::sort(all.begin(), all.end(), [](const matcher::Match& a, const matcher::Match& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.item_id < b.item_id;
  });
  if (all.size() > m) all.resize(m);
  return all;
}

// Same ids in the same order; similarities agree to summation-order noise.
inline bool same_matches(const std::vector<matcher::Match>& a, const std::vector<matcher::Match>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].item_id != b[i].item_id || std::fabs(a[i].similarity - b[i].similarity) > 1e-12) return false;
  }
  return true;
}

// Every train key that also appears in the test side.
inline std::set<leakage::InteractionKey> cross_leaks(const std::vector<leakage::InteractionKey>& train,
                                                      const std::vector<leakage::InteractionKey>& test) {
  std::set<leakage::InteractionKey> out;
  for (const auto& a : train) {
    for (const auto& b : test) {
      if (a.user_id == b.user_id && a.item_id == b.item_id && a.timestamp == b.timestamp) out.insert(a);
    }
  }
  return out;
}

}  // namespace recgpt::oracle
