#include "recgpt/leakage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "recgpt/error.hpp"

namespace recgpt::leakage {

InteractionKey key_of(const Interaction& x, KeyMode mode) {
  return {x.user_id, x.item_id, mode == KeyMode::kUserItemTime ? x.timestamp : std::nullopt};
}

KeySet keys_of(std::span<const Interaction> interactions, KeyMode mode) {
  KeySet keys;
  for (const auto& x : interactions) keys.insert(key_of(x, mode));
  return keys;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const Ratios& ratios) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::any_of(ratios.begin(), ratios.end(), [](double r) { return !(r >= 0.0); }) ||
      std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kBadRatios, "ratios must be non-negative and sum to 1");
  }
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - std::floor(exact);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

SplitAssignment random_interaction_split(std::span<const Interaction> interactions,
                                         const Ratios& ratios, std::uint64_t seed, KeyMode mode) {
  const KeySet distinct = keys_of(interactions, mode);
  std::vector<InteractionKey> keys(distinct.begin(), distinct.end());
  const auto sizes = split_sizes(keys.size(), ratios);

  // mt19937_64 output is fully specified by the standard, unlike
  // std::shuffle and the distributions.
  std::mt19937_64 rng(seed);
  for (std::size_t i = keys.size(); i > 1; --i) {
    std::swap(keys[i - 1], keys[rng() % i]);
  }

  SplitAssignment split;
  split.strategy = Strategy::kRandom;
  auto it = keys.begin();
  split.train.insert(it, it + sizes[0]);
  it += sizes[0];
  split.validation.insert(it, it + sizes[1]);
  it += sizes[1];
  split.test.insert(it, keys.end());
  return split;
}

LeaveOneOut leave_one_out_split(const UserHistory& history) {
  const std::size_t n = history.size();
  if (n < 3) throw Error(ErrorCode::kHistoryTooShort, history.user_id + " has fewer than 3 entries");
  LeaveOneOut out{{history.entries.begin(), history.entries.end() - 2},
                  history.entries[n - 2],
                  history.entries[n - 1]};
  return out;
}

SplitAssignment leave_one_out_assignment(std::span<const UserHistory> histories, KeyMode mode) {
  SplitAssignment split;
  split.strategy = Strategy::kLeaveOneOut;
  for (const auto& history : histories) {
    auto loo = leave_one_out_split(history);
    for (const auto& e : loo.train) split.train.insert(key_of(e.interaction, mode));
    split.validation.insert(key_of(loo.validation.interaction, mode));
    split.test.insert(key_of(loo.test.interaction, mode));
  }
  return split;
}

KeySet find_leaks(const KeySet& train, const KeySet& test) {
  KeySet out;
  std::set_intersection(train.begin(), train.end(), test.begin(), test.end(),
                        std::inserter(out, out.end()));
  return out;
}

FilterResult filter_train(std::span<const Interaction> train, const KeySet& held_out,
                          KeyMode mode) {
  FilterResult result;
  result.train.reserve(train.size());
  for (const auto& x : train) {
    if (held_out.contains(key_of(x, mode))) {
      ++result.removed;
    } else {
      result.train.push_back(x);
    }
  }
  return result;
}

nlohmann::json key_to_json(const InteractionKey& key) {
  return {{"user_id", key.user_id},
          {"item_id", key.item_id},
          {"timestamp", key.timestamp ? nlohmann::json(*key.timestamp) : nlohmann::json(nullptr)}};
}

}  // namespace recgpt::leakage
