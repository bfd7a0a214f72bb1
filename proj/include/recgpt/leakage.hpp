#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "recgpt/data_model.hpp"

namespace recgpt::leakage {

// Identity of an interaction for leakage purposes. With KeyMode::kUserItem
// the timestamp is dropped (timestamp-free sources).
struct InteractionKey {
  std::string user_id;
  std::string item_id;
  std::optional<std::int64_t> timestamp;

  auto operator<=>(const InteractionKey&) const = default;
  bool operator==(const InteractionKey&) const = default;
};

enum class KeyMode { kUserItemTime, kUserItem };

InteractionKey key_of(const Interaction& x, KeyMode mode = KeyMode::kUserItemTime);

using KeySet = std::set<InteractionKey>;

KeySet keys_of(std::span<const Interaction> interactions, KeyMode mode = KeyMode::kUserItemTime);

enum class Strategy { kRandom, kLeaveOneOut };

struct SplitAssignment {
  KeySet train;
  KeySet validation;
  KeySet test;
  Strategy strategy = Strategy::kRandom;
};

using Ratios = std::array<double, 3>;
inline constexpr Ratios kDefaultRatios = {0.8, 0.1, 0.1};

// Largest-remainder allocation of `n` items over `ratios` (ties favour the
// earlier bucket).
std::array<std::size_t, 3> split_sizes(std::size_t n, const Ratios& ratios);

// Canonically sorts the distinct keys, shuffles them with a seeded
// Fisher-Yates pass and slices prefixes of the largest-remainder sizes.
SplitAssignment random_interaction_split(std::span<const Interaction> interactions,
                                         const Ratios& ratios, std::uint64_t seed,
                                         KeyMode mode = KeyMode::kUserItemTime);

struct LeaveOneOut {
  std::vector<HistoryEntry> train;
  HistoryEntry validation;
  HistoryEntry test;
};

// Last entry to test, second-last to validation, the rest to train.
LeaveOneOut leave_one_out_split(const UserHistory& history);

SplitAssignment leave_one_out_assignment(std::span<const UserHistory> histories,
                                         KeyMode mode = KeyMode::kUserItemTime);

KeySet find_leaks(const KeySet& train, const KeySet& test);

struct FilterResult {
  std::vector<Interaction> train;
  std::size_t removed = 0;
};

// Drops every training interaction whose key is in `held_out`.
FilterResult filter_train(std::span<const Interaction> train, const KeySet& held_out,
                          KeyMode mode = KeyMode::kUserItemTime);

nlohmann::json key_to_json(const InteractionKey& key);

}  // namespace recgpt::leakage
