#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "recgpt/data_model.hpp"
#include "recgpt/error.hpp"
#include "recgpt/templates.hpp"

namespace recgpt::test {

namespace fs = std::filesystem;

inline fs::path source_dir() { return RECGPT_SOURCE_DIR; }
inline fs::path templates_path() { return source_dir() / "templates" / "recgpt_templates.json"; }
inline fs::path golden_dir() { return source_dir() / "tests" / "golden"; }
inline fs::path fixtures_dir() { return source_dir() / "tests" / "fixtures"; }

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline const TemplateRegistry& templates() {
  static const TemplateRegistry registry = TemplateRegistry::load(templates_path());
  return registry;
}

// History from tests/fixtures/template_fixtures.json; item ids are "<domain>-<i>".
inline UserHistory fixture_history(const std::string& domain, const std::string& key = "history") {
  static const nlohmann::json fixtures =
      nlohmann::json::parse(read_text(fixtures_dir() / "template_fixtures.json"));
  UserHistory h{"u-" + domain, domain, {}};
  const auto& rows = fixtures.at(domain).at(key);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    HistoryEntry e;
    e.item.item_id = domain + "-" + std::to_string(i);
    e.item.title = r.at("title").get<std::string>();
    e.item.attributes = r.value("attributes", std::map<std::string, std::string>{});
    e.interaction.user_id = h.user_id;
    e.interaction.item_id = e.item.item_id;
    e.interaction.dataset_id = domain;
    if (r.contains("rating")) e.interaction.rating = r["rating"].get<double>();
    if (r.contains("review")) e.interaction.review = r["review"].get<std::string>();
    e.interaction.timestamp = static_cast<std::int64_t>(i);
    h.entries.push_back(std::move(e));
  }
  return h;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("recgpt-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::logic_error("expected a recgpt::Error");
}

// Generators ----------------------------------------------------------------

inline std::string random_word(std::mt19937_64& rng, std::size_t min_len = 3, std::size_t max_len = 9) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<int> ch('a', 'z');
  std::string w(len(rng), 'a');
  for (auto& c : w) c = static_cast<char>(ch(rng));
  return w;
}

inline HistoryEntry make_entry(const std::string& user, const std::string& item_id,
                               const std::string& title, std::int64_t ts,
                               std::optional<double> rating = std::nullopt) {
  HistoryEntry e;
  e.item.item_id = item_id;
  e.item.title = title;
  e.interaction.user_id = user;
  e.interaction.item_id = item_id;
  e.interaction.rating = rating;
  e.interaction.timestamp = ts;
  return e;
}

// Users with random history lengths over a shared catalog; timestamps are
// unique per user.
inline Dataset random_dataset(std::mt19937_64& rng, std::size_t users, std::size_t items,
                              std::size_t max_len, const std::string& id = "synthetic") {
  Dataset d;
  d.dataset_id = id;
  for (std::size_t i = 0; i < items; ++i) {
    d.items.push_back({"i" + std::to_string(i), "Item " + std::to_string(i) + " " + random_word(rng), {}});
  }
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, items - 1);
  std::uniform_int_distribution<int> stars(1, 5);
  for (std::size_t u = 0; u < users; ++u) {
    const std::string user = "u" + std::to_string(u);
    const std::size_t n = len(rng);
    for (std::size_t k = 0; k < n; ++k) {
      Interaction x;
      x.user_id = user;
      x.item_id = d.items[pick(rng)].item_id;
      x.rating = stars(rng);
      x.timestamp = static_cast<std::int64_t>(1000 * u + k);
      x.dataset_id = id;
      d.interactions.push_back(std::move(x));
    }
  }
  return d;
}

}  // namespace recgpt::test
