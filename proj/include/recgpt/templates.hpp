#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace recgpt {

// One rendered segment, e.g. {"Brand", "brand"} renders "Brand: <value>".
// The source is one of the reserved names title/review/rating or an item
// attribute name.
struct TemplateField {
  std::string label;
  std::string source;

  bool operator==(const TemplateField&) const = default;
};

enum class FieldSet { kPretrain, kRating, kSeqrec, kSeqrecResponse };

// Per-domain rendering recipe for pre-training documents and the two
// instruction-tuning tasks.
struct TemplateSpec {
  std::string domain_id;
  std::string header;
  std::vector<TemplateField> item_fields_pretrain;
  std::vector<TemplateField> item_fields_rating;
  std::vector<TemplateField> item_fields_seqrec;
  std::vector<TemplateField> response_fields_seqrec;
  double rating_scale = 5.0;
  std::string instruction_rating;
  std::string instruction_seqrec;

  std::span<const TemplateField> fields(FieldSet set) const;
  bool supports_rating() const { return !item_fields_rating.empty(); }
  // Attribute names any field set of this template reads.
  std::vector<std::string> declared_attributes() const;
};

// Throws kInvalidTemplate when an invariant is violated.
void validate_template(const TemplateSpec& spec);

TemplateSpec template_from_json(const nlohmann::json& j);

class TemplateRegistry {
 public:
  TemplateRegistry() = default;
  explicit TemplateRegistry(std::vector<TemplateSpec> specs);

  static TemplateRegistry from_json(const nlohmann::json& j);
  // Throws kIo naming the path when the file is missing or unreadable.
  static TemplateRegistry load(const std::filesystem::path& path);

  const TemplateSpec& at(const std::string& domain_id) const;
  const TemplateSpec* find(const std::string& domain_id) const;
  std::vector<std::string> domains() const;

 private:
  std::map<std::string, TemplateSpec> specs_;
};

bool is_reserved_source(const std::string& source);

}  // namespace recgpt
