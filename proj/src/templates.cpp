#include "recgpt/templates.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "recgpt/error.hpp"

namespace recgpt {

namespace {

std::vector<TemplateField> fields_from_json(const nlohmann::json& j) {
  std::vector<TemplateField> out;
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2) {
      throw Error(ErrorCode::kInvalidTemplate, "field entries are [label, source] pairs");
    }
    out.push_back({pair[0].get<std::string>(), pair[1].get<std::string>()});
  }
  return out;
}

bool contains_source(std::span<const TemplateField> fields, const std::string& source) {
  return std::any_of(fields.begin(), fields.end(),
                     [&](const TemplateField& f) { return f.source == source; });
}

}  // namespace

bool is_reserved_source(const std::string& source) {
  return source == "title" || source == "review" || source == "rating";
}

std::span<const TemplateField> TemplateSpec::fields(FieldSet set) const {
  switch (set) {
    case FieldSet::kPretrain: return item_fields_pretrain;
    case FieldSet::kRating: return item_fields_rating;
    case FieldSet::kSeqrec: return item_fields_seqrec;
    case FieldSet::kSeqrecResponse: return response_fields_seqrec;
  }
  return {};
}

std::vector<std::string> TemplateSpec::declared_attributes() const {
  std::set<std::string> names;
  for (auto set : {FieldSet::kPretrain, FieldSet::kRating, FieldSet::kSeqrec,
                   FieldSet::kSeqrecResponse}) {
    for (const auto& f : fields(set)) {
      if (!is_reserved_source(f.source)) names.insert(f.source);
    }
  }
  return {names.begin(), names.end()};
}

void validate_template(const TemplateSpec& spec) {
  auto fail = [&spec](const std::string& why) {
    throw Error(ErrorCode::kInvalidTemplate, spec.domain_id + ": " + why);
  };
  if (spec.domain_id.empty()) fail("empty domain_id");
  if (spec.header.empty()) fail("empty header");
  if (spec.rating_scale != 5.0 && spec.rating_scale != 10.0) fail("rating_scale must be 5.0 or 10.0");
  for (auto set : {FieldSet::kPretrain, FieldSet::kRating, FieldSet::kSeqrec,
                   FieldSet::kSeqrecResponse}) {
    for (const auto& f : spec.fields(set)) {
      if (f.label.empty() || f.source.empty()) {
        throw Error(ErrorCode::kUnknownTemplateField, spec.domain_id + ": empty label or source");
      }
    }
  }
  if (spec.item_fields_pretrain.empty()) fail("no pre-training fields");
  if (spec.item_fields_seqrec.empty() || spec.response_fields_seqrec.empty()) fail("no seqrec fields");
  if (spec.supports_rating()) {
    if (spec.item_fields_rating.back().source != "rating") fail("rating fields must end with rating");
    if (spec.instruction_rating.empty()) fail("missing rating instruction");
  }
  for (auto set : {FieldSet::kSeqrec, FieldSet::kSeqrecResponse}) {
    if (contains_source(spec.fields(set), "rating") || contains_source(spec.fields(set), "review")) {
      fail("seqrec fields may not include rating or review");
    }
  }
  if (spec.instruction_seqrec.empty()) fail("missing seqrec instruction");
}

TemplateSpec template_from_json(const nlohmann::json& j) {
  TemplateSpec spec;
  try {
    spec.domain_id = j.at("domain_id").get<std::string>();
    spec.header = j.at("header").get<std::string>();
    spec.rating_scale = j.at("rating_scale").get<double>();
    spec.instruction_rating = j.value("instruction_rating", std::string());
    spec.instruction_seqrec = j.at("instruction_seqrec").get<std::string>();
    spec.item_fields_pretrain = fields_from_json(j.at("item_fields_pretrain"));
    spec.item_fields_rating = fields_from_json(j.value("item_fields_rating", nlohmann::json::array()));
    spec.item_fields_seqrec = fields_from_json(j.at("item_fields_seqrec"));
    spec.response_fields_seqrec = fields_from_json(j.at("response_fields_seqrec"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidTemplate, e.what());
  }
  validate_template(spec);
  return spec;
}

TemplateRegistry::TemplateRegistry(std::vector<TemplateSpec> specs) {
  for (auto& spec : specs) {
    validate_template(spec);
    const std::string id = spec.domain_id;
    if (!specs_.emplace(id, std::move(spec)).second) {
      throw Error(ErrorCode::kInvalidTemplate, "duplicate domain " + id);
    }
  }
}

TemplateRegistry TemplateRegistry::from_json(const nlohmann::json& j) {
  std::vector<TemplateSpec> specs;
  if (!j.contains("domains") || !j["domains"].is_array()) {
    throw Error(ErrorCode::kInvalidTemplate, "expected a top-level \"domains\" array");
  }
  for (const auto& block : j["domains"]) specs.push_back(template_from_json(block));
  return TemplateRegistry(std::move(specs));
}

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open template file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidTemplate, path.string() + ": " + e.what());
  }
  return from_json(j);
}

const TemplateSpec& TemplateRegistry::at(const std::string& domain_id) const {
  const TemplateSpec* spec = find(domain_id);
  if (spec == nullptr) throw Error(ErrorCode::kInvalidTemplate, "unknown domain " + domain_id);
  return *spec;
}

const TemplateSpec* TemplateRegistry::find(const std::string& domain_id) const {
  auto it = specs_.find(domain_id);
  return it == specs_.end() ? nullptr : &it->second;
}

std::vector<std::string> TemplateRegistry::domains() const {
  std::vector<std::string> out;
  for (const auto& [id, spec] : specs_) out.push_back(id);
  return out;
}

}  // namespace recgpt
