#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "frote/error.hpp"

namespace frote {

using LabelId = std::size_t;

enum class AttributeKind { numeric, categorical };

struct Attribute {
  std::string name;
  AttributeKind kind = AttributeKind::numeric;
  std::vector<std::string> categories;  // declaration order; empty for numeric attributes

  bool is_numeric() const noexcept { return kind == AttributeKind::numeric; }
  bool is_categorical() const noexcept { return kind == AttributeKind::categorical; }

  std::optional<std::size_t> category_index(std::string_view token) const {
    auto it = std::find(categories.begin(), categories.end(), token);
    if (it == categories.end()) return std::nullopt;
    return static_cast<std::size_t>(it - categories.begin());
  }
};

/// Ordered attribute list plus the class label vocabulary.
class Schema {
 public:
  Schema(std::vector<Attribute> attributes, std::string label_name, std::vector<std::string> labels)
      : attributes_(std::move(attributes)), label_name_(std::move(label_name)), labels_(std::move(labels)) {
    std::unordered_set<std::string> seen;
    for (const auto& a : attributes_) {
      if (a.name.empty()) throw ValidationError("schema: attribute with empty name");
      if (!seen.insert(a.name).second) throw ValidationError("schema: duplicate attribute '" + a.name + "'");
      if (a.is_categorical()) {
        if (a.categories.empty())
          throw ValidationError("schema: categorical attribute '" + a.name + "' declares no categories");
        std::unordered_set<std::string> cats(a.categories.begin(), a.categories.end());
        if (cats.size() != a.categories.size())
          throw ValidationError("schema: duplicate category in attribute '" + a.name + "'");
      } else if (!a.categories.empty()) {
        throw ValidationError("schema: numeric attribute '" + a.name + "' must not list categories");
      }
    }
    if (label_name_.empty()) throw ValidationError("schema: label column needs a name");
    if (seen.count(label_name_)) throw ValidationError("schema: label name clashes with an attribute");
    if (labels_.size() < 2) throw ValidationError("schema: at least two class labels are required");
    std::unordered_set<std::string> ls(labels_.begin(), labels_.end());
    if (ls.size() != labels_.size()) throw ValidationError("schema: duplicate class label");
  }

  const std::vector<Attribute>& attributes() const noexcept { return attributes_; }
  const Attribute& attribute(std::size_t i) const { return attributes_.at(i); }
  std::size_t size() const noexcept { return attributes_.size(); }
  const std::string& label_name() const noexcept { return label_name_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t num_labels() const noexcept { return labels_.size(); }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i)
      if (attributes_[i].name == name) return i;
    return std::nullopt;
  }

  std::optional<LabelId> label_index(std::string_view name) const {
    auto it = std::find(labels_.begin(), labels_.end(), name);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<LabelId>(it - labels_.begin());
  }

  /// Stable 64-bit digest of the schema; models refuse inputs with a different one.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&h](std::string_view s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
      }
      h ^= 0xFF;
      h *= 0x100000001B3ULL;
    };
    for (const auto& a : attributes_) {
      mix(a.name);
      mix(a.is_numeric() ? "n" : "c");
      for (const auto& c : a.categories) mix(c);
    }
    mix(label_name_);
    for (const auto& l : labels_) mix(l);
    return h;
  }

  nlohmann::json to_json() const {
    nlohmann::json attrs = nlohmann::json::array();
    for (const auto& a : attributes_) {
      nlohmann::json j{{"name", a.name}, {"kind", a.is_numeric() ? "numeric" : "categorical"}};
      if (a.is_categorical()) j["categories"] = a.categories;
      attrs.push_back(std::move(j));
    }
    return {{"attributes", attrs}, {"label", {{"name", label_name_}, {"classes", labels_}}}};
  }

  static Schema from_json(const nlohmann::json& j) {
    try {
      std::vector<Attribute> attrs;
      for (const auto& ja : j.at("attributes")) {
        Attribute a;
        a.name = ja.at("name").get<std::string>();
        const auto kind = ja.at("kind").get<std::string>();
        if (kind == "numeric") {
          a.kind = AttributeKind::numeric;
        } else if (kind == "categorical") {
          a.kind = AttributeKind::categorical;
        } else {
          throw ValidationError("schema: attribute '" + a.name + "' has unknown kind '" + kind + "'");
        }
        if (ja.contains("categories")) a.categories = ja.at("categories").get<std::vector<std::string>>();
        attrs.push_back(std::move(a));
      }
      const auto& jl = j.at("label");
      return Schema(std::move(attrs), jl.at("name").get<std::string>(),
                    jl.at("classes").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("schema: ") + e.what());
    }
  }

  friend bool operator==(const Schema& a, const Schema& b) {
    if (a.label_name_ != b.label_name_ || a.labels_ != b.labels_ || a.attributes_.size() != b.attributes_.size())
      return false;
    for (std::size_t i = 0; i < a.attributes_.size(); ++i) {
      const auto& x = a.attributes_[i];
      const auto& y = b.attributes_[i];
      if (x.name != y.name || x.kind != y.kind || x.categories != y.categories) return false;
    }
    return true;
  }

 private:
  std::vector<Attribute> attributes_;
  std::string label_name_;
  std::vector<std::string> labels_;
};

using SchemaPtr = std::shared_ptr<const Schema>;

inline SchemaPtr load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("schema '" + path + "': " + e.what());
  }
  return std::make_shared<const Schema>(Schema::from_json(j));
}

/// One row. Numeric attributes hold their value; categorical attributes hold the
/// category's index in the schema declaration.
struct Instance {
  std::vector<double> values;
  LabelId label = 0;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct Provenance {
  enum class Kind { original, synthetic };
  Kind kind = Kind::original;
  std::string rule_id;
  std::size_t base_row = 0;
  std::size_t neighbor_row = 0;

  bool is_synthetic() const noexcept { return kind == Kind::synthetic; }

  static Provenance original() { return {}; }
  static Provenance synthetic(std::string rule_id, std::size_t base, std::size_t neighbor) {
    return {Kind::synthetic, std::move(rule_id), base, neighbor};
  }

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

enum class ModificationStrategy { none, relabel, drop };

inline std::string_view to_string(ModificationStrategy s) {
  switch (s) {
    case ModificationStrategy::none: return "none";
    case ModificationStrategy::relabel: return "relabel";
    case ModificationStrategy::drop: return "drop";
  }
  return "none";
}

inline ModificationStrategy parse_strategy(std::string_view s) {
  if (s == "none") return ModificationStrategy::none;
  if (s == "relabel") return ModificationStrategy::relabel;
  if (s == "drop") return ModificationStrategy::drop;
  throw ValidationError("unknown modification strategy '" + std::string(s) + "'");
}

class Dataset {
 public:
  explicit Dataset(SchemaPtr schema) : schema_(std::move(schema)) {
    if (!schema_) throw Error("dataset requires a schema");
  }

  const Schema& schema() const noexcept { return *schema_; }
  const SchemaPtr& schema_ptr() const noexcept { return schema_; }

  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  const Instance& operator[](std::size_t i) const { return rows_[i]; }
  const Instance& row(std::size_t i) const { return rows_.at(i); }
  const std::vector<Instance>& rows() const noexcept { return rows_; }
  const Provenance& provenance(std::size_t i) const { return provenance_.at(i); }

  void reserve(std::size_t n) {
    rows_.reserve(n);
    provenance_.reserve(n);
  }

  /// Appends a row after checking it against the schema.
  void add(Instance row, Provenance prov = Provenance::original()) {
    if (auto err = check(row)) throw ValidationError(*err);
    rows_.push_back(std::move(row));
    provenance_.push_back(std::move(prov));
  }

  void append(const Dataset& other) {
    if (!(other.schema() == schema())) throw Error("cannot append datasets with different schemas");
    rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
    provenance_.insert(provenance_.end(), other.provenance_.begin(), other.provenance_.end());
  }

  void set_label(std::size_t i, LabelId label) {
    if (label >= schema_->num_labels()) throw Error("label index out of range");
    rows_.at(i).label = label;
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out(schema_);
    out.reserve(indices.size());
    for (auto i : indices) {
      out.rows_.push_back(rows_.at(i));
      out.provenance_.push_back(provenance_.at(i));
    }
    return out;
  }

  std::size_t count_synthetic() const {
    return static_cast<std::size_t>(
        std::count_if(provenance_.begin(), provenance_.end(), [](const Provenance& p) { return p.is_synthetic(); }));
  }

  std::vector<std::size_t> label_counts() const {
    std::vector<std::size_t> counts(schema_->num_labels(), 0);
    for (const auto& r : rows_) ++counts[r.label];
    return counts;
  }

  /// Returns a description of the first violation, or nullopt if the row conforms.
  std::optional<std::string> check(const Instance& row) const {
    const auto& s = *schema_;
    if (row.values.size() != s.size())
      return "row has " + std::to_string(row.values.size()) + " values, schema has " + std::to_string(s.size());
    for (std::size_t a = 0; a < s.size(); ++a) {
      const double v = row.values[a];
      const auto& attr = s.attribute(a);
      if (!std::isfinite(v)) return "attribute '" + attr.name + "' is not finite";
      if (attr.is_categorical()) {
        if (v < 0 || v != std::floor(v) || static_cast<std::size_t>(v) >= attr.categories.size())
          return "attribute '" + attr.name + "' holds an invalid category index";
      }
    }
    if (row.label >= s.num_labels()) return "label index out of range";
    return std::nullopt;
  }

 private:
  SchemaPtr schema_;
  std::vector<Instance> rows_;
  std::vector<Provenance> provenance_;
};

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

inline std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

namespace csv {

/// RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF line endings,
/// newlines inside quoted fields. Returns records; a trailing newline adds no record.
inline std::vector<std::vector<std::string>> read(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool after_quote = false;
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
    after_quote = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == ',') {
      end_field();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      end_record();
      ++line;
    } else if (c == '\n') {
      end_record();
      ++line;
    } else if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else {
      if (after_quote) throw ValidationError("csv line " + std::to_string(line) + ": text after closing quote");
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw ValidationError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

inline std::string quote(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos && !s.empty() && s.front() != ' ' && s.back() != ' ')
    return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace csv

/// Column that carries row provenance through save/load.
inline constexpr std::string_view kProvenanceColumn = "_provenance";

inline std::string format_provenance(const Provenance& p) {
  if (!p.is_synthetic()) return "original";
  return "synthetic:" + p.rule_id + ":" + std::to_string(p.base_row) + ":" + std::to_string(p.neighbor_row);
}

inline std::optional<Provenance> parse_provenance(std::string_view s) {
  if (s == "original" || s.empty()) return Provenance::original();
  constexpr std::string_view prefix = "synthetic:";
  if (s.substr(0, prefix.size()) != prefix) return std::nullopt;
  s.remove_prefix(prefix.size());
  const auto last = s.rfind(':');
  if (last == std::string_view::npos || last == 0) return std::nullopt;
  const auto mid = s.rfind(':', last - 1);
  if (mid == std::string_view::npos) return std::nullopt;
  std::size_t base = 0, nbr = 0;
  auto b = s.substr(mid + 1, last - mid - 1);
  auto n = s.substr(last + 1);
  if (std::from_chars(b.data(), b.data() + b.size(), base).ptr != b.data() + b.size() || b.empty()) return std::nullopt;
  if (std::from_chars(n.data(), n.data() + n.size(), nbr).ptr != n.data() + n.size() || n.empty()) return std::nullopt;
  return Provenance::synthetic(std::string(s.substr(0, mid)), base, nbr);
}

/// Parses CSV text against a schema. Columns are matched by header name; an optional
/// provenance column is honoured. Errors name the 1-based data row.
inline Dataset read_dataset(std::istream& in, SchemaPtr schema) {
  auto records = csv::read(in);
  Dataset d(schema);
  if (records.empty()) throw ValidationError("csv: header row required");
  const auto& header = records.front();
  const auto& s = *schema;

  std::vector<std::optional<std::size_t>> column_of(s.size());
  std::optional<std::size_t> label_col, prov_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& name = header[c];
    if (auto a = s.find(name)) {
      if (column_of[*a]) throw ValidationError("csv: duplicate column '" + name + "'");
      column_of[*a] = c;
    } else if (name == s.label_name()) {
      if (label_col) throw ValidationError("csv: duplicate column '" + name + "'");
      label_col = c;
    } else if (name == kProvenanceColumn) {
      prov_col = c;
    } else {
      throw ValidationError("csv: unexpected column '" + name + "'");
    }
  }
  for (std::size_t a = 0; a < s.size(); ++a)
    if (!column_of[a]) throw ValidationError("csv: missing column '" + s.attribute(a).name + "'");
  if (!label_col) throw ValidationError("csv: missing label column '" + s.label_name() + "'");

  d.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "row " + std::to_string(r);
    if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
    if (rec.size() != header.size())
      throw ValidationError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(rec.size()));
    Instance inst;
    inst.values.resize(s.size());
    for (std::size_t a = 0; a < s.size(); ++a) {
      const auto& attr = s.attribute(a);
      const auto& text = rec[*column_of[a]];
      if (attr.is_numeric()) {
        auto v = parse_number(text);
        if (!v) throw ValidationError(where + ": attribute '" + attr.name + "': '" + text + "' is not a number");
        inst.values[a] = *v;
      } else {
        auto idx = attr.category_index(text);
        if (!idx)
          throw ValidationError(where + ": attribute '" + attr.name + "': unknown category '" + text + "'");
        inst.values[a] = static_cast<double>(*idx);
      }
    }
    const auto& ltext = rec[*label_col];
    auto label = s.label_index(ltext);
    if (!label) throw ValidationError(where + ": unknown class label '" + ltext + "'");
    inst.label = *label;
    Provenance prov;
    if (prov_col) {
      auto p = parse_provenance(rec[*prov_col]);
      if (!p) throw ValidationError(where + ": malformed provenance '" + rec[*prov_col] + "'");
      prov = std::move(*p);
    }
    d.add(std::move(inst), std::move(prov));
  }
  return d;
}

inline Dataset load_dataset(const std::string& csv_path, SchemaPtr schema) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw ValidationError("cannot open data file '" + csv_path + "'");
  try {
    return read_dataset(in, std::move(schema));
  } catch (const ValidationError& e) {
    throw ValidationError(csv_path + ": " + e.what());
  }
}

inline Dataset load_dataset(const std::string& csv_path, const std::string& schema_path) {
  return load_dataset(csv_path, load_schema(schema_path));
}

inline std::string format_value(const Schema& s, std::size_t attribute, double v) {
  const auto& attr = s.attribute(attribute);
  if (attr.is_numeric()) return format_number(v);
  return attr.categories.at(static_cast<std::size_t>(v));
}

/// Writes a dataset as CSV. The provenance column is emitted only when some row is synthetic.
inline void write_dataset(std::ostream& out, const Dataset& d) {
  const auto& s = d.schema();
  const bool with_prov = d.count_synthetic() > 0;
  for (std::size_t a = 0; a < s.size(); ++a) out << csv::quote(s.attribute(a).name) << ',';
  out << csv::quote(s.label_name());
  if (with_prov) out << ',' << kProvenanceColumn;
  out << '\n';
  for (std::size_t r = 0; r < d.size(); ++r) {
    const auto& row = d[r];
    for (std::size_t a = 0; a < s.size(); ++a) out << csv::quote(format_value(s, a, row.values[a])) << ',';
    out << csv::quote(s.labels()[row.label]);
    if (with_prov) out << ',' << csv::quote(format_provenance(d.provenance(r)));
    out << '\n';
  }
}

inline void save_dataset(const std::string& path, const Dataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  write_dataset(out, d);
}

}  // namespace frote
