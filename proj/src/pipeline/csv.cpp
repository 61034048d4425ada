#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "edgeguard/error.hpp"
#include "edgeguard/pipeline.hpp"

namespace edgeguard::pipeline {
namespace {

using Row = std::vector<std::string>;

// Splits one logical record starting at pos; returns false at end of input.
bool next_record(std::string_view text, std::size_t& pos, Row& out, std::size_t line) {
  out.clear();
  if (pos >= text.size()) return false;
  std::string field;
  bool quoted = false;
  bool field_started_quoted = false;
  while (pos < text.size()) {
    const char ch = text[pos];
    if (quoted) {
      if (ch == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      field.push_back(ch);
      ++pos;
      continue;
    }
    if (ch == '"' && field.empty() && !field_started_quoted) {
      quoted = true;
      field_started_quoted = true;
      ++pos;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
      field_started_quoted = false;
      ++pos;
    } else if (ch == '\n' || ch == '\r') {
      ++pos;
      if (ch == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
      break;
    } else {
      field.push_back(ch);
      ++pos;
    }
  }
  if (quoted) throw IngestionError("unterminated quoted field in record at line " + std::to_string(line));
  out.push_back(std::move(field));
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool is_blank(const Row& r) { return r.size() == 1 && trim(r[0]).empty(); }

ColumnRole default_role(const std::string& name) {
  if (name == "label") return ColumnRole::label;
  if (name == "id") return ColumnRole::id;
  if (name == "attack_cat") return ColumnRole::attack_category;
  return ColumnRole::numeric;  // refined by inference
}

}  // namespace

std::string to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::numeric: return "numeric";
    case ColumnRole::categorical: return "categorical";
    case ColumnRole::label: return "label";
    case ColumnRole::id: return "id";
    case ColumnRole::attack_category: return "attack_category";
    case ColumnRole::ignore: return "ignore";
  }
  return "?";
}

ColumnRole role_from_string(const std::string& name) {
  for (auto r : {ColumnRole::numeric, ColumnRole::categorical, ColumnRole::label, ColumnRole::id,
                 ColumnRole::attack_category, ColumnRole::ignore}) {
    if (to_string(r) == name) return r;
  }
  throw IngestionError("schema: unknown column type '" + name + "'");
}

std::optional<ColumnRole> Schema::role_of(const std::string& column) const {
  for (const auto& [name, role] : roles)
    if (name == column) return role;
  return std::nullopt;
}

Schema Schema::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw IngestionError("schema: expected a JSON object mapping column -> type");
  Schema s;
  for (const auto& [name, type] : j.items()) {
    if (!type.is_string()) throw IngestionError("schema: type of column '" + name + "' must be a string");
    s.roles.emplace_back(name, role_from_string(type.get<std::string>()));
  }
  return s;
}

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open schema file '" + path.string() + "'");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("schema '" + path.string() + "': " + e.what());
  }
}

RawDataset RawDataset::select(std::span<const std::size_t> indices) const {
  RawDataset out;
  out.numeric_names = numeric_names;
  out.categorical_names = categorical_names;
  out.numeric.assign(numeric.size(), {});
  out.categorical.assign(categorical.size(), {});
  for (std::size_t c = 0; c < numeric.size(); ++c) {
    out.numeric[c].reserve(indices.size());
    for (auto i : indices) out.numeric[c].push_back(numeric[c][i]);
  }
  for (std::size_t c = 0; c < categorical.size(); ++c) {
    out.categorical[c].reserve(indices.size());
    for (auto i : indices) out.categorical[c].push_back(categorical[c][i]);
  }
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    if (i >= rows()) throw DimensionError("RawDataset::select: index out of range");
    out.labels.push_back(labels[i]);
    if (!ids.empty()) out.ids.push_back(ids[i]);
    if (!attack_categories.empty()) out.attack_categories.push_back(attack_categories[i]);
  }
  return out;
}

void RawDataset::validate() const {
  const auto n = rows();
  if (numeric.size() != numeric_names.size() || categorical.size() != categorical_names.size()) {
    throw DimensionError("RawDataset: column/name count mismatch");
  }
  for (const auto& c : numeric)
    if (c.size() != n) throw DimensionError("RawDataset: ragged numeric column");
  for (const auto& c : categorical)
    if (c.size() != n) throw DimensionError("RawDataset: ragged categorical column");
  if (!ids.empty() && ids.size() != n) throw DimensionError("RawDataset: id column length mismatch");
  if (!attack_categories.empty() && attack_categories.size() != n) {
    throw DimensionError("RawDataset: attack category length mismatch");
  }
  for (int y : labels)
    if (y != 0 && y != 1) throw IngestionError("RawDataset: label outside {0,1}");
}

RawDataset parse_csv(std::string_view text, const std::optional<Schema>& schema,
                     const std::string& source) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  std::size_t pos = 0;
  Row header;
  if (!next_record(text, pos, header, 1) || is_blank(header)) {
    throw IngestionError(source + ": empty file (no header row)");
  }
  for (auto& h : header) h = std::string(trim(h));
  {
    std::unordered_set<std::string> seen;
    for (const auto& h : header) {
      if (h.empty()) throw IngestionError(source + ": empty column name in header");
      if (!seen.insert(h).second) throw IngestionError(source + ": duplicate header column '" + h + "'");
    }
  }

  std::vector<ColumnRole> roles;
  std::vector<bool> explicit_role;
  for (const auto& h : header) {
    const auto r = schema ? schema->role_of(h) : std::nullopt;
    roles.push_back(r.value_or(default_role(h)));
    explicit_role.push_back(r.has_value());
  }
  if (schema) {
    for (const auto& [name, role] : schema->roles) {
      if (std::find(header.begin(), header.end(), name) == header.end()) {
        throw IngestionError(source + ": schema column '" + name + "' missing from header");
      }
    }
  }
  const auto label_count = std::count(roles.begin(), roles.end(), ColumnRole::label);
  if (label_count == 0) throw IngestionError(source + ": missing label column 'label'");
  if (label_count > 1) throw IngestionError(source + ": more than one label column");

  RawDataset ds;
  std::vector<Row> rows;
  Row rec;
  std::size_t line = 1;
  while (next_record(text, pos, rec, ++line)) {
    if (is_blank(rec)) continue;
    const std::size_t data_row = rows.size() + ds.rejected_missing + 1;
    if (rec.size() != header.size()) {
      throw IngestionError(source + ": data row " + std::to_string(data_row) + " has " +
                           std::to_string(rec.size()) + " fields, header has " +
                           std::to_string(header.size()));
    }
    bool missing = false;
    for (std::size_t c = 0; c < rec.size(); ++c) {
      if (roles[c] != ColumnRole::ignore && trim(rec[c]).empty()) missing = true;
    }
    if (missing) {
      ++ds.rejected_missing;
      continue;
    }
    rows.push_back(std::move(rec));
    rec = Row{};
  }

  // Inference: undeclared feature columns are numeric only if every value parses.
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (explicit_role[c] || roles[c] != ColumnRole::numeric) continue;
    for (const auto& r : rows) {
      if (!parse_number(r[c])) {
        roles[c] = ColumnRole::categorical;
        break;
      }
    }
  }

  std::vector<std::size_t> numeric_cols, categorical_cols;
  std::size_t label_col = 0, id_col = header.size(), attack_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    switch (roles[c]) {
      case ColumnRole::numeric: numeric_cols.push_back(c); break;
      case ColumnRole::categorical: categorical_cols.push_back(c); break;
      case ColumnRole::label: label_col = c; break;
      case ColumnRole::id: id_col = c; break;
      case ColumnRole::attack_category: attack_col = c; break;
      case ColumnRole::ignore: break;
    }
  }
  for (auto c : numeric_cols) ds.numeric_names.push_back(header[c]);
  for (auto c : categorical_cols) ds.categorical_names.push_back(header[c]);
  ds.numeric.assign(numeric_cols.size(), {});
  ds.categorical.assign(categorical_cols.size(), {});
  for (auto& col : ds.numeric) col.reserve(rows.size());
  for (auto& col : ds.categorical) col.reserve(rows.size());
  ds.labels.reserve(rows.size());

  std::unordered_set<std::string> seen_ids;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto where = [&](std::size_t c) {
      return source + ": row " + std::to_string(r + 1) + ", column '" + header[c] + "'";
    };
    for (std::size_t k = 0; k < numeric_cols.size(); ++k) {
      const auto v = parse_number(row[numeric_cols[k]]);
      if (!v) {
        throw IngestionError(where(numeric_cols[k]) + ": cannot parse '" + row[numeric_cols[k]] +
                             "' as a number");
      }
      ds.numeric[k].push_back(*v);
    }
    for (std::size_t k = 0; k < categorical_cols.size(); ++k) {
      ds.categorical[k].emplace_back(trim(row[categorical_cols[k]]));
    }
    const auto y = parse_number(row[label_col]);
    if (!y || (*y != 0.0 && *y != 1.0)) {
      throw IngestionError(where(label_col) + ": label '" + row[label_col] + "' is not 0 or 1");
    }
    ds.labels.push_back(static_cast<int>(*y));
    if (id_col < header.size()) {
      std::string id(trim(row[id_col]));
      if (!seen_ids.insert(id).second) throw IngestionError(where(id_col) + ": duplicate id '" + id + "'");
      ds.ids.push_back(std::move(id));
    }
    if (attack_col < header.size()) ds.attack_categories.emplace_back(trim(row[attack_col]));
  }
  return ds;
}

RawDataset load_csv(const std::filesystem::path& path, const std::optional<Schema>& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open CSV '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), schema, path.string());
}

RawDataset concat(std::span<const RawDataset> parts) {
  if (parts.empty()) throw IngestionError("concat: no datasets");
  RawDataset out;
  out.numeric_names = parts[0].numeric_names;
  out.categorical_names = parts[0].categorical_names;
  out.numeric.assign(out.numeric_names.size(), {});
  out.categorical.assign(out.categorical_names.size(), {});
  const bool prefix = parts.size() > 1;
  const bool with_ids = !parts[0].ids.empty();
  const bool with_tags = !parts[0].attack_categories.empty();
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& part = parts[p];
    if (part.numeric_names != out.numeric_names || part.categorical_names != out.categorical_names ||
        part.ids.empty() != !with_ids || part.attack_categories.empty() != !with_tags) {
      throw IngestionError("concat: input " + std::to_string(p + 1) +
                           " has different columns or column types than input 1");
    }
    for (std::size_t c = 0; c < part.numeric.size(); ++c) {
      out.numeric[c].insert(out.numeric[c].end(), part.numeric[c].begin(), part.numeric[c].end());
    }
    for (std::size_t c = 0; c < part.categorical.size(); ++c) {
      out.categorical[c].insert(out.categorical[c].end(), part.categorical[c].begin(),
                                part.categorical[c].end());
    }
    out.labels.insert(out.labels.end(), part.labels.begin(), part.labels.end());
    for (const auto& id : part.ids) out.ids.push_back(prefix ? std::to_string(p + 1) + ":" + id : id);
    out.attack_categories.insert(out.attack_categories.end(), part.attack_categories.begin(),
                                 part.attack_categories.end());
    out.rejected_missing += part.rejected_missing;
  }
  return out;
}

}  // namespace edgeguard::pipeline
