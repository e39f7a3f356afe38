#include "certkit/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "certkit/hash.hpp"

namespace certkit {

namespace {

using json = nlohmann::json;

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::int64_t parse_integer(const std::string& text, const std::string& context) {
  const std::string t = trim(text);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw Error(ErrorCode::ParseError, context + ": expected integer, got '" + text + "'");
  }
  return v;
}

/// Source-agnostic cell access so CSV and JSONL share one row builder.
class CellSource {
 public:
  virtual ~CellSource() = default;
  virtual bool has(const std::string& column) const = 0;
  virtual std::string text(const std::string& column) const = 0;
  virtual double number(const std::string& column) const = 0;
  virtual std::optional<std::vector<double>> array(const std::string&) const { return std::nullopt; }
};

class CsvCells final : public CellSource {
 public:
  CsvCells(const std::unordered_map<std::string, std::size_t>& index, std::vector<std::string> cells,
           std::size_t line)
      : index_(index), cells_(std::move(cells)), line_(line) {}

  bool has(const std::string& column) const override {
    const auto it = index_.find(column);
    return it != index_.end() && it->second < cells_.size() && !trim(cells_[it->second]).empty();
  }
  std::string text(const std::string& column) const override { return trim(cells_.at(index_.at(column))); }
  double number(const std::string& column) const override {
    return parse_number(text(column), "line " + std::to_string(line_) + " column '" + column + "'");
  }

 private:
  const std::unordered_map<std::string, std::size_t>& index_;
  std::vector<std::string> cells_;
  std::size_t line_;
};

class JsonCells final : public CellSource {
 public:
  JsonCells(const json& obj, std::size_t line) : obj_(obj), line_(line) {}

  bool has(const std::string& column) const override {
    const auto it = obj_.find(column);
    return it != obj_.end() && !it->is_null();
  }
  std::string text(const std::string& column) const override {
    const auto& v = obj_.at(column);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number()) return canonical_number(v.get<double>());
    throw Error(ErrorCode::ParseError, where(column) + ": expected scalar");
  }
  double number(const std::string& column) const override {
    const auto& v = obj_.at(column);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_number(v.get<std::string>(), where(column));
    throw Error(ErrorCode::ParseError, where(column) + ": expected number");
  }
  std::optional<std::vector<double>> array(const std::string& column) const override {
    const auto it = obj_.find(column);
    if (it == obj_.end() || !it->is_array()) return std::nullopt;
    std::vector<double> out;
    for (const auto& e : *it) {
      if (!e.is_number()) throw Error(ErrorCode::ParseError, where(column) + ": non-numeric array entry");
      out.push_back(e.get<double>());
    }
    return out;
  }

 private:
  std::string where(const std::string& column) const {
    return "line " + std::to_string(line_) + " field '" + column + "'";
  }
  const json& obj_;
  std::size_t line_;
};

Target parse_target(const CellSource& cells, const std::string& column, const ColumnRoles& roles) {
  if (roles.task == TaskKind::regression) return cells.number(column);
  const std::string t = cells.text(column);
  const auto it = std::find(roles.label_dictionary.begin(), roles.label_dictionary.end(), t);
  if (it != roles.label_dictionary.end()) {
    return static_cast<ClassIndex>(it - roles.label_dictionary.begin());
  }
  return parse_integer(t, "column '" + column + "'");
}

LabeledSample build_row(const CellSource& cells, const ColumnRoles& roles) {
  LabeledSample s;
  s.features.reserve(roles.features.size());
  for (const auto& f : roles.features) {
    if (!cells.has(f)) throw Error(ErrorCode::MissingColumn, "feature '" + f + "' missing");
    s.features.push_back(cells.number(f));
  }
  if (roles.label && cells.has(*roles.label)) s.label = parse_target(cells, *roles.label, roles);
  if (roles.prediction && cells.has(*roles.prediction)) {
    s.prediction = parse_target(cells, *roles.prediction, roles);
  }
  if (roles.scores.size() == 1) {
    if (auto arr = cells.array(roles.scores.front())) s.scores = std::move(*arr);
  }
  if (!s.scores && !roles.scores.empty()) {
    std::vector<double> sc;
    for (const auto& c : roles.scores) {
      if (!cells.has(c)) break;
      sc.push_back(cells.number(c));
    }
    if (sc.size() == roles.scores.size()) s.scores = std::move(sc);
  }
  if (roles.group && cells.has(*roles.group)) {
    s.group = static_cast<int>(parse_integer(cells.text(*roles.group), "group"));
  }
  if (roles.group_id && cells.has(*roles.group_id)) s.group_id = cells.text(*roles.group_id);
  if (roles.timestamp && cells.has(*roles.timestamp)) {
    s.timestamp = parse_integer(cells.text(*roles.timestamp), "timestamp");
  }
  s.split = roles.default_split;
  if (roles.split_tag && cells.has(*roles.split_tag)) s.split = parse_split_tag(cells.text(*roles.split_tag));
  return s;
}

}  // namespace

double parse_number(const std::string& text, const std::string& context) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* begin = t.data();
  if (!t.empty() && t.front() == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw Error(ErrorCode::ParseError, context + ": expected number, got '" + text + "'");
  }
  return v;
}

Schema ColumnRoles::schema() const {
  Schema s;
  for (const auto& f : features) {
    s.features.push_back({f, contains(categorical_features, f) ? FeatureKind::categorical : FeatureKind::real});
  }
  for (const auto& c : categorical_features) {
    if (!contains(features, c)) {
      throw Error(ErrorCode::ConfigInvalid, "categorical feature '" + c + "' is not a declared feature");
    }
  }
  s.task = task;
  s.has_label = label.has_value();
  s.has_prediction = prediction.has_value();
  s.has_scores = !scores.empty();
  s.has_group = group.has_value();
  s.has_group_id = group_id.has_value();
  s.has_timestamp = timestamp.has_value();
  s.num_classes = num_classes;
  if (num_classes == 0 && !label_dictionary.empty()) s.num_classes = label_dictionary.size();
  if (num_classes == 0 && scores.size() > 1) s.num_classes = scores.size();
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  if (quoted) throw Error(ErrorCode::ParseError, "unterminated quote in CSV record");
  out.push_back(std::move(cell));
  return out;
}

Dataset read_csv(std::istream& in, const ColumnRoles& roles, std::string provenance) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "CSV input has no header row");
  const auto header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index.emplace(trim(header[i]), i);

  const auto require = [&](const std::optional<std::string>& col) {
    if (col && !index.contains(*col)) throw Error(ErrorCode::MissingColumn, "column '" + *col + "' not in header");
  };
  for (const auto& f : roles.features) require(f);
  for (const auto& c : roles.scores) require(c);
  require(roles.label);
  require(roles.prediction);
  require(roles.group);
  require(roles.group_id);
  require(roles.timestamp);

  std::vector<LabeledSample> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected " +
                                             std::to_string(header.size()) + " fields, got " +
                                             std::to_string(cells.size()));
    }
    rows.push_back(build_row(CsvCells(index, std::move(cells), lineno), roles));
  }
  return Dataset(roles.schema(), std::move(rows), std::move(provenance));
}

Dataset read_jsonl(std::istream& in, const ColumnRoles& roles, std::string provenance) {
  std::vector<LabeledSample> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object()) throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": not an object");
    rows.push_back(build_row(JsonCells(obj, lineno), roles));
  }
  return Dataset(roles.schema(), std::move(rows), std::move(provenance));
}

Dataset load_dataset(const std::filesystem::path& path, const ColumnRoles& roles) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::DataLoadError, "cannot open '" + path.string() + "'");
  const auto ext = path.extension().string();
  try {
    if (ext == ".jsonl" || ext == ".ndjson") return read_jsonl(in, roles, path.filename().string());
    return read_csv(in, roles, path.filename().string());
  } catch (const Error& e) {
    throw Error(ErrorCode::DataLoadError, path.string() + ": " + e.what());
  }
}

namespace {

std::string format_target(const Target& t, const ColumnRoles& roles) {
  if (std::holds_alternative<double>(t)) return canonical_number(std::get<double>(t));
  const auto c = std::get<ClassIndex>(t);
  (void)roles;
  return std::to_string(c);
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_csv(std::ostream& out, const Dataset& dataset, const ColumnRoles& roles) {
  std::vector<std::string> header = roles.features;
  if (roles.label) header.push_back(*roles.label);
  if (roles.prediction) header.push_back(*roles.prediction);
  for (const auto& c : roles.scores) header.push_back(c);
  if (roles.group) header.push_back(*roles.group);
  if (roles.group_id) header.push_back(*roles.group_id);
  if (roles.timestamp) header.push_back(*roles.timestamp);
  if (roles.split_tag) header.push_back(*roles.split_tag);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << quote(header[i]);
  out << '\n';

  for (const auto& r : dataset.rows()) {
    std::vector<std::string> cells;
    for (double v : r.features) cells.push_back(canonical_number(v));
    if (roles.label) cells.push_back(r.label ? format_target(*r.label, roles) : "");
    if (roles.prediction) cells.push_back(r.prediction ? format_target(*r.prediction, roles) : "");
    for (std::size_t c = 0; c < roles.scores.size(); ++c) {
      cells.push_back(r.scores ? canonical_number(r.scores->at(c)) : "");
    }
    if (roles.group) cells.push_back(r.group ? std::to_string(*r.group) : "");
    if (roles.group_id) cells.push_back(r.group_id ? quote(*r.group_id) : "");
    if (roles.timestamp) cells.push_back(r.timestamp ? std::to_string(*r.timestamp) : "");
    if (roles.split_tag) cells.push_back(std::string(to_string(r.split)));
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  }
}

}  // namespace certkit
