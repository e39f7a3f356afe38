#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "certkit/core.hpp"

namespace certkit {

/// Column-role declaration. Roles are never inferred from the data; a column
/// not named here is ignored.
struct ColumnRoles {
  std::vector<std::string> features;
  /// Subset of `features` holding integer category codes.
  std::vector<std::string> categorical_features;
  std::optional<std::string> label;
  std::optional<std::string> prediction;
  /// One column per class, in class order (or a single JSONL array field).
  std::vector<std::string> scores;
  std::optional<std::string> group;
  std::optional<std::string> group_id;
  std::optional<std::string> timestamp;
  std::optional<std::string> split_tag;
  TaskKind task = TaskKind::classification;
  std::size_t num_classes = 0;
  /// Display names; a label/prediction cell that is not an integer is looked
  /// up here to obtain its class index.
  std::vector<std::string> label_dictionary;
  SplitTag default_split = SplitTag::test;

  Schema schema() const;
};

Dataset read_csv(std::istream& in, const ColumnRoles& roles, std::string provenance = {});
Dataset read_jsonl(std::istream& in, const ColumnRoles& roles, std::string provenance = {});

/// Dispatches on extension: .jsonl / .ndjson are JSON lines, anything else CSV.
Dataset load_dataset(const std::filesystem::path& path, const ColumnRoles& roles);

/// Writes the declared roles back out as CSV with a header row.
void write_csv(std::ostream& out, const Dataset& dataset, const ColumnRoles& roles);

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_csv_line(const std::string& line);

double parse_number(const std::string& text, const std::string& context);

}  // namespace certkit
