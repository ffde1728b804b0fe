// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace antlab {

/// Writes `content` to a sibling temp file and renames it over `path`.
/// Throws std::runtime_error naming the path on failure.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Shortest text that round-trips the double exactly.
std::string fmt_real(double v);

/// Accumulates CSV rows; fields are written verbatim, so callers keep them
/// free of commas and quotes.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& row(std::vector<std::string> fields);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace antlab
