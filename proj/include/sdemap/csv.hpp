#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdemap {

/// printf "%.17g": 17 significant digits, enough to round-trip a double.
std::string format_double(double value);
/// Empty string for nullopt.
std::string format_optional(const std::optional<double>& value);

/// Writes to a sibling temporary file and renames it over `path`, so the
/// target is either absent, the old file, or the complete new file.
void atomic_write(const std::filesystem::path& path, std::string_view content);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<std::string> row);
  std::string str() const;
  void write(const std::filesystem::path& path) const { atomic_write(path, str()); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Plain comma-separated reader (no quoting); first row is the header.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

}  // namespace sdemap
