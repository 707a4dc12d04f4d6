#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ressim {

/// Numeric CSV table with a single header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws ressim::Error if absent.
  std::size_t column(const std::string& name) const;
};

/// Parses a numeric CSV. Errors carry the path and 1-based line number.
CsvTable read_csv(const std::filesystem::path& path);

/// Writes `table`; doubles use the shortest representation that round-trips.
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace ressim
