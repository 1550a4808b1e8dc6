#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sgdkf {

/// Shortest round-trip decimal form, '.' separator regardless of locale.
std::string format_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header);

  CsvWriter& cell(double v);
  CsvWriter& cell(long v);
  CsvWriter& cell(std::string_view v);
  /// Throws if the row width differs from the header.
  void end_row();

  const std::string& str() const { return text_; }

 private:
  std::size_t width_;
  std::size_t cells_in_row_ = 0;
  std::string text_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Strict reader: header required, every row as wide as the header.
CsvTable parse_csv(std::string_view text);

double parse_double(std::string_view field, const std::string& context);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace sgdkf
