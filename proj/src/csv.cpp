#include "sgdkf/csv.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sgdkf/error.hpp"

namespace sgdkf {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::vector<std::string>& header) : width_(header.size()) {
  for (const auto& h : header) cell(std::string_view(h));
  end_row();
}

CsvWriter& CsvWriter::cell(double v) { return cell(std::string_view(format_double(v))); }

CsvWriter& CsvWriter::cell(long v) { return cell(std::string_view(std::to_string(v))); }

CsvWriter& CsvWriter::cell(std::string_view v) {
  if (cells_in_row_ > 0) text_ += ',';
  text_ += v;
  ++cells_in_row_;
  return *this;
}

void CsvWriter::end_row() {
  if (cells_in_row_ != width_) {
    throw Error(ErrorKind::BadSpec, "CSV row has " + std::to_string(cells_in_row_) + " cells, header has " +
                                        std::to_string(width_));
  }
  text_ += '\n';
  cells_in_row_ = 0;
}

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    if (line.empty()) {
      if (pos >= text.size()) break;
      throw Error(ErrorKind::BadSpec, "CSV line " + std::to_string(line_no) + " is empty");
    }
    auto fields = split_line(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorKind::BadSpec, "CSV line " + std::to_string(line_no) + " is ragged");
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw Error(ErrorKind::BadSpec, "CSV header missing");
  return table;
}

double parse_double(std::string_view field, const std::string& context) {
  if (field == "inf") return INFINITY;
  if (field == "-inf") return -INFINITY;
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw Error(ErrorKind::BadSpec, context + ": '" + std::string(field) + "' is not a number");
  }
  return v;
}

void write_file_atomic(const std::string& path, std::string_view content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::BadSpec, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::BadSpec, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace sgdkf
