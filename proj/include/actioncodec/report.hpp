#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace actioncodec {

// Numeric CSV with a header row. Non-numeric cells read as NaN.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // Column by header name; throws if absent.
  std::vector<double> column(const std::string& name) const;
  bool has(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Self-contained SVG line chart; non-finite points are skipped.
std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series, int width = 640, int height = 400);

}  // namespace actioncodec
