// Minimal CSV helpers for the emitted artifacts and their round-trip checks.
#pragma once

#include <string>
#include <vector>

namespace bimodal::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when missing
  double number(size_t row, int col) const;
};

Table read(const std::string& text);
Table read_file(const std::string& path);

void write_file(const std::string& path, const std::string& text);

std::string format_double(double v);  // round-trip exact, %.17g

}  // namespace bimodal::csv
