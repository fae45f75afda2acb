#pragma once

// Small CSV and formatting helpers shared by the persistence code. Internal.

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace radscan::detail {

std::vector<std::string> split_csv_line(std::string_view line);

double parse_double(std::string_view text, const std::string& context);
long long parse_int(std::string_view text, const std::string& context);

// Reads `path` as header + rows. Blank lines are skipped, lines starting with '#'
// are returned through `comments` when given. Rows must match the header's width.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;
  std::string path;

  // Column index by name; ParseError when absent.
  std::size_t column(std::string_view name) const;
};
CsvTable read_csv(const std::string& path);

std::ofstream open_for_write(const std::string& path);

// Lossless (17 significant digits).
std::string format_exact(double value);
// Six significant digits.
std::string format_6g(double value);

std::string trim(std::string_view text);

// FNV-1a, 64-bit.
class Digest {
 public:
  void update(const void* data, std::size_t size);
  void update(double value);
  void update(std::uint64_t value);
  void update(std::string_view text);
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t value);

}  // namespace radscan::detail
