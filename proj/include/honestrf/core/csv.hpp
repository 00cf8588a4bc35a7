#pragma once

#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace honestrf {

/// RFC 4180 writer: comma separated, LF line endings, fields quoted only when
/// they contain a comma, quote or line break. The header is written on
/// construction.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);

  void row(const std::vector<std::string>& fields);
  std::size_t columns() const noexcept { return columns_; }

 private:
  std::ostream& out_;
  std::size_t columns_;
};

std::string csv_escape(std::string_view field);

/// Shortest decimal text that round-trips the double.
std::string format_number(double v);
std::string format_number(std::uint64_t v);

}  // namespace honestrf
