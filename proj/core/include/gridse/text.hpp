#pragma once

#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gridse {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Minimal comma-separated reader: checks the header, skips blank lines and
/// reports positions as "<line N>" in errors.
class CsvReader {
  public:
    CsvReader(std::istream& in, std::initializer_list<const char*> header);

    std::optional<std::vector<std::string>> next();

    int integer(const std::vector<std::string>& row, std::size_t column) const;
    double number(const std::vector<std::string>& row, std::size_t column) const;
    std::string where() const { return "line " + std::to_string(line_); }

  private:
    std::istream& in_;
    std::size_t columns_;
    int line_ = 0;
};

}  // namespace gridse
