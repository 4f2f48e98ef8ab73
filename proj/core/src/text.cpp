#include "gridse/text.hpp"

#include <charconv>
#include <istream>
#include <sstream>

#include "gridse/error.hpp"

namespace gridse {

std::string format_double(double value) {
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, result.ptr);
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto first = cell.find_first_not_of(" \t\r");
        const auto last = cell.find_last_not_of(" \t\r");
        out.push_back(first == std::string::npos ? std::string() : cell.substr(first, last - first + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

CsvReader::CsvReader(std::istream& in, std::initializer_list<const char*> header)
    : in_(in), columns_(header.size()) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split(line);
        std::size_t i = 0;
        bool ok = cells.size() == header.size();
        for (const char* name : header) {
            if (!ok) break;
            ok = cells[i++] == name;
        }
        if (!ok) {
            std::string expected;
            for (const char* name : header) expected += std::string(expected.empty() ? "" : ",") + name;
            throw InputError("expected CSV header '" + expected + "'");
        }
        return;
    }
    throw InputError("empty CSV input");
}

std::optional<std::vector<std::string>> CsvReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = split(line);
        if (cells.size() != columns_) {
            throw InputError(where() + ": expected " + std::to_string(columns_) + " columns");
        }
        return cells;
    }
    return std::nullopt;
}

int CsvReader::integer(const std::vector<std::string>& row, std::size_t column) const {
    const std::string& s = row[column];
    int value = 0;
    const auto result = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || result.ec != std::errc() || result.ptr != s.data() + s.size()) {
        throw InputError(where() + ": '" + s + "' is not an integer");
    }
    return value;
}

double CsvReader::number(const std::vector<std::string>& row, std::size_t column) const {
    const std::string& s = row[column];
    double value = 0.0;
    const auto result = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || result.ec != std::errc() || result.ptr != s.data() + s.size()) {
        throw InputError(where() + ": '" + s + "' is not a number");
    }
    return value;
}

}  // namespace gridse
