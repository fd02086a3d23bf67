#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace agingsim::csv {

// Minimal reader for the unquoted numeric CSV files this project writes.
struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

std::vector<std::string> split(std::string_view line, char sep = ',');

// Reads the header line; returns false on an empty stream.
bool read_header(std::istream& in, std::vector<std::string>& header, std::size_t& line_no);

// Next non-blank row. Returns false at end of stream.
bool next_row(std::istream& in, Row& row, std::size_t& line_no);

double to_double(const std::string& s, std::size_t line);
long long to_integer(const std::string& s, std::size_t line);

// Round-trippable decimal rendering of a double.
std::string format_double(double v);

}  // namespace agingsim::csv
