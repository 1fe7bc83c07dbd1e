#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace themescope::csv {

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;
};

/// Parses RFC-4180 CSV: quoted fields may contain commas, doubled quotes and
/// line breaks; CRLF and LF record terminators are both accepted. A trailing
/// newline does not produce an empty record. Throws FormatError on an
/// unterminated quote.
std::vector<Row> parse(std::string_view text);

/// Reads a file and checks that its first record equals `expected_header`.
/// A missing file throws IoError; a header mismatch throws FormatError.
Table read_file(const std::filesystem::path& path, const Row& expected_header);

/// Quotes only when the field contains a comma, quote, CR or LF.
std::string escape_field(std::string_view field);
std::string format_row(const Row& row);
std::string format_table(const Row& header, const std::vector<Row>& rows);

}  // namespace themescope::csv

namespace themescope::io {

std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
void atomic_write(const std::filesystem::path& path, std::string_view content);

/// Shortest decimal representation that round-trips the double.
std::string format_double(double value);

/// Fixed-point with `decimals` digits; used for SVG coordinates.
std::string format_fixed(double value, int decimals);

int parse_int(std::string_view text, std::string_view what);
double parse_double(std::string_view text, std::string_view what);

}  // namespace themescope::io
