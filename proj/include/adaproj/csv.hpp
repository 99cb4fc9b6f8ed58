#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace adaproj::csv {

/// Shortest decimal text that reads back to the same double ('.' separator).
std::string format(double value);

/// Quotes the field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Splits one line, honouring double-quoted fields.
std::vector<std::string> split_line(std::string_view line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws DataError when absent.
  std::size_t column(std::string_view name) const;
};

/// Reads a header line and rows of the same width. Throws DataError.
Table read(const std::filesystem::path& path);

/// Joins already formatted fields with commas, escaping each one.
std::string join(const std::vector<std::string>& fields);

}  // namespace adaproj::csv
