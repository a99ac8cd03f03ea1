#ifndef FEWATOM_IO_HPP
#define FEWATOM_IO_HPP

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fewatom {

/// Malformed or inconsistent input data (files, fields, values).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal that parses back to exactly `x`.
std::string format_shortest(double x);
/// Fixed 9-significant-digit rendering used for trace times.
std::string format_sig9(double x);

double parse_double(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Header plus rows of numbers, the shape of every per-point CSV we emit.
struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(std::string_view name) const;
  bool operator==(const Table&) const = default;
};

std::string table_to_csv(const Table& table);
/// Parses a numeric CSV with a header line; throws DataError with line number.
Table table_from_csv(std::string_view text, std::string name = {});

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace fewatom

#endif // FEWATOM_IO_HPP
