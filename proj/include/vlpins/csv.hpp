#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vlpins::csv {

/// Comma-separated table with a header row. Fields are kept as strings.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws ConfigError when absent.
  std::size_t column(std::string_view name) const;
};

/// Throws ConfigError when the file is missing or a row has the wrong width.
Table read(const std::filesystem::path& path);
/// Checks that the header starts with `expected` (extra columns allowed).
void requireColumns(const Table& t, const std::vector<std::string>& expected, const std::string& what);

double toDouble(const std::string& field, const std::string& what);
long toInt(const std::string& field, const std::string& what);

/// Shortest round-trip decimal form of a double.
std::string format(double v);

/// Accumulates a table in memory so file bytes depend only on the values.
class Writer {
 public:
  explicit Writer(const std::vector<std::string>& header);
  Writer& operator<<(double v);
  Writer& operator<<(int v);
  Writer& operator<<(long v);
  Writer& operator<<(const std::string& v);
  void endRow();
  const std::string& text() const { return text_; }
  void save(const std::filesystem::path& path) const;

 private:
  void separator();
  std::string text_;
  bool row_start_ = true;
};

/// FNV-1a 64-bit over the file bytes, as 16 lowercase hex digits.
std::string fnv1aFile(const std::filesystem::path& path);
std::string fnv1a(std::string_view bytes);

void writeText(const std::filesystem::path& path, const std::string& text);

}  // namespace vlpins::csv
