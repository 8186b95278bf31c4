#include "vlpins/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vlpins/errors.hpp"

namespace vlpins::csv {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.pop_back();
    std::size_t b = 0;
    while (b < field.size() && field[b] == ' ') ++b;
    out.push_back(field.substr(b));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError("missing CSV column '" + std::string(name) + "'");
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto row = split(line);
    if (row.size() != t.header.size())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " fields");
    t.rows.push_back(std::move(row));
  }
  return t;
}

void requireColumns(const Table& t, const std::vector<std::string>& expected, const std::string& what) {
  for (const auto& name : expected) {
    bool found = false;
    for (const auto& h : t.header) found = found || h == name;
    if (!found) throw ConfigError(what + ": missing column '" + name + "'");
  }
}

double toDouble(const std::string& field, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ConfigError(what + ": not a number '" + field + "'");
  return v;
}

long toInt(const std::string& field, const std::string& what) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ConfigError(what + ": not an integer '" + field + "'");
  return v;
}

std::string format(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Writer::Writer(const std::vector<std::string>& header) {
  for (const auto& h : header) *this << h;
  endRow();
}

void Writer::separator() {
  if (!row_start_) text_ += ',';
  row_start_ = false;
}

Writer& Writer::operator<<(double v) {
  separator();
  text_ += format(v);
  return *this;
}

Writer& Writer::operator<<(int v) { return *this << static_cast<long>(v); }

Writer& Writer::operator<<(long v) {
  separator();
  text_ += std::to_string(v);
  return *this;
}

Writer& Writer::operator<<(const std::string& v) {
  separator();
  text_ += v;
  return *this;
}

void Writer::endRow() {
  text_ += '\n';
  row_start_ = true;
}

void Writer::save(const std::filesystem::path& path) const { writeText(path, text_); }

void writeText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed for " + path.string());
}

std::string fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fnv1aFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a(std::string_view(ss.str()));
}

}  // namespace vlpins::csv
