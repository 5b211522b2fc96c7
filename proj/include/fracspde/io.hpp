#pragma once

#include "error.hpp"
#include "grid.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fracspde::io {

using json = nlohmann::json;

//! Shortest decimal form that parses back to the same double.
inline std::string format_double(double v)
{
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(const std::string& s)
{
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigurationError("not a number: '" + s + "'");
  return v;
}

inline void ensure_directory(const std::filesystem::path& dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ConfigurationError("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline std::ofstream open_out(const std::filesystem::path& path, bool binary = false)
{
  if (path.has_parent_path())
    ensure_directory(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out)
    throw ConfigurationError("cannot write " + path.string());
  return out;
}

//! CSV with a `# {json}` metadata line, a header row, then data rows.
inline void write_csv(const std::filesystem::path& path,
                      const json& meta,
                      const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows)
{
  auto out = open_out(path);
  out << "# " << meta.dump() << '\n';
  for (std::size_t c = 0; c < columns.size(); ++c)
    out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw ConsistencyError("write_csv: row width differs from the header");
    for (std::size_t c = 0; c < row.size(); ++c)
      out << (c ? "," : "") << format_double(row[c]);
    out << '\n';
  }
}

struct CsvTable
{
  json meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigurationError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    throw ConfigurationError(path.string() + ": missing '# {json}' metadata line");
  t.meta = json::parse(line.substr(2));
  if (!std::getline(in, line))
    throw ConfigurationError(path.string() + ": missing header row");
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');)
    t.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');)
      row.push_back(parse_double(cell));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_json(const std::filesystem::path& path, const json& j)
{
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

inline json read_json(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigurationError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigurationError(path.string() + ": " + e.what());
  }
}

// Binary dump: "FSPD", u32 version (1), u32 rank, u64 shape[rank], then
// row-major little-endian float64 entries.
inline constexpr std::array<char, 4> dump_magic{'F', 'S', 'P', 'D'};

namespace detail {

template<typename T>
void put_le(std::ostream& out, T v)
{
  unsigned char b[sizeof(T)];
  std::uint64_t u = 0;
  if constexpr (std::is_same_v<T, double>)
    u = std::bit_cast<std::uint64_t>(v);
  else
    u = static_cast<std::uint64_t>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template<typename T>
T get_le(std::istream& in)
{
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T)))
    throw ConfigurationError("binary dump truncated");
  std::uint64_t u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  if constexpr (std::is_same_v<T, double>)
    return std::bit_cast<double>(u);
  else
    return static_cast<T>(u);
}

} // namespace detail

struct BinaryArray
{
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
};

inline void write_binary(const std::filesystem::path& path, const std::vector<std::uint64_t>& shape, const std::vector<double>& values)
{
  std::uint64_t count = 1;
  for (auto s : shape)
    count *= s;
  if (count != values.size())
    throw ConsistencyError("write_binary: shape does not match the number of values");
  auto out = open_out(path, true);
  out.write(dump_magic.data(), 4);
  detail::put_le<std::uint32_t>(out, 1);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (auto s : shape)
    detail::put_le<std::uint64_t>(out, s);
  for (double v : values)
    detail::put_le<double>(out, v);
}

inline BinaryArray read_binary(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigurationError("cannot read " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != dump_magic)
    throw ConfigurationError(path.string() + ": not an FSPD dump");
  if (detail::get_le<std::uint32_t>(in) != 1)
    throw ConfigurationError(path.string() + ": unsupported dump version");
  BinaryArray a;
  a.shape.resize(detail::get_le<std::uint32_t>(in));
  std::uint64_t count = 1;
  for (auto& s : a.shape) {
    s = detail::get_le<std::uint64_t>(in);
    count *= s;
  }
  a.values.resize(count);
  for (auto& v : a.values)
    v = detail::get_le<double>(in);
  return a;
}

//! Fields of one grid stacked as (frames, n, ..., n).
inline void write_frames(const std::filesystem::path& path, const std::vector<Field>& frames)
{
  if (frames.empty())
    throw ConsistencyError("write_frames: no frames");
  const Grid& g = frames.front().grid;
  std::vector<std::uint64_t> shape{frames.size()};
  for (std::size_t a = 0; a < g.dim(); ++a)
    shape.push_back(g.n_per_dim());
  std::vector<double> all;
  all.reserve(frames.size() * g.size());
  for (const auto& f : frames)
    all.insert(all.end(), f.values.begin(), f.values.end());
  write_binary(path, shape, all);
}

//! FNV-1a 64 of a file's bytes, as 16 hex digits.
inline std::string file_digest(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigurationError("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

} // namespace fracspde::io
