#pragma once

// Output files of a run: CSV tables with round-trip float formatting, JSON
// documents, and SHA-256 digests of everything written.

#include <phlab/harness/config.hpp>

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace phlab::harness {

namespace fs = std::filesystem;

inline std::string sha256_hex(const std::string& bytes)
{
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
    throw std::runtime_error("sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string read_file(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw ConfigError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double x)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

using Cell = std::variant<double, long, std::string>;

class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void row(std::vector<Cell> cells)
  {
    if (cells.size() != header_.size())
      throw std::logic_error("csv row width does not match the header");
    rows_.push_back(std::move(cells));
  }

  std::size_t size() const { return rows_.size(); }

  std::string str() const
  {
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i)
      out += (i ? "," : "") + header_[i];
    out += '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i)
          out += ',';
        if (const double* d = std::get_if<double>(&r[i]))
          out += format_double(*d);
        else if (const long* l = std::get_if<long>(&r[i]))
          out += std::to_string(*l);
        else
          out += std::get<std::string>(r[i]);
      }
      out += '\n';
    }
    return out;
  }

private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

struct OutputRecord {
  std::string path; // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Writes files under one directory and records a digest for each.
class OutputSet {
public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  const fs::path& dir() const { return dir_; }

  void write(const std::string& rel, const std::string& bytes)
  {
    fs::path p = dir_ / rel;
    fs::create_directories(p.parent_path());
    {
      std::ofstream out(p, std::ios::binary | std::ios::trunc);
      if (!out)
        throw ConfigError("cannot write " + p.string());
      out << bytes;
    }
    for (auto& r : records_)
      if (r.path == rel) {
        r = {rel, sha256_hex(bytes), bytes.size()};
        return;
      }
    records_.push_back({rel, sha256_hex(bytes), bytes.size()});
  }

  void csv(const std::string& rel, const CsvTable& t) { write(rel, t.str()); }
  void json_file(const std::string& rel, const json& j) { write(rel, j.dump(2) + "\n"); }

  const std::vector<OutputRecord>& records() const { return records_; }

private:
  fs::path dir_;
  std::vector<OutputRecord> records_;
};

/// Numbers in JSON summaries: non-finite values become strings so the
/// document stays valid JSON.
inline json num(double x)
{
  if (std::isfinite(x))
    return x;
  return std::isnan(x) ? json("nan") : json(x > 0 ? "inf" : "-inf");
}

} // namespace phlab::harness
