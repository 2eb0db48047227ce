#pragma once

// Long-format plot tables (series, x, y) derived from a finished run and
// recorded in its manifest.

#include <phlab/harness/run.hpp>

#include <algorithm>
#include <cmath>

namespace phlab::harness {

inline const std::vector<std::string>& plot_kinds()
{
  static const std::vector<std::string> kinds{"theta_marginal", "holonomy", "exponent_histogram", "recurrence"};
  return kinds;
}

struct PlotOptions {
  int cluster = 0;      // theta_marginal
  std::string series;   // holonomy map name; empty picks the first
  int bins = 50;        // exponent_histogram
};

struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const
  {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ConfigError("csv has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

inline CsvData read_csv(const fs::path& p)
{
  if (!fs::exists(p))
    throw ConfigError("run has no " + p.filename().string());
  std::istringstream in(read_file(p));
  CsvData d;
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError(p.string() + " is empty");
  d.header = split_csv_line(line);
  while (std::getline(in, line))
    if (!line.empty())
      d.rows.push_back(split_csv_line(line));
  return d;
}

inline double to_double(const std::string& s)
{
  char* end = nullptr;
  double x = std::strtod(s.c_str(), &end);
  if (end == s.c_str())
    throw ConfigError("not a number in csv: " + s);
  return x;
}

/// Equal-width histogram over [min, max]; a degenerate range is widened
/// to unit width around the common value.
inline CsvTable histogram_table(const std::string& series, const std::vector<double>& xs, int bins)
{
  if (bins < 1)
    throw ConfigError("histogram needs bins >= 1");
  if (xs.empty())
    throw ConfigError("histogram of an empty column");
  auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
  double lo = *mn, hi = *mx;
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<long> counts(static_cast<std::size_t>(bins), 0);
  for (double x : xs) {
    auto k = static_cast<long>(std::floor((x - lo) / (hi - lo) * bins));
    ++counts[static_cast<std::size_t>(std::clamp(k, 0L, static_cast<long>(bins) - 1))];
  }
  CsvTable t({"series", "x", "y"});
  for (int k = 0; k < bins; ++k)
    t.row({series, lo + (k + 0.5) * (hi - lo) / bins, static_cast<double>(counts[static_cast<std::size_t>(k)])});
  return t;
}

inline CsvTable plot_table(const fs::path& run_dir, const std::string& kind, const PlotOptions& opt)
{
  CsvTable t({"series", "x", "y"});
  if (kind == "theta_marginal") {
    auto d = read_csv(run_dir / "theta_marginal.csv");
    auto c = d.column("cluster"), x = d.column("theta"), y = d.column("mass");
    for (const auto& r : d.rows)
      if (std::stol(r[c]) == opt.cluster)
        t.row({std::string("theta_marginal"), to_double(r[x]), to_double(r[y])});
    if (t.size() == 0)
      throw ConfigError("run has no cluster " + std::to_string(opt.cluster));
  } else if (kind == "holonomy") {
    auto d = read_csv(run_dir / "maps.csv");
    auto m = d.column("map"), x = d.column("theta"), y = d.column("image");
    if (d.rows.empty())
      throw ConfigError("maps.csv has no rows");
    std::string series = opt.series.empty() ? d.rows.front()[m] : opt.series;
    for (const auto& r : d.rows)
      if (r[m] == series)
        t.row({series, to_double(r[x]), to_double(r[y])});
    if (t.size() == 0)
      throw ConfigError("run has no map '" + series + "'");
  } else if (kind == "exponent_histogram") {
    fs::path src = fs::exists(run_dir / "exponents.csv") ? run_dir / "exponents.csv" : run_dir / "orbits.csv";
    auto d = read_csv(src);
    auto e = d.column("exponent");
    std::vector<double> xs;
    for (const auto& r : d.rows)
      xs.push_back(to_double(r[e]));
    return histogram_table("exponent_histogram", xs, opt.bins);
  } else if (kind == "recurrence") {
    auto d = read_csv(run_dir / "recurrence.csv");
    auto b = d.column("block"), x = d.column("t"), y = d.column("fraction");
    for (const auto& r : d.rows)
      t.row({r[b], to_double(r[x]), to_double(r[y])});
  } else {
    std::string all;
    for (const auto& k : plot_kinds())
      all += (all.empty() ? "" : ", ") + k;
    throw ConfigError("plot kind must be one of: " + all);
  }
  return t;
}

/// Writes <run>/plotdata/<kind>.csv and records it in the run manifest.
inline OutputRecord plotdata(const fs::path& run_dir, const std::string& kind, const PlotOptions& opt = {})
{
  json m = read_manifest(run_dir / "manifest.json");
  CsvTable t = plot_table(run_dir, kind, opt);
  std::string rel = "plotdata/" + kind + ".csv";
  OutputSet out(run_dir);
  out.csv(rel, t);
  const OutputRecord& rec = out.records().front();
  json& outs = m.at("outputs");
  json entry{{"path", rec.path}, {"sha256", rec.sha256}, {"bytes", rec.bytes}};
  bool replaced = false;
  for (auto& o : outs)
    if (o.at("path") == rel) {
      o = entry;
      replaced = true;
    }
  if (!replaced)
    outs.push_back(entry);
  write_manifest(run_dir, m);
  return rec;
}

} // namespace phlab::harness
