#pragma once

// Re-running the config embedded in a manifest and comparing digests.

#include <phlab/harness/run.hpp>

#include <cstdlib>
#include <map>
#include <optional>

namespace phlab::harness {

struct FileComparison {
  std::string path;
  std::string status; // identical | divergent | missing | extra
  std::string recorded;
  std::string rerun;
};

struct ReproduceReport {
  bool identical = true;
  int recorded_exit = 0;
  int rerun_exit = 0;
  std::vector<FileComparison> files;
  fs::path rerun_dir;

  json to_json() const
  {
    json f = json::array();
    for (const auto& c : files)
      f.push_back({{"path", c.path}, {"status", c.status}, {"recorded", c.recorded}, {"rerun", c.rerun}});
    return {{"identical", identical},
            {"recorded_exit_code", recorded_exit},
            {"rerun_exit_code", rerun_exit},
            {"files", f},
            {"rerun_dir", rerun_dir.string()}};
  }
};

inline fs::path make_temp_dir(const std::string& prefix)
{
  std::string tmpl = (fs::temp_directory_path() / (prefix + "XXXXXX")).string();
  if (!mkdtemp(tmpl.data()))
    throw ConfigError("cannot create a temporary directory");
  return tmpl;
}

inline std::map<std::string, std::string> digests(const json& outputs)
{
  std::map<std::string, std::string> d;
  for (const auto& o : outputs) {
    auto p = o.at("path").get<std::string>();
    if (!p.starts_with("plotdata/"))
      d[p] = o.at("sha256").get<std::string>();
  }
  return d;
}

/// Reruns the manifest's config into a fresh temporary directory. Derived
/// plot tables are not part of the comparison. The rerun directory is
/// removed unless `keep` is set.
inline ReproduceReport reproduce(const fs::path& manifest_path, std::optional<int> workers = {}, bool keep = false)
{
  json m = read_manifest(manifest_path);
  if (!m.contains("config") || !m.at("config").is_object())
    throw ConfigError(manifest_path.string() + " has no config snapshot");
  ExperimentConfig cfg = parse_experiment(m.at("config"));
  if (workers)
    cfg.workers = *workers;
  ReproduceReport rep;
  rep.recorded_exit = m.value("exit_code", 0);
  rep.rerun_dir = make_temp_dir("phlab-reproduce-");
  RunOutcome out = run(cfg, rep.rerun_dir);
  rep.rerun_exit = out.exit_code;

  auto before = digests(m.at("outputs"));
  auto after = digests(out.manifest.at("outputs"));
  for (const auto& [p, d] : before) {
    auto it = after.find(p);
    if (it == after.end())
      rep.files.push_back({p, "missing", d, ""});
    else
      rep.files.push_back({p, d == it->second ? "identical" : "divergent", d, it->second});
  }
  for (const auto& [p, d] : after)
    if (!before.count(p))
      rep.files.push_back({p, "extra", "", d});
  rep.identical = rep.recorded_exit == rep.rerun_exit;
  for (const auto& f : rep.files)
    rep.identical = rep.identical && f.status == "identical";
  if (!keep) {
    fs::remove_all(rep.rerun_dir);
    rep.rerun_dir.clear();
  }
  return rep;
}

} // namespace phlab::harness
