#pragma once

// Running one experiment: parse, execute, and write manifest.json next to
// the outputs. Exit codes: 0 ok, 1 internal error, 2 configuration error,
// 3 numeric failure. Failed runs keep their partial outputs.

#include <phlab/harness/experiments.hpp>

#include <chrono>
#include <ctime>

namespace phlab::harness {

inline constexpr const char* version = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_internal = 1, exit_config = 2, exit_numeric = 3 };

inline ExperimentConfig parse_experiment(const json& j)
{
  return parse_config(j, [](const ExperimentConfig& c) {
    OutputSet* none = nullptr;
    RunContext ctx{c, none, 1, true};
    runners().at(c.kind)(ctx);
    return ctx.resolved;
  });
}

inline ExperimentConfig load_experiment(const std::string& path) { return parse_experiment(read_json_file(path)); }

struct RunOutcome {
  json manifest;
  int exit_code = exit_ok;
  fs::path dir;
};

inline std::string utc_timestamp()
{
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json read_manifest(const fs::path& p)
{
  json m = read_json_file(p.string());
  if (!m.is_object() || !m.contains("outputs") || !m.at("outputs").is_array())
    throw ConfigError(p.string() + " is not a run manifest");
  return m;
}

/// Removes the files a previous run recorded in `dir`, so a rerun into the
/// same directory leaves no stale outputs behind.
inline void clear_previous_run(const fs::path& dir)
{
  fs::path mp = dir / "manifest.json";
  if (!fs::exists(mp))
    return;
  json m = read_manifest(mp);
  for (const auto& o : m.at("outputs")) {
    fs::path rel = o.at("path").get<std::string>();
    if (rel.is_absolute() || rel.lexically_normal().string().starts_with(".."))
      throw ConfigError(mp.string() + " lists a path outside the run directory");
    fs::remove(dir / rel);
  }
  fs::remove(mp);
}

inline json outputs_json(const std::vector<OutputRecord>& recs)
{
  json a = json::array();
  for (const auto& r : recs)
    a.push_back({{"path", r.path}, {"sha256", r.sha256}, {"bytes", r.bytes}});
  return a;
}

inline void write_manifest(const fs::path& dir, const json& m)
{
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out)
    throw ConfigError("cannot write " + (dir / "manifest.json").string());
  out << m.dump(2) << "\n";
}

/// Runs `cfg` into `dir` (default: cfg.output_dir).
inline RunOutcome run(const ExperimentConfig& cfg, fs::path dir = {})
{
  RunOutcome res;
  res.dir = dir.empty() ? fs::path(cfg.output_dir) : dir;
  fs::create_directories(res.dir);
  clear_previous_run(res.dir);
  OutputSet out(res.dir);
  json summary = nullptr;
  std::string error;
  auto t0 = std::chrono::steady_clock::now();
  std::string started = utc_timestamp();
  try {
    RunContext ctx{cfg, &out, cfg.workers, false};
    summary = runners().at(cfg.kind)(ctx);
    out.json_file("summary.json", summary);
  } catch (const ConfigError& e) {
    res.exit_code = exit_config;
    error = e.what();
  } catch (const NumericError& e) {
    res.exit_code = exit_numeric;
    error = e.what();
  } catch (const std::exception& e) {
    res.exit_code = exit_internal;
    error = e.what();
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.manifest = {{"kind", cfg.kind},
                  {"version", version},
                  {"config", to_json(cfg)},
                  {"started_at", started},
                  {"wall_time_s", wall},
                  {"status", res.exit_code == exit_ok ? "ok" : "failed"},
                  {"exit_code", res.exit_code},
                  {"error", error.empty() ? json(nullptr) : json(error)},
                  {"summary", summary},
                  {"outputs", outputs_json(out.records())}};
  write_manifest(res.dir, res.manifest);
  return res;
}

} // namespace phlab::harness
