// phlab: run experiments, reproduce manifests, emit plot tables.

#include <phlab/phlab.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

using namespace phlab::harness;

namespace {

std::optional<std::string> env(const char* name)
{
  const char* v = std::getenv(name);
  if (!v || !*v)
    return std::nullopt;
  return std::string(v);
}

int env_workers()
{
  auto v = env("PHLAB_WORKERS");
  if (!v)
    return 0;
  try {
    std::size_t used = 0;
    int w = std::stoi(*v, &used);
    if (used != v->size() || w < 1 || w > 1024)
      throw std::invalid_argument("range");
    return w;
  } catch (const std::exception&) {
    throw phlab::ConfigError("PHLAB_WORKERS must be an integer in [1, 1024]");
  }
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::string> out,
            std::optional<int> workers)
{
  ExperimentConfig cfg = load_experiment(path);
  if (seed)
    cfg.seed = *seed;
  if (out)
    cfg.output_dir = *out;
  else if (auto e = env("PHLAB_OUT"))
    cfg.output_dir = (fs::path(*e) / cfg.kind).string();
  if (workers)
    cfg.workers = *workers;
  else if (int w = env_workers())
    cfg.workers = w;
  RunOutcome r = run(cfg);
  std::cout << (r.dir / "manifest.json").string() << "\n";
  if (r.exit_code != exit_ok)
    std::cerr << "phlab: run failed: " << r.manifest.at("error").get<std::string>() << "\n";
  return r.exit_code;
}

int cmd_reproduce(const std::string& path, std::optional<int> workers, bool keep)
{
  if (!workers)
    if (int w = env_workers())
      workers = w;
  ReproduceReport rep = reproduce(path, workers, keep);
  std::cout << rep.to_json().dump(2) << "\n";
  if (!rep.identical) {
    for (const auto& f : rep.files)
      if (f.status != "identical")
        std::cerr << "phlab: " << f.status << ": " << f.path << "\n";
    if (rep.recorded_exit != rep.rerun_exit)
      std::cerr << "phlab: exit code " << rep.rerun_exit << " differs from recorded " << rep.recorded_exit << "\n";
    return exit_internal;
  }
  return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"phlab: partially hyperbolic dynamics experiments"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  auto* run_cmd = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run_cmd->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed, "Root seed (overrides the config)");
  run_cmd->add_option("--out", out, "Output directory (overrides PHLAB_OUT and the config)");
  run_cmd->add_option("--workers", workers, "Worker threads (overrides PHLAB_WORKERS and the config)")
      ->check(CLI::Range(1, 1024));

  std::string manifest;
  bool keep = false;
  std::optional<int> rworkers;
  auto* rep_cmd = app.add_subcommand("reproduce", "Rerun a manifest's config and compare output digests");
  rep_cmd->add_option("manifest", manifest, "manifest.json of a previous run")->required();
  rep_cmd->add_option("--workers", rworkers, "Worker threads for the rerun")->check(CLI::Range(1, 1024));
  rep_cmd->add_flag("--keep", keep, "Keep the rerun directory");

  std::string run_dir, kind;
  PlotOptions popt;
  auto* plot_cmd = app.add_subcommand("plotdata", "Write a long-format (series, x, y) table for a finished run");
  plot_cmd->add_option("run_dir", run_dir, "Run directory")->required();
  plot_cmd->add_option("--kind", kind, "theta_marginal | holonomy | exponent_histogram | recurrence")->required();
  plot_cmd->add_option("--cluster", popt.cluster, "Cluster for theta_marginal")->check(CLI::NonNegativeNumber);
  plot_cmd->add_option("--series", popt.series, "Map name for holonomy");
  plot_cmd->add_option("--bins", popt.bins, "Bins for exponent_histogram")->check(CLI::Range(1, 100000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  try {
    if (*run_cmd)
      return cmd_run(config, seed, out, workers);
    if (*rep_cmd)
      return cmd_reproduce(manifest, rworkers, keep);
    auto rec = plotdata(run_dir, kind, popt);
    std::cout << (fs::path(run_dir) / rec.path).string() << "\n";
    return exit_ok;
  } catch (const phlab::ConfigError& e) {
    std::cerr << "phlab: config error: " << e.what() << "\n";
    return exit_config;
  } catch (const phlab::NumericError& e) {
    std::cerr << "phlab: numeric failure: " << e.what() << "\n";
    return exit_numeric;
  } catch (const std::exception& e) {
    std::cerr << "phlab: " << e.what() << "\n";
    return exit_internal;
  }
}
