#pragma once

// One reader and one runner per experiment kind. Readers validate and fill
// defaults; runners compute through the library modules, write CSV tables
// into the run directory and return the JSON summary.

#include <phlab/harness/io.hpp>

#include <phlab/ergodic_stats.hpp>
#include <phlab/foliation.hpp>
#include <phlab/leafspace.hpp>
#include <phlab/ustates.hpp>

#include <functional>
#include <map>
#include <regex>

namespace phlab::harness {

/// `dry` runs stop once the params are read and validated; parsing uses
/// this to resolve defaults without computing anything.
struct RunContext {
  const ExperimentConfig& cfg;
  OutputSet* out = nullptr;
  int workers = 1;
  bool dry = false;
  json resolved = json::object();
};

inline bool params_done(RunContext& ctx, Reader& r)
{
  r.finish();
  ctx.resolved = r.resolved();
  return ctx.dry;
}

inline std::string checked_label(Reader& r, const std::string& key, const std::string& fallback)
{
  std::string s = r.get<std::string>(key, fallback);
  static const std::regex ok("[A-Za-z0-9_.-]+");
  if (!std::regex_match(s, ok))
    throw ConfigError(r.where(key) + " may only contain letters, digits, '_', '-' and '.'");
  return s;
}

inline std::vector<BasePoint> read_points(Reader& r, const std::string& key, std::vector<std::array<double, 2>> fallback)
{
  auto raw = r.get<std::vector<std::array<double, 2>>>(key, fallback);
  if (raw.empty())
    throw ConfigError(r.where(key) + " must not be empty");
  std::vector<BasePoint> pts;
  for (auto p : raw) {
    if (!(p[0] >= 0.0 && p[0] < 1.0 && p[1] >= 0.0 && p[1] < 1.0))
      throw ConfigError(r.where(key) + " coordinates must lie in [0,1)");
    pts.push_back({p[0], p[1]});
  }
  return pts;
}

/// u-disk block of a params object: anchor, theta, length, samples, profile.
inline UDisk read_disk(Reader& r, const AnosovBase& base, int default_samples)
{
  BasePoint anchor = read_point(r, "anchor", {0.2, 0.3});
  double theta = r.number("theta", 0.3, 0.0, 1.0);
  double length = r.number("length", 0.1, 1e-9, 10.0);
  int samples = static_cast<int>(r.integer("samples", default_samples, 1, 10000000));
  auto profile = r.get<std::vector<double>>("theta_profile", {});
  UDisk d = make_udisk(base, {anchor, theta}, length, samples);
  d.theta_profile = profile;
  validate_udisk(d, base);
  return d;
}

inline json estimate_json(const ExponentEstimate& e)
{
  return {{"mean", num(e.mean)}, {"std_error", num(e.std_error)}, {"n_orbits", e.n_orbits}, {"n_steps", e.n_steps}};
}

// ---------------------------------------------------------------------------
// census

struct CensusConfig {
  CensusParams prm;
  int modes = 3;
  int partition = 2;
  double zero_tol = 1e-3;
};

inline CensusConfig read_census(Reader& r, std::array<int, 3> default_grid = {20, 20, 20}, long default_n = 100000)
{
  CensusConfig c;
  c.prm.grid = read_dims(r, "grid", default_grid);
  c.prm.n = r.integer("n", default_n, 2, 100000000);
  c.prm.burn_in = r.integer("burn_in", 1000, 0, 100000000);
  c.prm.merge_tol = r.number("merge_tol", 0.05, 1e-12, 10.0);
  c.prm.hist_dims = read_dims(r, "hist_dims", {8, 8, 64});
  c.prm.representatives = static_cast<int>(r.integer("representatives", 4, 1, 1000));
  c.modes = static_cast<int>(r.integer("signature_modes", 3, 1, 8));
  c.partition = static_cast<int>(r.integer("signature_partition", 2, 2, 64));
  c.zero_tol = r.number("zero_tol", 1e-3, 0.0, 1.0);
  return c;
}

inline ObservableSet census_observables(const CensusConfig& c)
{
  int p = c.partition;
  return ObservableSet::signature(c.modes, p, {{0, 0}, {p - 1, p - 1}});
}

inline json run_census(RunContext& ctx)
{
  Reader r(ctx.cfg.params, "params");
  CensusConfig c = read_census(r);
  c.prm.seed = ctx.cfg.seed;
  c.prm.workers = ctx.workers;
  SystemSpec sys = build_system(ctx.cfg.system);
  auto obs = census_observables(c);
  if (params_done(ctx, r))
    return {};
  MeasureCensus census = physical_measure_census(sys, obs, c.prm);

  std::vector<std::string> head{"orbit", "u", "v", "theta", "exponent", "drift", "cluster"};
  for (const auto& o : obs.items())
    head.push_back(o.name);
  CsvTable orbits(head);
  for (std::size_t i = 0; i < census.orbits.size(); ++i) {
    const auto& o = census.orbits[i];
    std::vector<Cell> row{static_cast<long>(i), o.start.base.u, o.start.base.v, o.start.theta,
                          o.exponent,           o.drift,        static_cast<long>(o.cluster)};
    for (double s : o.signature)
      row.push_back(s);
    orbits.row(std::move(row));
  }
  ctx.out->csv("orbits.csv", orbits);

  std::vector<std::string> chead{"cluster", "members", "basin_fraction", "exponent_mean", "exponent_std_error"};
  for (const auto& o : obs.items())
    chead.push_back("centroid_" + o.name);
  CsvTable clusters(chead);
  CsvTable marg({"cluster", "bin", "theta", "mass"});
  json cl = json::array();
  for (std::size_t k = 0; k < census.clusters.size(); ++k) {
    const auto& c0 = census.clusters[k];
    std::vector<Cell> row{static_cast<long>(k), c0.members, c0.basin_fraction, c0.exponent.mean,
                          c0.exponent.std_error};
    for (double x : c0.centroid)
      row.push_back(x);
    clusters.row(std::move(row));
    auto th = c0.representative.theta_marginal();
    for (std::size_t b = 0; b < th.size(); ++b)
      marg.row({static_cast<long>(k), static_cast<long>(b), (static_cast<double>(b) + 0.5) / th.size(), th[b]});
    cl.push_back({{"members", c0.members},
                  {"basin_fraction", num(c0.basin_fraction)},
                  {"exponent", estimate_json(c0.exponent)}});
  }
  ctx.out->csv("clusters.csv", clusters);
  ctx.out->csv("theta_marginal.csv", marg);

  double max_overlap = 0.0;
  for (std::size_t a = 0; a < census.clusters.size(); ++a)
    for (std::size_t b = a + 1; b < census.clusters.size(); ++b)
      max_overlap = std::max(max_overlap, theta_overlap(census.clusters[a], census.clusters[b]));
  json s{{"cluster_count", census.clusters.size()},
         {"clusters", cl},
         {"unassigned_fraction", num(census.unassigned_fraction)},
         {"min_centroid_separation", num(census.min_centroid_separation)},
         {"max_theta_overlap", num(max_overlap)},
         {"n_orbits", census.orbits.size()}};
  if (!census.clusters.empty()) {
    Regime reg = classify_regime(census, c.zero_tol);
    s["regime"] = to_string(reg.kind);
  } else {
    s["regime"] = nullptr;
  }
  return s;
}

// ---------------------------------------------------------------------------
// lyapunov

inline json run_lyapunov(RunContext& ctx)
{
  Reader r(ctx.cfg.params, "params");
  long n_orbits = r.integer("n_orbits", 1000, 2, 100000000);
  long n_steps = r.integer("n_steps", 10000, 1, 100000000);
  Sampler smp;
  smp.burn_in = r.integer("burn_in", 0, 0, 100000000);
  long mc_samples = r.integer("mostly_contracting_samples", 0, 0, 10000000);
  long mc_steps = r.integer("mostly_contracting_steps", 10000, 1, 100000000);
  Reader dr = r.child("disk");
  SystemSpec sys = build_system(ctx.cfg.system);
  UDisk disk = read_disk(dr, sys.base, 1000);
  dr.finish();
  r.store("disk", dr.resolved());

  if (params_done(ctx, r))
    return {};
  auto e = center_lyapunov_measure(sys, smp, n_orbits, n_steps, ctx.cfg.seed, ctx.workers);
  CsvTable t({"orbit", "exponent"});
  double max_abs = 0.0;
  for (std::size_t i = 0; i < e.per_orbit.size(); ++i) {
    t.row({static_cast<long>(i), e.per_orbit[i]});
    max_abs = std::max(max_abs, std::fabs(e.per_orbit[i]));
  }
  ctx.out->csv("exponents.csv", t);
  json s{{"exponent", estimate_json(e)}, {"max_abs_orbit_exponent", num(max_abs)}};
  if (mc_samples > 0) {
    auto mc = mostly_contracting_test(sys, disk, static_cast<int>(mc_samples), mc_steps,
                                      stream_seed(ctx.cfg.seed, "mostly_contracting", 0), ctx.workers);
    CsvTable m({"sample", "exponent"});
    for (std::size_t i = 0; i < mc.exponents.per_orbit.size(); ++i)
      m.row({static_cast<long>(i), mc.exponents.per_orbit[i]});
    ctx.out->csv("disk_exponents.csv", m);
    s["mostly_contracting"] = {
        {"fraction", num(mc.fraction)}, {"threshold", num(mc.threshold)}, {"exponent", estimate_json(mc.exponents)}};
  }
  return s;
}

// ---------------------------------------------------------------------------
// hyperbolic_times

inline json run_hyperbolic_times(RunContext& ctx)
{
  Reader r(ctx.cfg.params, "params");
  double c2 = r.number("c2", 0.3, 1e-12, 100.0);
  int l = static_cast<int>(r.integer("l", 1, 1, 1000000));
  long n = r.integer("n", 100000, 1, 100000000);
  long n_orbits = r.integer("n_orbits", 100, 1, 1000000);
  double min_density = r.number("min_density", 0.3, 0.0, 1.0);
  SystemSpec sys = build_system(ctx.cfg.system);

  if (params_done(ctx, r))
    return {};
  struct Row {
    PhasePoint p;
    long times = 0;
    double density = 0.0;
    long checked = 0;
    long violations = 0;
  };
  std::vector<Row> rows(static_cast<std::size_t>(n_orbits));
  parallel_for(rows.size(), ctx.workers, [&](std::size_t i) {
    Stream rng(ctx.cfg.seed, "hyperbolic_times", i);
    double u = rng.uniform(), v = rng.uniform(), t = rng.uniform();
    Row& row = rows[i];
    row.p = PhasePoint::reduced(u, v, t);
    auto rec = hyperbolic_times(sys, row.p, c2, l, n);
    auto chk = verify_contraction_at_hyperbolic_times(rec, sys);
    row.times = static_cast<long>(rec.times.size());
    row.density = rec.density;
    row.checked = chk.checked;
    row.violations = static_cast<long>(chk.violations.size());
  });
  CsvTable t({"orbit", "u", "v", "theta", "times", "density", "checked", "violations"});
  long dense = 0, violations = 0, checked = 0;
  double lo = INFINITY;
  std::vector<double> dens;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& w = rows[i];
    t.row({static_cast<long>(i), w.p.base.u, w.p.base.v, w.p.theta, w.times, w.density, w.checked, w.violations});
    dense += w.density >= min_density ? 1 : 0;
    violations += w.violations;
    checked += w.checked;
    lo = std::min(lo, w.density);
    dens.push_back(w.density);
  }
  ctx.out->csv("hyperbolic_times.csv", t);
  return {{"fraction_dense", num(static_cast<double>(dense) / static_cast<double>(n_orbits))},
          {"min_density", num(lo)},
          {"mean_density", num(compensated_total(dens) / static_cast<double>(n_orbits))},
          {"checked", checked},
          {"violations", violations}};
}

// ---------------------------------------------------------------------------
// ustate

inline json run_ustate(RunContext& ctx)
{
  Reader r(ctx.cfg.params, "params");
  SystemSpec sys = build_system(ctx.cfg.system);
  Reader dr = r.child("disk");
  UDisk disk = read_disk(dr, sys.base, 1000);
  dr.finish();
  r.store("disk", dr.resolved());
  long n = r.integer("n", 1000, 1, 100000000);
  GridDims dims = read_dims(r, "dims", {64, 64, 10});
  auto iters = r.get<std::vector<long>>("density_iterations", {});
  Reader wr = r.child("density_window");
  BaseWindow win{read_point(wr, "center", {0.5, 0.5}), wr.number("half_width", 0.5, 1e-6, 0.5)};
  wr.finish();
  r.store("density_window", wr.resolved());
  Reader ddr = r.child("density_disk");
  UDisk ddisk = read_disk(ddr, sys.base, 100000);
  ddr.finish();
  r.store("density_disk", ddr.resolved());
  for (long it : iters)
    if (it < 0)
      throw ConfigError("params.density_iterations must be >= 0");

  if (params_done(ctx, r))
    return {};
  auto m = cesaro_ustate(sys, disk, n, dims, ctx.cfg.seed, ctx.workers);
  auto bm = m.base_marginal();
  auto th = m.theta_marginal();
  CsvTable base({"i", "j", "mass"});
  for (int i = 0; i < dims[0]; ++i)
    for (int j = 0; j < dims[1]; ++j)
      base.row({static_cast<long>(i), static_cast<long>(j), bm[static_cast<std::size_t>(i) * dims[1] + j]});
  ctx.out->csv("base_marginal.csv", base);
  CsvTable marg({"cluster", "bin", "theta", "mass"});
  for (std::size_t b = 0; b < th.size(); ++b)
    marg.row({0L, static_cast<long>(b), (static_cast<double>(b) + 0.5) / th.size(), th[b]});
  ctx.out->csv("theta_marginal.csv", marg);

  json s{{"tv_base_to_uniform", num(total_variation_to_uniform(bm))}, {"total_mass", num(m.total())}};
  json dj = json::array();
  CsvTable dt({"iterations", "ratio", "in_window"});
  double lo = INFINITY, hi = 0.0;
  for (long it : iters) {
    auto d = unstable_density_ratio(sys, ddisk, it, win, ctx.workers);
    dt.row({it, d.ratio, d.in_window});
    dj.push_back({{"iterations", it}, {"ratio", num(d.ratio)}, {"in_window", d.in_window}});
    lo = std::min(lo, d.ratio);
    hi = std::max(hi, d.ratio);
    ctx.out->csv("density_ratio.csv", dt);
  }
  s["density_ratios"] = dj;
  if (!iters.empty()) {
    s["max_density_ratio"] = num(hi);
    s["density_resolution_factor"] = num(hi / lo);
  }
  return s;
}

// ---------------------------------------------------------------------------
// holonomy

inline json run_holonomy(RunContext& ctx)
{
  Reader r(ctx.cfg.params, "params");
  auto pts = read_points(r, "points", {{0.0, 0.0}});
  double offset = r.number("offset", 0.01, -0.2, 0.2);
  auto dirs = r.get<std::vector<std::string>>("directions", {"stable", "unstable"});
  HolonomyOptions opt;
  opt.grid = static_cast<int>(r.integer("grid", 1024, 2, 1 << 20));
  opt.tol = r.number("tol", 1e-9, 1e-16, 1.0);
  opt.n_max = static_cast<int>(r.integer("n_max", 200, 1, 100000));
  int skip = static_cast<int>(r.integer("gap_skip", 5, 0, 1000));
  int bins = static_cast<int>(r.integer("singularity_bins", 512, 2, 1 << 20));
  bool equivariance = r.get<bool>("equivariance", true);
  for (const auto& d : dirs)
    if (d != "stable" && d != "unstable")
      throw ConfigError("params.directions entries must be 'stable' or 'unstable'");
  if (dirs.empty())
    throw ConfigError("params.directions must not be empty");
  SystemSpec sys = build_system(ctx.cfg.system);
  require_skew(sys);
  if (params_done(ctx, r))
    return {};

  const double bound = sys.base.lambda_s + 0.05;
  CsvTable maps({"map", "theta", "image"});
  CsvTable gaps({"map", "n", "gap"});
  json per = json::array();
  double worst_ratio = 0.0, worst_self = 0.0, worst_eq = 0.0, min_entropy = INFINITY;
  bool all_monotone = true;
  auto grid = uniform_grid(opt.grid);
  for (std::size_t p = 0; p < pts.size(); ++p)
    for (const auto& d : dirs) {
      std::string name = d + "_" + std::to_string(p);
      bool st = d == "stable";
      HolonomyMap h = st ? stable_holonomy_offset(sys, pts[p], offset, opt)
                         : unstable_holonomy_offset(sys, pts[p], offset, opt);
      for (std::size_t i = 0; i < h.theta.size(); ++i)
        maps.row({name, h.theta[i], h.image[i]});
      for (std::size_t i = 0; i < h.gap_history.size(); ++i)
        gaps.row({name, static_cast<long>(i + 1), h.gap_history[i]});
      ctx.out->csv("maps.csv", maps);
      ctx.out->csv("gaps.csv", gaps);

      auto self = st ? stable_holonomy_values(sys, pts[p], 0.0, grid, opt.tol, opt.n_max)
                     : unstable_holonomy_values(sys, pts[p], 0.0, grid, opt.tol, opt.n_max);
      double self_err = max_abs_diff(self.image, grid);
      double eq = 0.0;
      if (equivariance)
        eq = st ? stable_equivariance_residual(sys, pts[p], offset, grid, opt.tol, opt.n_max)
                : unstable_equivariance_residual(sys, pts[p], offset, grid, opt.tol, opt.n_max);
      auto rep = holonomy_singularity_report(h, bins);
      double ratio = worst_gap_ratio(h.gap_history, skip);
      worst_ratio = std::max(worst_ratio, ratio);
      worst_self = std::max(worst_self, self_err);
      worst_eq = std::max(worst_eq, eq);
      min_entropy = std::min(min_entropy, rep.normalized_entropy);
      all_monotone = all_monotone && h.monotone();
      per.push_back({{"map", name},
                     {"direction", d},
                     {"point", {pts[p].u, pts[p].v}},
                     {"n_used", h.n_used},
                     {"cauchy_gap", num(h.cauchy_gap)},
                     {"worst_gap_ratio", num(ratio)},
                     {"monotone", h.monotone()},
                     {"self_holonomy_error", num(self_err)},
                     {"equivariance_residual", num(eq)},
                     {"normalized_entropy", num(rep.normalized_entropy)},
                     {"jacobian_min", num(rep.jacobian_min)},
                     {"jacobian_max", num(rep.jacobian_max)}});
    }
  return {{"maps", per},
          {"all_converged", true},
          {"all_monotone", all_monotone},
          {"max_worst_gap_ratio", num(worst_ratio)},
          {"gap_ratio_bound", num(bound)},
          {"max_self_holonomy_error", num(worst_self)},
          {"max_equivariance_residual", num(worst_eq)},
          {"min_normalized_entropy", num(min_entropy)}};
}

// ---------------------------------------------------------------------------
// loop

inline json run_loop(RunContext& ctx)
{
  Reader r(ctx.cfg.params, "params");
  BasePoint x = read_point(r, "point", {0.0, 0.0});
  auto legs = r.get<std::vector<double>>("legs", {0.1, 0.05});
  auto grids = r.get<std::vector<int>>("grids", {1024, 512});
  auto tols = r.get<std::vector<double>>("tols", {1e-9, 1e-8});
  int n_max = static_cast<int>(r.integer("n_max", 200, 1, 100000));
  if (legs.empty() || grids.empty() || tols.empty())
    throw ConfigError("params.legs, grids and tols must not be empty");
  for (double l : legs)
    if (!(std::fabs(l) > 0.0 && std::fabs(l) < 0.25))
      throw ConfigError("params.legs entries must satisfy 0 < |leg| < 0.25");
  for (int g : grids)
    if (g < 2)
      throw ConfigError("params.grids entries must be >= 2");
  for (double t : tols)
    if (!(t > 0.0))
      throw ConfigError("params.tols entries must be positive");
  SystemSpec sys = build_system(ctx.cfg.system);

  if (params_done(ctx, r))
    return {};
  CsvTable t({"leg", "grid", "tol", "displacement", "n_leg1", "n_leg2", "n_leg3", "n_leg4"});
  std::vector<double> ref(legs.size());
  double spread = 0.0;
  for (std::size_t li = 0; li < legs.size(); ++li)
    for (std::size_t gi = 0; gi < grids.size(); ++gi)
      for (std::size_t ti = 0; ti < tols.size(); ++ti) {
        bool is_ref = gi == 0 && ti == 0;
        if (!is_ref && gi != 0 && ti != 0)
          continue; // vary one setting at a time
        HolonomyOptions o{grids[gi], tols[ti], n_max};
        auto lh = su_loop_holonomy(sys, x, legs[li], o);
        t.row({legs[li], static_cast<long>(grids[gi]), tols[ti], lh.displacement, static_cast<long>(lh.legs_used[0]),
               static_cast<long>(lh.legs_used[1]), static_cast<long>(lh.legs_used[2]),
               static_cast<long>(lh.legs_used[3])});
        ctx.out->csv("loop.csv", t);
        if (is_ref) {
          ref[li] = lh.displacement;
          if (li == 0) {
            CsvTable m({"map", "theta", "image"});
            for (std::size_t i = 0; i < lh.map.theta.size(); ++i)
              m.row({std::string("loop"), lh.map.theta[i], lh.map.image[i]});
            ctx.out->csv("maps.csv", m);
          }
        } else if (li == 0 && ref[0] > 0.0) {
          spread = std::max(spread, std::fabs(lh.displacement - ref[0]) / ref[0]);
        }
      }
  json s{{"displacement", num(ref[0])},
         {"leg", legs[0]},
         {"displacements", ref},
         {"relative_spread", num(spread)}};
  if (legs.size() > 1)
    s["displacement_ratio"] = ref[1] > 0.0 ? num(ref[0] / ref[1]) : json(nullptr);
  return s;
}

// ---------------------------------------------------------------------------
// cylinder

inline json run_cylinder(RunContext& ctx)
{
  Reader r(ctx.cfg.params, "params");
  int bins = static_cast<int>(r.integer("bins", 512, 2, 1 << 20));
  int depth = static_cast<int>(r.integer("depth", 64, 1, 10000));
  double tol = r.number("tol", 1e-12, 1e-16, 1.0);
  int k_min = static_cast<int>(r.integer("drift_k_min", 10, 1, 1000));
  int k_max = static_cast<int>(r.integer("drift_k_max", 30, 2, 1000));
  if (k_max <= k_min)
    throw ConfigError("params.drift_k_max must exceed params.drift_k_min");
  CylinderSystem cyl = build_cylinder(ctx.cfg.system);

  if (params_done(ctx, r))
    return {};
  HolonomyMap h = cylinder_center_holonomy(cyl, bins, depth, tol);
  CsvTable m({"map", "theta", "image"});
  double id_err = 0.0;
  for (std::size_t i = 0; i < h.theta.size(); ++i) {
    m.row({std::string("cylinder"), h.theta[i], h.image[i]});
    id_err = std::max(id_err, std::fabs(h.image[i] - h.theta[i]));
  }
  ctx.out->csv("maps.csv", m);
  auto rep = holonomy_singularity_report(h, bins);
  CsvTable mass({"bin", "mass"});
  for (std::size_t i = 0; i < rep.masses.size(); ++i)
    mass.row({static_cast<long>(i), rep.masses[i]});
  ctx.out->csv("masses.csv", mass);
  auto drift = fixed_point_jacobian_drift(cyl, k_min, k_max);
  CsvTable dt({"depth", "log_jacobian"});
  for (std::size_t i = 0; i < drift.depths.size(); ++i)
    dt.row({static_cast<long>(drift.depths[i]), drift.log_jacobian[i]});
  ctx.out->csv("drift.csv", dt);
  double d = cyl.base_degree;
  return {{"n_used", h.n_used},
          {"cauchy_gap", num(h.cauchy_gap)},
          {"identity_error", num(id_err)},
          {"normalized_entropy", num(rep.normalized_entropy)},
          {"max_bin_mass", num(rep.max_bin_mass)},
          {"jacobian_min", num(rep.jacobian_min)},
          {"jacobian_max", num(rep.jacobian_max)},
          {"conjugacy_residual", num(cylinder_conjugacy_residual(cyl, h))},
          {"drift_slope", num(drift.slope)},
          {"drift_target", num(std::log((d + two_pi * cyl.eps) / d))}};
}

// ---------------------------------------------------------------------------
// atomicity

inline json run_atomicity(RunContext& ctx)
{
  Reader r(ctx.cfg.params, "params");
  BasePoint x = read_point(r, "point", {0.3, 0.1});
  long n = r.integer("n", 200, 1, 100000000);
  int m = static_cast<int>(r.integer("samples", 200, 1, 10000000));
  double radius = r.number("cluster_radius", 1e-6, 1e-300, 1.0);
  SystemSpec sys = build_system(ctx.cfg.system);
  if (params_done(ctx, r))
    return {};
  auto rep = atomicity_test(sys, x, n, m, radius);
  CsvTable t({"step", "span"});
  for (std::size_t i = 0; i < rep.span_history.size(); ++i)
    t.row({static_cast<long>(i), rep.span_history[i]});
  ctx.out->csv("span.csv", t);
  return {{"cluster_count", rep.cluster_count},
          {"samples", m},
          {"max_cluster_diameter", num(rep.max_cluster_diameter)},
          {"decay_rate", num(rep.decay_rate)},
          {"span_drift", num(rep.span_drift)},
          {"final_span", num(rep.span_history.back())}};
}

// ---------------------------------------------------------------------------
// recurrence

inline json run_recurrence(RunContext& ctx)
{
  Reader r(ctx.cfg.params, "params");
  SystemSpec sys = build_system(ctx.cfg.system);
  Reader dr = r.child("disk");
  UDisk disk = read_disk(dr, sys.base, 1000);
  dr.finish();
  r.store("disk", dr.resolved());
  long horizon = r.integer("horizon", 200, 0, 100000000);
  double threshold = r.number("threshold", 0.01, 0.0, 1.0);
  long tail = r.integer("tail_start", 100, 0, 100000000);
  json raw = r.get<json>("blocks", json::array({json{{"label", "attractor"}, {"theta_center", 0.5}},
                                                 json{{"label", "repeller"}, {"theta_center", 0.0}}}));
  if (!raw.is_array() || raw.empty())
    throw ConfigError("params.blocks must be a non-empty array");
  std::vector<CsBlock> blocks;
  json resolved = json::array();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Reader b(raw[i], "params.blocks[" + std::to_string(i) + "]");
    CsBlock blk;
    blk.label = checked_label(b, "label", "block" + std::to_string(i));
    blk.center = read_point(b, "center", {0.0, 0.0});
    blk.half_s = b.number("half_s", 0.1, 1e-9, 0.25);
    blk.half_u = b.number("half_u", 0.1, 1e-9, 0.25);
    blk.theta_center = b.number("theta_center", 0.5, 0.0, 1.0);
    blk.theta_half = b.number("theta_half", 0.1, 1e-9, 0.5);
    b.finish();
    validate_block(blk);
    blocks.push_back(blk);
    resolved.push_back(b.resolved());
  }
  r.store("blocks", resolved);
  if (params_done(ctx, r))
    return {};

  CsvTable t({"block", "t", "fraction"});
  json per = json::array();
  for (const auto& blk : blocks) {
    auto rec = block_recurrence(sys, disk, blk, horizon, ctx.cfg.seed, threshold, ctx.workers);
    double tail_max = 0.0;
    long first = -1;
    for (std::size_t k = 0; k < rec.fractions.size(); ++k) {
      t.row({blk.label, static_cast<long>(k), rec.fractions[k]});
      if (static_cast<long>(k) >= tail)
        tail_max = std::max(tail_max, rec.fractions[k]);
      if (first < 0 && k > 0 && rec.fractions[k] >= threshold)
        first = static_cast<long>(k);
    }
    ctx.out->csv("recurrence.csv", t);
    per.push_back({{"label", blk.label},
                   {"hits", rec.hits},
                   {"first_hit", first},
                   {"max_fraction_after_tail_start", num(tail_max)}});
  }
  return {{"blocks", per}, {"threshold", threshold}, {"horizon", horizon}, {"tail_start", tail}};
}

// ---------------------------------------------------------------------------
// stability

inline json run_stability(RunContext& ctx)
{
  Reader r(ctx.cfg.params, "params");
  double a0 = r.number("a_min", 0.3, 0.0, 0.999);
  double a1 = r.number("a_max", 0.7, 0.0, 0.999);
  int steps = static_cast<int>(r.integer("steps", 9, 1, 1000));
  double factor = r.number("displacement_factor", 5.0, 0.0, 1e6);
  CensusConfig c = read_census(r, {8, 8, 8}, 20000);
  c.prm.seed = ctx.cfg.seed;
  c.prm.workers = ctx.workers;
  const auto& sc = ctx.cfg.system;
  if (sc.catalog != "catmap" || sc.fiber != "morse_smale")
    throw ConfigError("stability sweeps the morse_smale family; set system.fiber.kind = morse_smale");
  if (a1 < a0)
    throw ConfigError("params.a_max must be >= params.a_min");
  AnosovBase base = make_anosov_base(sc.matrix);
  if (params_done(ctx, r))
    return {};
  auto sw = stability_sweep(base, sc.s, a0, a1, steps, census_observables(c), c.prm);
  CsvTable t({"a", "cluster_count", "cluster", "basin_fraction", "centroid_cos1"});
  json counts = json::array();
  for (const auto& row : sw.rows) {
    counts.push_back(row.cluster_count);
    for (std::size_t k = 0; k < row.centroids.size(); ++k)
      t.row({row.parameter, static_cast<long>(row.cluster_count), static_cast<long>(k), row.basin_fractions[k],
             row.centroids[k][0]});
  }
  ctx.out->csv("sweep.csv", t);
  return {{"cluster_counts", counts},
          {"count_constant", sw.count_constant},
          {"max_displacement", num(sw.max_displacement)},
          {"spacing", num(sw.spacing)},
          {"displacement_bound", num(factor * sw.spacing)}};
}

// ---------------------------------------------------------------------------
// leafspace

inline json run_leafspace(RunContext& ctx)
{
  Reader r(ctx.cfg.params, "params");
  auto periods = r.get<std::vector<int>>("periods", {1, 2, 3});
  int scan_max = static_cast<int>(r.integer("scan_max_period", 3, 0, 6));
  long bracket_pairs = r.integer("bracket_pairs", 1000, 0, 10000000);
  double bracket_radius = r.number("bracket_radius", 0.1, 0.0, 0.5);
  double delta = r.number("delta", 0.2, 1e-9, 0.5);
  long orbit_length = r.integer("orbit_length", 1000000, 1, 1000000000);
  int grid = static_cast<int>(r.integer("grid", 16, 1, 4096));
  BasePoint start = read_point(r, "orbit_start", {0.1234567, 0.7654321});
  int pairs = static_cast<int>(r.integer("contraction_pairs", 100, 1, 10000000));
  int steps = static_cast<int>(r.integer("contraction_steps", 10, 1, 1000));
  long dc_pairs = r.integer("dc_pairs", 20, 0, 100000);
  if (bracket_radius * std::sqrt(2.0) > delta)
    throw ConfigError("params.bracket_radius * sqrt(2) must not exceed params.delta");
  for (int n : periods)
    if (n < 1 || n > 12)
      throw ConfigError("params.periods entries must lie in [1, 12]");
  SystemSpec sys = build_system(ctx.cfg.system);
  const AnosovBase& base = sys.base;

  if (params_done(ctx, r))
    return {};
  CsvTable pts({"n", "u", "v", "num_u", "num_v", "den"});
  json counts = json::array();
  bool match = true;
  double closure = 0.0;
  for (int n : periods) {
    auto ex = periodic_base_points_exact(base, n);
    std::int64_t det = determinant(period_matrix(base, n));
    json row{{"n", n}, {"count", ex.size()}, {"abs_det", std::llabs(det)}};
    match = match && static_cast<std::int64_t>(ex.size()) == std::llabs(det);
    if (n <= scan_max) {
      auto scan = periodic_base_points_scan(base, n);
      row["scan_count"] = scan.size();
      row["scan_identical"] = scan == ex;
      match = match && scan == ex;
    }
    for (const auto& p : ex) {
      LeafPoint x = p.point();
      for (int k = 0; k < n; ++k)
        x = base.forward(x);
      closure = std::max(closure, torus_dist(x, p.point()));
      pts.row({static_cast<long>(n), p.point().u, p.point().v, static_cast<long>(p.num_u), static_cast<long>(p.num_v),
               static_cast<long>(p.den)});
    }
    counts.push_back(row);
  }
  ctx.out->csv("periodic.csv", pts);

  double res_s = 0.0, res_u = 0.0;
  for (long i = 0; i < bracket_pairs; ++i) {
    Stream rng(ctx.cfg.seed, "bracket", static_cast<std::uint64_t>(i));
    LeafPoint x{rng.uniform(), rng.uniform()};
    LeafPoint y = translate(x, {bracket_radius * (2 * rng.uniform() - 1), bracket_radius * (2 * rng.uniform() - 1)});
    LeafPoint z = bracket(base, x, y, delta);
    res_s = std::max(res_s, std::fabs(base.eigen_coords(torus_delta(x, z))[1]));
    res_u = std::max(res_u, std::fabs(base.eigen_coords(torus_delta(y, z))[0]));
  }
  double dc_err = 0.0;
  for (long i = 0; i < dc_pairs; ++i) {
    Stream rng(ctx.cfg.seed, "dc", static_cast<std::uint64_t>(i));
    LeafPoint a{rng.uniform(), rng.uniform()}, b{rng.uniform(), rng.uniform()};
    dc_err = std::max(dc_err, std::fabs(dc_distance(sys, a, b) - 2.0 * torus_dist(a, b)));
  }

  auto att = attractor_report(base, start, orbit_length, grid);
  CsvTable cells({"i", "j", "count"});
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j)
      cells.row({static_cast<long>(i), static_cast<long>(j),
                 att.cell_counts[static_cast<std::size_t>(i) * grid + static_cast<std::size_t>(j)]});
  ctx.out->csv("attractor_cells.csv", cells);
  double rate = stable_contraction_rate(base, pairs, steps, ctx.cfg.seed);

  return {{"periodic", counts},
          {"counts_match", match},
          {"max_closure_error", num(closure)},
          {"bracket_stable_residual", num(res_s)},
          {"bracket_unstable_residual", num(res_u)},
          {"dc_twice_base_error", num(dc_err)},
          {"contraction_rate", num(rate)},
          {"lambda_s", num(base.lambda_s)},
          {"attractor",
           {{"attractor_count", att.attractor_count},
            {"whole_leaf_space", att.whole_leaf_space},
            {"cells_visited", att.cells_visited},
            {"cells", grid * grid},
            {"max_relative_deviation", num(att.max_relative_deviation)},
            {"deviation_bound", num(att.deviation_bound)},
            {"chi_square", num(att.chi_square)},
            {"equidistributed", att.equidistributed}}}};
}

// ---------------------------------------------------------------------------

using Runner = std::function<json(RunContext&)>;

inline const std::map<std::string, Runner>& runners()
{
  static const std::map<std::string, Runner> table{
      {"census", run_census},       {"lyapunov", run_lyapunov},   {"hyperbolic_times", run_hyperbolic_times},
      {"ustate", run_ustate},       {"holonomy", run_holonomy},   {"loop", run_loop},
      {"cylinder", run_cylinder},   {"atomicity", run_atomicity}, {"recurrence", run_recurrence},
      {"stability", run_stability}, {"leafspace", run_leafspace}};
  return table;
}

} // namespace phlab::harness
