// Acceptance suite: one PASS/FAIL line per criterion. Every experiment goes
// through the harness, so the same configs feed the determinism check.
//
// usage: acceptance [run-root]   (default: ./acceptance_runs)

#include <phlab/phlab.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace phlab::harness;

namespace {

// Pinned tolerances.
constexpr double exact_zero_tol = 1e-12;
constexpr double statistical_zero_tol = 1e-3;
constexpr double runtime_c1_s = 30.0;
constexpr double runtime_c2_s = 120.0;
constexpr double ln_half = -0.69314718055994531;
constexpr double exponent_tol = 0.01;
constexpr double basin_min = 0.99;
constexpr double mc_fraction_min = 0.99;
constexpr double half_basin_tol = 0.05;
constexpr double overlap_max = 0.01;
constexpr double displacement_factor = 5.0;
constexpr double gap_ratio_margin = 0.05;
constexpr double self_holonomy_tol = 1e-9;
constexpr double equivariance_tol = 5e-9;
constexpr double product_loop_tol = 1e-9;
constexpr double loop_spread_max = 0.10;
constexpr double loop_ratio_lo = 3.0, loop_ratio_hi = 5.0;
constexpr double identity_entropy_tol = 1e-6;
constexpr double singular_entropy_max = 0.9;
constexpr double conjugacy_residual_max = 1e-6;
constexpr double drift_rel_tol = 0.20;
constexpr double decay_tol = 0.05;
constexpr double rotation_drift_max = 1e-9;
constexpr double dense_fraction_min = 0.99;
constexpr double tv_max = 0.05;
constexpr double linear_density_max = 1.1;
constexpr double density_factor_max = 2.0;
constexpr long recurrence_hits_min = 20;
constexpr double repeller_mass_max = 0.01;
constexpr double bracket_tol = 1e-12;
constexpr double contraction_tol = 0.01;

json catmap(json fiber) { return {{"catalog", "catmap"}, {"fiber", std::move(fiber)}}; }
json identity() { return catmap({{"kind", "identity"}}); }
json rotation() { return catmap({{"kind", "rotation"}}); }
json ms(double a, int s) { return catmap({{"kind", "morse_smale"}, {"a", a}, {"s", s}}); }
json coupled() { return catmap({{"kind", "coupled"}, {"a", 0.3}, {"b", 0.2}, {"phase", "u"}}); }
json cylinder(double eps) { return {{"catalog", "cylinder"}, {"c", 0.2}, {"eps", eps}, {"degree", 2}}; }

json config(const std::string& kind, json system, json params, std::uint64_t seed = 1)
{
  return {{"kind", kind}, {"seed", seed}, {"system", std::move(system)}, {"params", std::move(params)}};
}

double num_of(const json& j)
{
  if (j.is_string()) {
    std::string s = j;
    return s == "inf" ? INFINITY : s == "-inf" ? -INFINITY : NAN;
  }
  return j.get<double>();
}

std::string fmt(double x)
{
  std::ostringstream s;
  s << std::setprecision(6) << x;
  return s.str();
}

struct Run {
  json manifest;
  json summary;
  double seconds = 0.0;
  bool ok = false;
};

class Checks {
public:
  void expect(bool ok, const std::string& what)
  {
    pass_ = pass_ && ok;
    notes_.push_back((ok ? "" : "[x] ") + what);
  }
  bool pass() const { return pass_; }
  std::string text() const
  {
    std::string s;
    for (const auto& n : notes_)
      s += (s.empty() ? "" : "; ") + n;
    return s;
  }

private:
  bool pass_ = true;
  std::vector<std::string> notes_;
};

struct Criterion {
  int id;
  std::string title;
  std::vector<json> configs;
  std::function<void(const std::vector<Run>&, Checks&)> evaluate;
};

std::vector<Criterion> criteria()
{
  std::vector<Criterion> cs;

  cs.push_back({1,
                "zero center exponent for identity and golden rotation fibers",
                {config("lyapunov", identity(), {{"n_orbits", 1000}, {"n_steps", 10000}}),
                 config("lyapunov", rotation(), {{"n_orbits", 1000}, {"n_steps", 10000}}),
                 config("census", rotation(), {{"grid", {6, 6, 6}}, {"n", 10000}, {"burn_in", 1000}})},
                [](const std::vector<Run>& r, Checks& c) {
                  double e0 = num_of(r[0].summary["exponent"]["mean"]);
                  double e1 = num_of(r[1].summary["exponent"]["mean"]);
                  c.expect(std::fabs(e0) < exact_zero_tol, "identity |mean| = " + fmt(std::fabs(e0)) + " < 1e-12");
                  c.expect(std::fabs(e1) < statistical_zero_tol, "rotation |mean| = " + fmt(std::fabs(e1)) + " < 1e-3");
                  std::string regime = r[2].summary["regime"].is_string() ? r[2].summary["regime"].get<std::string>() : "none";
                  c.expect(regime == "RotationLike", "regime " + regime);
                  double t = r[0].seconds + r[1].seconds + r[2].seconds;
                  c.expect(t < runtime_c1_s, "runtime " + fmt(t) + " s < 30 s");
                }});

  cs.push_back({2,
                "mostly contracting product has one physical measure",
                {config("census", ms(0.5, 2), {{"grid", {20, 20, 20}}, {"n", 100000}, {"burn_in", 1000}}),
                 config("lyapunov", ms(0.5, 2),
                        {{"n_orbits", 100},
                         {"n_steps", 1000},
                         {"mostly_contracting_samples", 1000},
                         {"mostly_contracting_steps", 10000}})},
                [](const std::vector<Run>& r, Checks& c) {
                  const json& s = r[0].summary;
                  c.expect(s["cluster_count"] == 1, "clusters " + s["cluster_count"].dump());
                  if (s["cluster_count"] == 1) {
                    double b = num_of(s["clusters"][0]["basin_fraction"]);
                    double e = num_of(s["clusters"][0]["exponent"]["mean"]);
                    c.expect(b >= basin_min, "basin " + fmt(b) + " >= 0.99");
                    c.expect(std::fabs(e - ln_half) <= exponent_tol, "exponent " + fmt(e) + " = ln 0.5 +- 0.01");
                  }
                  double f = num_of(r[1].summary["mostly_contracting"]["fraction"]);
                  c.expect(f >= mc_fraction_min, "mostly contracting fraction " + fmt(f) + " >= 0.99");
                  c.expect(r[0].seconds < runtime_c2_s, "census runtime " + fmt(r[0].seconds) + " s < 120 s");
                }});

  cs.push_back({3,
                "s = 4 gives s/2 = 2 physical measures",
                {config("census", ms(0.5, 4), {{"grid", {20, 20, 20}}, {"n", 20000}, {"burn_in", 1000}})},
                [](const std::vector<Run>& r, Checks& c) {
                  const json& s = r[0].summary;
                  c.expect(s["cluster_count"] == 2, "clusters " + s["cluster_count"].dump());
                  for (const auto& cl : s["clusters"]) {
                    double b = num_of(cl["basin_fraction"]);
                    c.expect(std::fabs(b - 0.5) <= half_basin_tol, "basin " + fmt(b) + " = 0.5 +- 0.05");
                  }
                  double o = num_of(s["max_theta_overlap"]);
                  c.expect(o < overlap_max, "theta overlap " + fmt(o) + " < 0.01");
                }});

  cs.push_back({4,
                "cluster count and centroids stable over a in [0.3, 0.7]",
                {config("stability", ms(0.5, 2),
                        {{"a_min", 0.3}, {"a_max", 0.7}, {"steps", 9}, {"grid", {8, 8, 8}}, {"n", 20000}})},
                [](const std::vector<Run>& r, Checks& c) {
                  const json& s = r[0].summary;
                  bool all_one = s["cluster_counts"].size() == 9;
                  for (const auto& k : s["cluster_counts"])
                    all_one = all_one && k == 1;
                  c.expect(s["count_constant"].get<bool>() && all_one, "counts " + s["cluster_counts"].dump());
                  double d = num_of(s["max_displacement"]), h = num_of(s["spacing"]);
                  c.expect(d <= displacement_factor * h, "displacement " + fmt(d) + " <= 5 x " + fmt(h));
                }});

  cs.push_back({5,
                "holonomy convergence, self-holonomy and equivariance on the coupled system",
                {config("holonomy", coupled(),
                        {{"points", {{0.0, 0.0}, {0.3, 0.6}, {0.71, 0.18}}},
                         {"offset", 0.01},
                         {"grid", 1024},
                         {"tol", 1e-9}})},
                [](const std::vector<Run>& r, Checks& c) {
                  const json& s = r[0].summary;
                  c.expect(s["all_converged"].get<bool>(), "all " + std::to_string(s["maps"].size()) + " maps converged");
                  double g = num_of(s["max_worst_gap_ratio"]), bound = num_of(s["gap_ratio_bound"]);
                  c.expect(g <= bound, "worst gap ratio " + fmt(g) + " <= lambda_s + 0.05 = " + fmt(bound));
                  double self = num_of(s["max_self_holonomy_error"]);
                  c.expect(self <= self_holonomy_tol, "self-holonomy error " + fmt(self) + " <= 1e-9");
                  double eq = num_of(s["max_equivariance_residual"]);
                  c.expect(eq < equivariance_tol, "equivariance " + fmt(eq) + " < 5e-9");
                }});

  cs.push_back({6,
                "su-loop displacement: zero on products, resolved on the coupled system",
                {config("loop", identity(), {{"legs", {0.1}}, {"grids", {1024}}, {"tols", {1e-9}}}),
                 config("loop", rotation(), {{"legs", {0.1}}, {"grids", {1024}}, {"tols", {1e-9}}}),
                 config("loop", ms(0.5, 2), {{"legs", {0.1}}, {"grids", {1024}}, {"tols", {1e-9}}}),
                 config("loop", coupled(), {{"legs", {0.1, 0.05}}, {"grids", {1024, 512}}, {"tols", {1e-9, 1e-8}}})},
                [](const std::vector<Run>& r, Checks& c) {
                  for (int i = 0; i < 3; ++i) {
                    double d = num_of(r[i].summary["displacement"]);
                    c.expect(d < product_loop_tol, "product " + std::to_string(i) + " displacement " + fmt(d));
                  }
                  const json& s = r[3].summary;
                  double sp = num_of(s["relative_spread"]), q = num_of(s["displacement_ratio"]);
                  c.expect(sp <= loop_spread_max, "coupled spread " + fmt(sp) + " <= 10%");
                  c.expect(q >= loop_ratio_lo && q <= loop_ratio_hi, "leg ratio " + fmt(q) + " in [3,5]");
                }});

  cs.push_back({7,
                "cylinder conjugacy: identity at eps 0, singular at eps 0.05",
                {config("cylinder", cylinder(0.0), {{"bins", 512}}), config("cylinder", cylinder(0.05), {{"bins", 512}})},
                [](const std::vector<Run>& r, Checks& c) {
                  double h0 = num_of(r[0].summary["normalized_entropy"]);
                  c.expect(std::fabs(h0 - 1.0) <= identity_entropy_tol, "eps 0 entropy " + fmt(h0));
                  const json& s = r[1].summary;
                  double h = num_of(s["normalized_entropy"]);
                  c.expect(h < singular_entropy_max, "eps 0.05 entropy " + fmt(h) + " < 0.9");
                  double res = num_of(s["conjugacy_residual"]);
                  c.expect(res < conjugacy_residual_max, "residual " + fmt(res) + " < 1e-6");
                  double slope = num_of(s["drift_slope"]), target = num_of(s["drift_target"]);
                  c.expect(std::fabs(slope - target) <= drift_rel_tol * target,
                           "drift slope " + fmt(slope) + " vs " + fmt(target) + " +- 20%");
                }});

  cs.push_back({8,
                "fiber atomicity under contraction, rigid diameters under rotation",
                {config("atomicity", ms(0.5, 2), {{"point", {0.3, 0.1}}, {"n", 200}, {"samples", 200}}),
                 config("atomicity", rotation(), {{"point", {0.3, 0.1}}, {"n", 10000}, {"samples", 200}})},
                [](const std::vector<Run>& r, Checks& c) {
                  const json& a = r[0].summary;
                  c.expect(a["cluster_count"] == 1, "clusters " + a["cluster_count"].dump());
                  double rate = num_of(a["decay_rate"]);
                  c.expect(std::fabs(rate - ln_half) <= decay_tol, "decay rate " + fmt(rate) + " = ln 0.5 +- 0.05");
                  double drift = num_of(r[1].summary["span_drift"]);
                  c.expect(drift < rotation_drift_max, "rotation drift " + fmt(drift) + " < 1e-9");
                }});

  cs.push_back({9,
                "hyperbolic times are dense and verified",
                {config("hyperbolic_times", ms(0.5, 2), {{"c2", 0.3}, {"l", 1}, {"n", 100000}, {"n_orbits", 100}})},
                [](const std::vector<Run>& r, Checks& c) {
                  const json& s = r[0].summary;
                  double f = num_of(s["fraction_dense"]);
                  c.expect(f >= dense_fraction_min, "dense fraction " + fmt(f) + " >= 0.99");
                  c.expect(s["violations"] == 0, "violations " + s["violations"].dump() + " of " + s["checked"].dump());
                }});

  cs.push_back({10,
                "Gibbs u-state marginal and unstable densities",
                {config("ustate", identity(),
                        {{"n", 1000},
                         {"dims", {64, 64, 10}},
                         {"density_iterations", {10}},
                         {"density_disk", {{"anchor", {0.2, 0.3}}, {"theta", 0.3}, {"samples", 100000}}}}),
                 config("ustate", ms(0.5, 2),
                        {{"n", 100},
                         {"density_iterations", {100, 1000}},
                         {"density_window", {{"center", {0.5, 0.5}}, {"half_width", 0.25}}},
                         {"density_disk",
                          {{"anchor", {0.2, 0.3}}, {"theta", 0.3}, {"samples", 2000}, {"theta_profile", {0.1, 0.6}}}}})},
                [](const std::vector<Run>& r, Checks& c) {
                  double tv = num_of(r[0].summary["tv_base_to_uniform"]);
                  c.expect(tv < tv_max, "TV " + fmt(tv) + " < 0.05");
                  double lin = num_of(r[0].summary["max_density_ratio"]);
                  c.expect(lin < linear_density_max, "linear density ratio " + fmt(lin) + " < 1.1");
                  double f = num_of(r[1].summary["density_resolution_factor"]);
                  c.expect(f < density_factor_max, "s=2 resolution factor " + fmt(f) + " < 2");
                }});

  cs.push_back({11,
                "block recurrence to the attractor, escape from the repeller",
                {config("recurrence", ms(0.5, 2),
                        {{"disk", {{"anchor", {0.3, 0.6}}, {"theta", 0.2}, {"length", 0.1}, {"samples", 1000}}},
                         {"horizon", 200},
                         {"tail_start", 100}})},
                [](const std::vector<Run>& r, Checks& c) {
                  for (const auto& b : r[0].summary["blocks"]) {
                    if (b["label"] == "attractor")
                      c.expect(b["hits"].get<long>() >= recurrence_hits_min, "attractor hits " + b["hits"].dump() + " >= 20");
                    if (b["label"] == "repeller") {
                      double m = num_of(b["max_fraction_after_tail_start"]);
                      c.expect(m <= repeller_mass_max, "repeller mass after t=100 " + fmt(m) + " <= 0.01");
                    }
                  }
                }});

  cs.push_back({12,
                "leaf-space periodic counts, bracket identities, stable contraction",
                {config("leafspace", identity(), {{"periods", {1, 2, 3}}, {"scan_max_period", 3}})},
                [](const std::vector<Run>& r, Checks& c) {
                  const json& s = r[0].summary;
                  std::vector<long> want{1, 5, 16};
                  std::string counts;
                  bool ok = s["periodic"].size() == 3;
                  for (std::size_t i = 0; ok && i < 3; ++i) {
                    const json& p = s["periodic"][i];
                    ok = p["count"] == want[i] && p["abs_det"] == want[i] && p["scan_count"] == want[i] &&
                         p["scan_identical"].get<bool>();
                    counts += (i ? "," : "") + p["count"].dump();
                  }
                  c.expect(ok, "counts (" + counts + ") = |det| = scan");
                  double bs = num_of(s["bracket_stable_residual"]), bu = num_of(s["bracket_unstable_residual"]);
                  c.expect(bs <= bracket_tol && bu <= bracket_tol, "bracket residuals " + fmt(bs) + ", " + fmt(bu));
                  double rate = num_of(s["contraction_rate"]), ls = num_of(s["lambda_s"]);
                  c.expect(std::fabs(rate - ls) <= contraction_tol, "contraction " + fmt(rate) + " = " + fmt(ls) + " +- 0.01");
                }});
  return cs;
}

Run execute(const json& j, const fs::path& dir, int workers)
{
  Run r;
  ExperimentConfig cfg = parse_experiment(j);
  cfg.workers = workers;
  auto t0 = std::chrono::steady_clock::now();
  RunOutcome out = run(cfg, dir);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.manifest = out.manifest;
  r.summary = out.manifest["summary"];
  r.ok = out.exit_code == exit_ok;
  return r;
}

std::map<std::string, std::string> digest_map(const json& m)
{
  std::map<std::string, std::string> d;
  for (const auto& o : m.at("outputs"))
    d[o.at("path")] = o.at("sha256");
  return d;
}

void report(bool pass, int id, const std::string& title, const std::string& detail)
{
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " (" << detail << ")" << std::endl;
}

} // namespace

int main(int argc, char** argv)
{
  fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
  int failed = 0;
  struct Done {
    fs::path dir;
    json config;
    json manifest;
  };
  std::vector<Done> done;

  for (const auto& crit : criteria()) {
    std::vector<Run> runs;
    Checks checks;
    try {
      for (std::size_t i = 0; i < crit.configs.size(); ++i) {
        fs::path dir = root / ("c" + std::to_string(crit.id) + "_" + std::to_string(i));
        Run r = execute(crit.configs[i], dir, 1);
        checks.expect(r.ok, crit.configs[i]["kind"].get<std::string>() + " run " +
                                (r.ok ? "ok" : "failed: " + r.manifest["error"].dump()));
        done.push_back({dir, crit.configs[i], r.manifest});
        runs.push_back(std::move(r));
      }
      bool all_ok = true;
      for (const auto& r : runs)
        all_ok = all_ok && r.ok;
      if (all_ok)
        crit.evaluate(runs, checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("error: ") + e.what());
    }
    report(checks.pass(), crit.id, crit.title, checks.text());
    failed += checks.pass() ? 0 : 1;
  }

  Checks det;
  int same = 0;
  for (const auto& d : done) {
    try {
      Run r8 = execute(d.config, root / "workers8" / d.dir.filename(), 8);
      bool eq = digest_map(r8.manifest) == digest_map(d.manifest) &&
                r8.manifest["exit_code"] == d.manifest["exit_code"];
      if (eq)
        ++same;
      else
        det.expect(false, d.dir.filename().string() + " digests differ");
    } catch (const std::exception& e) {
      det.expect(false, d.dir.filename().string() + ": " + e.what());
    }
  }
  det.expect(same == static_cast<int>(done.size()),
             std::to_string(same) + "/" + std::to_string(done.size()) + " runs identical at 1 and 8 workers");
  report(det.pass(), 13, "byte-identical outputs at 1 and 8 workers", det.text());
  failed += det.pass() ? 0 : 1;

  std::cout << (13 - failed) << "/13 criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
