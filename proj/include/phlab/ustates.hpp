#pragma once

// Approximate Gibbs u-states from iterated unstable disks, the
// physical-measure census, regime classification and cs-block recurrence.

#include <phlab/ergodic_stats.hpp>
#include <phlab/parallel.hpp>
#include <phlab/phase_maps.hpp>
#include <phlab/udisk.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace phlab {

using GridDims = std::array<int, 3>;

inline void validate_dims(const GridDims& d)
{
  for (int x : d)
    if (x < 1)
      throw ConfigError("grid dimensions must be positive");
}

/// Cell counts on an n_u x n_v x n_theta grid. Counts add exactly, so any
/// split of the work gives the same histogram.
class CellCounts {
public:
  explicit CellCounts(GridDims dims) : dims_(dims)
  {
    validate_dims(dims);
    counts_.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0);
  }

  std::size_t index_of(const PhasePoint& p) const
  {
    auto cell = [](double x, int n) { return std::min(static_cast<int>(x * n), n - 1); };
    std::size_t i = static_cast<std::size_t>(cell(p.base.u, dims_[0]));
    std::size_t j = static_cast<std::size_t>(cell(p.base.v, dims_[1]));
    std::size_t k = static_cast<std::size_t>(cell(p.theta, dims_[2]));
    return (i * static_cast<std::size_t>(dims_[1]) + j) * static_cast<std::size_t>(dims_[2]) + k;
  }
  void add(const PhasePoint& p) { ++counts_[index_of(p)]; }
  void merge(const CellCounts& o)
  {
    for (std::size_t i = 0; i < counts_.size(); ++i)
      counts_[i] += o.counts_[i];
  }
  const GridDims& dims() const { return dims_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

private:
  GridDims dims_;
  std::vector<std::uint64_t> counts_;
};

/// Normalized histogram on the phase-space grid.
struct EmpiricalMeasure {
  GridDims dims{1, 1, 1};
  std::vector<double> weights;

  static EmpiricalMeasure from_counts(const CellCounts& c)
  {
    EmpiricalMeasure m;
    m.dims = c.dims();
    std::uint64_t total = std::accumulate(c.counts().begin(), c.counts().end(), std::uint64_t{0});
    if (total == 0)
      throw NumericError("empty histogram");
    m.weights.resize(c.counts().size());
    for (std::size_t i = 0; i < m.weights.size(); ++i)
      m.weights[i] = static_cast<double>(c.counts()[i]) / static_cast<double>(total);
    return m;
  }

  double at(int i, int j, int k) const
  {
    return weights[(static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k];
  }
  double total() const { return compensated_total(weights); }

  std::vector<double> base_marginal() const
  {
    std::vector<double> out(static_cast<std::size_t>(dims[0]) * dims[1], 0.0);
    for (int i = 0; i < dims[0]; ++i)
      for (int j = 0; j < dims[1]; ++j) {
        CompensatedSum s;
        for (int k = 0; k < dims[2]; ++k)
          s.add(at(i, j, k));
        out[static_cast<std::size_t>(i) * dims[1] + j] = s.value();
      }
    return out;
  }

  std::vector<double> theta_marginal() const
  {
    std::vector<CompensatedSum> s(static_cast<std::size_t>(dims[2]));
    for (int i = 0; i < dims[0]; ++i)
      for (int j = 0; j < dims[1]; ++j)
        for (int k = 0; k < dims[2]; ++k)
          s[static_cast<std::size_t>(k)].add(at(i, j, k));
    std::vector<double> out;
    for (auto& x : s)
      out.push_back(x.value());
    return out;
  }
};

inline double total_variation(std::span<const double> p, std::span<const double> q)
{
  CompensatedSum s;
  for (std::size_t i = 0; i < p.size(); ++i)
    s.add(std::fabs(p[i] - q[i]));
  return 0.5 * s.value();
}

inline double total_variation_to_uniform(std::span<const double> p)
{
  std::vector<double> u(p.size(), 1.0 / static_cast<double>(p.size()));
  return total_variation(p, u);
}

/// Mass shared by two distributions: sum of bin-wise minima.
inline double overlap(std::span<const double> p, std::span<const double> q)
{
  CompensatedSum s;
  for (std::size_t i = 0; i < p.size(); ++i)
    s.add(std::min(p[i], q[i]));
  return s.value();
}

// ---------------------------------------------------------------------------
// Disk iteration

template <CenterSystem S>
std::vector<PhasePoint> iterate_points(const S& sys, std::vector<PhasePoint> pts, long n, int workers = 1)
{
  if (n < 0)
    throw ConfigError("iteration count must be >= 0");
  parallel_for(pts.size(), workers, [&](std::size_t i) {
    for (long j = 0; j < n; ++j)
      pts[i] = sys.apply(pts[i]);
  });
  return pts;
}

/// n-th image of the disk's equally weighted samples.
template <CenterSystem S>
std::vector<PhasePoint> iterate_udisk(const S& sys, const UDisk& disk, long n, int workers = 1)
{
  return iterate_points(sys, disk_samples(disk), n, workers);
}

/// Chunked accumulation into per-chunk histograms, merged in chunk order.
template <class Body>
CellCounts accumulate_counts(GridDims dims, std::size_t n_items, int workers, Body&& body)
{
  int w = std::max(1, workers);
  std::vector<CellCounts> parts(static_cast<std::size_t>(w), CellCounts(dims));
  parallel_for(static_cast<std::size_t>(w), w, [&](std::size_t t) {
    std::size_t lo = n_items * t / static_cast<std::size_t>(w);
    std::size_t hi = n_items * (t + 1) / static_cast<std::size_t>(w);
    for (std::size_t i = lo; i < hi; ++i)
      body(i, parts[t]);
  });
  CellCounts total(dims);
  for (auto& p : parts)
    total.merge(p);
  return total;
}

/// Histogram of (1/n) sum_{j<n} f^j_* Leb_D, with disk samples jittered
/// within their arclength cells by `seed`.
template <CenterSystem S>
EmpiricalMeasure cesaro_ustate(const S& sys, const UDisk& disk, long n, GridDims dims, std::uint64_t seed,
                               int workers = 1)
{
  if (n < 1)
    throw ConfigError("Cesaro average needs n >= 1");
  auto pts = disk_samples(disk, seed);
  auto counts = accumulate_counts(dims, pts.size(), workers, [&](std::size_t i, CellCounts& c) {
    PhasePoint p = pts[i];
    for (long j = 0; j < n; ++j) {
      c.add(p);
      p = sys.apply(p);
    }
  });
  return EmpiricalMeasure::from_counts(counts);
}

/// Square window in base coordinates; unbounded when half_width >= 0.5.
struct BaseWindow {
  BasePoint center{0.5, 0.5};
  double half_width = 0.5;

  bool contains(BasePoint x) const
  {
    if (half_width >= 0.5)
      return true;
    Vec2 d = torus_delta(center, x);
    return std::fabs(d.x) <= half_width && std::fabs(d.y) <= half_width;
  }
};

struct DensityRatio {
  double ratio = 1.0;
  long in_window = 0;
};

/// max/min of the pushed-forward arclength density of the n-th disk image
/// over the samples that land in the window. The density at f^n(p) is
/// proportional to 1/|Df^n(p) tangent|; tangents are renormalized each step.
inline DensityRatio unstable_density_ratio(const SystemSpec& sys, const UDisk& disk, long n,
                                           const BaseWindow& window, int workers = 1, long min_samples = 10)
{
  if (n < 0)
    throw ConfigError("density ratio needs n >= 0");
  auto ts = disk_parameters(disk);
  std::vector<double> log_growth(ts.size());
  std::vector<char> inside(ts.size(), 0);
  parallel_for(ts.size(), workers, [&](std::size_t i) {
    PhasePoint p = disk.point_at(ts[i]);
    Eigen::Vector3d v(disk.direction.x, disk.direction.y, disk.theta_slope(ts[i]));
    CompensatedSum lg;
    double nv = v.norm();
    lg.add(std::log(nv));
    v /= nv;
    for (long j = 0; j < n; ++j) {
      v = sys.jacobian(p) * v;
      nv = v.norm();
      lg.add(std::log(nv));
      v /= nv;
      p = sys.apply(p);
    }
    log_growth[i] = lg.value();
    inside[i] = window.contains(p.base) ? 1 : 0;
  });
  DensityRatio r;
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < ts.size(); ++i)
    if (inside[i]) {
      ++r.in_window;
      lo = std::min(lo, log_growth[i]);
      hi = std::max(hi, log_growth[i]);
    }
  if (r.in_window < min_samples)
    throw NumericError("insufficient disk samples in the density window");
  r.ratio = std::exp(hi - lo);
  return r;
}

// ---------------------------------------------------------------------------
// Census

struct CensusParams {
  GridDims grid{20, 20, 20};
  long n = 100000;
  long burn_in = 1000;
  double merge_tol = 0.05;
  GridDims hist_dims{8, 8, 64};
  int representatives = 4; // member orbits pooled into each cluster histogram
  std::uint64_t seed = 0;
  int workers = 1;
};

struct ClusterSummary {
  std::vector<double> centroid;
  long members = 0;
  double basin_fraction = 0.0;
  ExponentEstimate exponent;
  EmpiricalMeasure representative;
  std::vector<long> member_ids;
};

struct OrbitRecord {
  PhasePoint start;
  std::vector<double> signature;
  double exponent = 0.0;
  double drift = 0.0;
  int cluster = -1; // -1: unassigned
};

struct MeasureCensus {
  std::vector<ClusterSummary> clusters;
  double unassigned_fraction = 0.0;
  std::vector<OrbitRecord> orbits;
  double min_centroid_separation = INFINITY;
};

inline double max_norm_dist(std::span<const double> a, std::span<const double> b)
{
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

/// Complete-linkage agglomerative clustering in the max norm, cut at `tol`.
/// In the max norm the linkage distance of two clusters depends only on
/// their bounding boxes, so clusters are stored as boxes. Nearest-neighbor
/// chains give the exact hierarchy; ties go to the lower index. Returns
/// groups of input indices, each sorted ascending, groups ordered by their
/// smallest index.
inline std::vector<std::vector<long>> complete_linkage(const std::vector<std::vector<double>>& points, double tol)
{
  struct Box {
    std::vector<double> lo, hi;
    std::vector<long> members;
    bool active = true;
  };
  std::vector<Box> boxes;
  boxes.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    boxes.push_back({points[i], points[i], {static_cast<long>(i)}, true});
  auto linkage = [&](const Box& a, const Box& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.lo.size(); ++k)
      d = std::max({d, a.hi[k] - b.lo[k], b.hi[k] - a.lo[k]});
    return d;
  };

  std::vector<std::vector<long>> done;
  std::vector<std::size_t> chain;
  std::size_t next_start = 0;
  std::size_t remaining = boxes.size();
  while (remaining > 0) {
    if (chain.empty()) {
      while (!boxes[next_start].active)
        ++next_start;
      chain.push_back(next_start);
    }
    std::size_t top = chain.back();
    std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : std::numeric_limits<std::size_t>::max();
    double best = INFINITY;
    std::size_t nn = std::numeric_limits<std::size_t>::max();
    if (prev != std::numeric_limits<std::size_t>::max()) {
      best = linkage(boxes[top], boxes[prev]);
      nn = prev;
    }
    for (std::size_t c = 0; c < boxes.size(); ++c) {
      if (!boxes[c].active || c == top || c == prev)
        continue;
      double d = linkage(boxes[top], boxes[c]);
      if (d < best) {
        best = d;
        nn = c;
      }
    }
    if (nn == std::numeric_limits<std::size_t>::max() || best > tol) {
      // linkage distances only grow under merging, so top is final
      boxes[top].active = false;
      done.push_back(std::move(boxes[top].members));
      chain.pop_back();
      --remaining;
      continue;
    }
    if (nn == prev) {
      chain.pop_back();
      chain.pop_back();
      std::size_t keep = std::min(top, prev), gone = std::max(top, prev);
      Box& k = boxes[keep];
      Box& g = boxes[gone];
      for (std::size_t d = 0; d < k.lo.size(); ++d) {
        k.lo[d] = std::min(k.lo[d], g.lo[d]);
        k.hi[d] = std::max(k.hi[d], g.hi[d]);
      }
      k.members.insert(k.members.end(), g.members.begin(), g.members.end());
      g.active = false;
      g.members.clear();
      --remaining;
      continue;
    }
    chain.push_back(nn);
  }
  for (auto& g : done)
    std::sort(g.begin(), g.end());
  std::sort(done.begin(), done.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return done;
}

/// Stratified initial condition: one uniform draw inside grid cell `idx`.
inline PhasePoint grid_cell_point(const GridDims& grid, std::size_t idx, std::uint64_t seed)
{
  std::size_t nk = static_cast<std::size_t>(grid[2]);
  std::size_t nj = static_cast<std::size_t>(grid[1]);
  std::size_t k = idx % nk;
  std::size_t j = (idx / nk) % nj;
  std::size_t i = idx / (nk * nj);
  Stream rng(seed, "census", idx);
  double u = (static_cast<double>(i) + rng.uniform()) / grid[0];
  double v = (static_cast<double>(j) + rng.uniform()) / grid[1];
  double t = (static_cast<double>(k) + rng.uniform()) / grid[2];
  return PhasePoint::reduced(u, v, t);
}

/// Birkhoff signatures of a stratified grid of initial conditions, clustered
/// into candidate physical measures. Orbits whose half-window averages still
/// differ by more than merge_tol are left unassigned.
template <CenterSystem S>
MeasureCensus physical_measure_census(const S& sys, const ObservableSet& obs, const CensusParams& prm)
{
  validate_dims(prm.grid);
  validate_dims(prm.hist_dims);
  if (!(prm.merge_tol > 0.0))
    throw ConfigError("merge_tol must be positive");
  if (prm.n < 2 || prm.burn_in < 0)
    throw ConfigError("census needs n >= 2 and burn_in >= 0");
  const std::size_t total = static_cast<std::size_t>(prm.grid[0]) * prm.grid[1] * prm.grid[2];

  MeasureCensus census;
  census.orbits.resize(total);
  parallel_for(total, prm.workers, [&](std::size_t i) {
    OrbitRecord& r = census.orbits[i];
    r.start = grid_cell_point(prm.grid, i, prm.seed);
    OrbitStats st = orbit_stats(sys, r.start, obs, prm.n, prm.burn_in);
    r.signature = std::move(st.average);
    r.exponent = st.exponent;
    r.drift = st.drift();
  });

  std::vector<long> assigned;
  std::vector<std::vector<double>> sigs;
  for (std::size_t i = 0; i < total; ++i)
    if (census.orbits[i].drift <= prm.merge_tol) {
      assigned.push_back(static_cast<long>(i));
      sigs.push_back(census.orbits[i].signature);
    }
  auto groups = complete_linkage(sigs, prm.merge_tol);
  for (auto& g : groups)
    for (long& m : g)
      m = assigned[static_cast<std::size_t>(m)];
  std::stable_sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });

  for (std::size_t c = 0; c < groups.size(); ++c) {
    ClusterSummary cl;
    cl.member_ids = groups[c];
    cl.members = static_cast<long>(groups[c].size());
    cl.basin_fraction = static_cast<double>(cl.members) / static_cast<double>(total);
    const std::size_t K = obs.size();
    std::vector<CompensatedSum> cs(K);
    std::vector<double> ex;
    for (long m : groups[c]) {
      auto& r = census.orbits[static_cast<std::size_t>(m)];
      r.cluster = static_cast<int>(c);
      for (std::size_t k = 0; k < K; ++k)
        cs[k].add(r.signature[k]);
      ex.push_back(r.exponent);
    }
    for (auto& s : cs)
      cl.centroid.push_back(s.value() / static_cast<double>(cl.members));
    cl.exponent = make_estimate(std::move(ex), prm.n);
    census.clusters.push_back(std::move(cl));
  }

  // representative histograms: pooled post-burn-in orbits of the first members
  parallel_for(census.clusters.size(), prm.workers, [&](std::size_t c) {
    ClusterSummary& cl = census.clusters[c];
    CellCounts counts(prm.hist_dims);
    int reps = std::min<int>(std::max(1, prm.representatives), static_cast<int>(cl.member_ids.size()));
    for (int r = 0; r < reps; ++r) {
      PhasePoint p = census.orbits[static_cast<std::size_t>(cl.member_ids[static_cast<std::size_t>(r)])].start;
      for (long j = 0; j < prm.burn_in; ++j)
        p = sys.apply(p);
      for (long j = 0; j < prm.n; ++j) {
        counts.add(p);
        p = sys.apply(p);
      }
    }
    cl.representative = EmpiricalMeasure::from_counts(counts);
  });

  long unassigned = static_cast<long>(total - assigned.size());
  census.unassigned_fraction = static_cast<double>(unassigned) / static_cast<double>(total);
  for (std::size_t a = 0; a < census.clusters.size(); ++a)
    for (std::size_t b = a + 1; b < census.clusters.size(); ++b)
      census.min_centroid_separation = std::min(
          census.min_centroid_separation, max_norm_dist(census.clusters[a].centroid, census.clusters[b].centroid));
  return census;
}

enum class RegimeKind { rotation_like, mostly_contracting, mixed };

struct Regime {
  RegimeKind kind = RegimeKind::mixed;
  int clusters = 0;
};

inline std::string to_string(RegimeKind k)
{
  switch (k) {
  case RegimeKind::rotation_like:
    return "RotationLike";
  case RegimeKind::mostly_contracting:
    return "MostlyContracting";
  case RegimeKind::mixed:
    return "Mixed";
  }
  return "Mixed";
}

/// RotationLike when every cluster exponent is within zero_tol of 0,
/// MostlyContracting(k) when all k are below -zero_tol, Mixed otherwise.
inline Regime classify_regime(const MeasureCensus& census, double zero_tol = 1e-3)
{
  if (census.clusters.empty())
    throw ConfigError("cannot classify an empty census");
  Regime r;
  r.clusters = static_cast<int>(census.clusters.size());
  bool all_zero = true, all_negative = true;
  for (const auto& c : census.clusters) {
    double m = c.exponent.mean;
    all_zero = all_zero && std::fabs(m) <= zero_tol;
    all_negative = all_negative && m < -zero_tol;
  }
  r.kind = all_zero ? RegimeKind::rotation_like
                    : (all_negative ? RegimeKind::mostly_contracting : RegimeKind::mixed);
  return r;
}

/// Theta-marginal overlap between two clusters' representative histograms.
inline double theta_overlap(const ClusterSummary& a, const ClusterSummary& b)
{
  auto pa = a.representative.theta_marginal();
  auto pb = b.representative.theta_marginal();
  return overlap(pa, pb);
}

// ---------------------------------------------------------------------------
// Statistical stability

struct SweepRow {
  double parameter = 0.0;
  int cluster_count = 0;
  std::vector<std::vector<double>> centroids;
  std::vector<double> basin_fractions;
};

struct StabilitySweep {
  std::vector<SweepRow> rows;
  bool count_constant = true;
  double max_displacement = 0.0; // max-norm, matched centroids of adjacent rows
  double spacing = 0.0;
};

/// Largest displacement after matching each centroid of `a` to its nearest
/// centroid in `b`.
inline double matched_displacement(const std::vector<std::vector<double>>& a,
                                   const std::vector<std::vector<double>>& b)
{
  double worst = 0.0;
  for (const auto& ca : a) {
    double best = INFINITY;
    for (const auto& cb : b)
      best = std::min(best, max_norm_dist(ca, cb));
    worst = std::max(worst, best);
  }
  return worst;
}

/// Census over morse_smale(a, s) for a evenly spaced in [a0, a1].
inline StabilitySweep stability_sweep(const AnosovBase& base, int s, double a0, double a1, int steps,
                                      const ObservableSet& obs, const CensusParams& prm)
{
  if (steps < 1 || (steps == 1 && a0 != a1))
    throw ConfigError("sweep needs steps >= 1 (steps == 1 only for a0 == a1)");
  StabilitySweep out;
  out.spacing = steps > 1 ? (a1 - a0) / (steps - 1) : 0.0;
  for (int i = 0; i < steps; ++i) {
    double a = steps > 1 ? a0 + i * out.spacing : a0;
    SystemSpec sys = make_system(base, FiberFamily::morse_smale(a, s));
    MeasureCensus c = physical_measure_census(sys, obs, prm);
    SweepRow row;
    row.parameter = a;
    row.cluster_count = static_cast<int>(c.clusters.size());
    for (const auto& cl : c.clusters) {
      row.centroids.push_back(cl.centroid);
      row.basin_fractions.push_back(cl.basin_fraction);
    }
    out.rows.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    out.count_constant = out.count_constant && out.rows[i].cluster_count == out.rows[0].cluster_count;
    out.max_displacement =
        std::max({out.max_displacement, matched_displacement(out.rows[i - 1].centroids, out.rows[i].centroids),
                  matched_displacement(out.rows[i].centroids, out.rows[i - 1].centroids)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// cs-block recurrence

/// Product region: a rectangle in eigencoordinates (s along e_s, t along
/// e_u) around a base point, times an arc around a fiber point.
struct CsBlock {
  BasePoint center;
  double half_s = 0.1;
  double half_u = 0.1;
  double theta_center = 0.5;
  double theta_half = 0.1;
  std::string label;

  bool contains(const AnosovBase& base, const PhasePoint& p) const
  {
    auto st = base.eigen_coords(torus_delta(center, p.base));
    return std::fabs(st[0]) <= half_s && std::fabs(st[1]) <= half_u &&
           circle_dist(p.theta, theta_center) <= theta_half;
  }
};

inline void validate_block(const CsBlock& b)
{
  if (!(b.half_s > 0.0 && b.half_u > 0.0 && b.theta_half > 0.0))
    throw ConfigError("cs-block must have positive volume");
  if (!(2.0 * b.theta_half < 1.0))
    throw ConfigError("cs-block theta interval must be shorter than the circle");
  if (b.half_s >= 0.25 || b.half_u >= 0.25)
    throw ConfigError("cs-block rectangle too large for a local chart");
}

struct RecurrenceResult {
  std::vector<double> fractions; // index = time
  double threshold = 0.01;
  long hits = 0; // times with fraction >= threshold
};

inline RecurrenceResult block_recurrence(const SystemSpec& sys, const UDisk& disk, const CsBlock& block, long horizon,
                                         std::uint64_t seed, double threshold = 0.01, int workers = 1)
{
  validate_block(block);
  if (horizon < 0)
    throw ConfigError("horizon must be >= 0");
  auto pts = disk_samples(disk, seed);
  std::vector<std::vector<char>> inside(pts.size());
  parallel_for(pts.size(), workers, [&](std::size_t i) {
    auto& row = inside[i];
    row.resize(static_cast<std::size_t>(horizon) + 1);
    PhasePoint p = pts[i];
    for (long t = 0; t <= horizon; ++t) {
      row[static_cast<std::size_t>(t)] = block.contains(sys.base, p) ? 1 : 0;
      if (t < horizon)
        p = sys.apply(p);
    }
  });
  RecurrenceResult r;
  r.threshold = threshold;
  for (long t = 0; t <= horizon; ++t) {
    long c = 0;
    for (const auto& row : inside)
      c += row[static_cast<std::size_t>(t)];
    double f = static_cast<double>(c) / static_cast<double>(pts.size());
    r.fractions.push_back(f);
    if (f >= threshold)
      ++r.hits;
  }
  return r;
}

} // namespace phlab
