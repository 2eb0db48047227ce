#pragma once

// Strong stable/unstable holonomies between center fibers, su-loops,
// singularity diagnostics, the cylinder conjugacy and fiber atomicity.

#include <phlab/parallel.hpp>
#include <phlab/phase_maps.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace phlab {

enum class HolonomyKind { stable, unstable, loop, cylinder };

inline std::string to_string(HolonomyKind k)
{
  switch (k) {
  case HolonomyKind::stable:
    return "stable";
  case HolonomyKind::unstable:
    return "unstable";
  case HolonomyKind::loop:
    return "loop";
  case HolonomyKind::cylinder:
    return "cylinder";
  }
  return "stable";
}

/// Sampled monotone circle map between two fibers. `image` holds lifts:
/// increasing along the grid and extended by image(t + 1) = image(t) + 1.
struct HolonomyMap {
  HolonomyKind kind = HolonomyKind::stable;
  BasePoint source;
  BasePoint target;
  std::vector<double> theta;
  std::vector<double> image;
  int n_used = 0;
  double cauchy_gap = 0.0;
  std::vector<double> gap_history; // gap_history[n-1] = sup |h_n - h_{n-1}|

  /// Piecewise-linear evaluation of the lift between grid nodes.
  double evaluate(double t) const
  {
    const std::size_t G = theta.size();
    double k = std::floor(t);
    double f = (t - k) * static_cast<double>(G);
    std::size_t j = std::min(static_cast<std::size_t>(f), G - 1);
    double w = f - static_cast<double>(j);
    double a = image[j];
    double b = j + 1 < G ? image[j + 1] : image[0] + 1.0;
    if (w == 0.0)
      return a + k;
    return a + w * (b - a) + k;
  }

  bool monotone() const
  {
    for (std::size_t i = 1; i < image.size(); ++i)
      if (!(image[i] > image[i - 1]))
        return false;
    return image.back() < image.front() + 1.0;
  }
};

struct HolonomyOptions {
  int grid = 1024;
  double tol = 1e-9;
  int n_max = 200;
};

struct HolonomyValues {
  std::vector<double> image;
  int n_used = 0;
  double gap = 0.0;
  std::vector<double> gaps;
};

inline std::vector<double> uniform_grid(int G)
{
  if (G < 2)
    throw ConfigError("holonomy grid needs at least 2 points");
  std::vector<double> t(static_cast<std::size_t>(G));
  for (int i = 0; i < G; ++i)
    t[static_cast<std::size_t>(i)] = static_cast<double>(i) / G;
  return t;
}

inline void require_skew(const SystemSpec& sys)
{
  if (!sys.is_skew())
    throw ConfigError("holonomies are only defined here for skew products");
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

/// Round-off level of w = F(z) for the last inverse chain F: machine epsilon
/// times |z| times the largest grid slope of F.
inline double roundoff_floor(std::span<const double> z, std::span<const double> w)
{
  double zmax = 1.0, slope = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    zmax = std::max(zmax, std::fabs(z[i]));
    if (i > 0) {
      double dz = z[i] - z[i - 1];
      if (!(dz > 0.0))
        return INFINITY;
      slope = std::max(slope, (w[i] - w[i - 1]) / dz);
    }
  }
  return std::numeric_limits<double>::epsilon() * zmax * slope;
}

/// Stable holonomy from the fiber over x to the fiber over x + offset e_s:
/// h_n = (fibers along y's orbit)^{-1} o (fibers along x's orbit), with the
/// partner orbit kept exactly on the stable line, y_j = x_j + offset eig_s^j e_s.
/// Stops at the least n with sup |h_n - h_{n-1}| < tol on two consecutive
/// steps; a single small gap can be a cancellation along the orbit.
inline HolonomyValues stable_holonomy_values(const SystemSpec& sys, BasePoint x, double offset,
                                             std::span<const double> thetas, double tol, int n_max)
{
  require_skew(sys);
  std::vector<BasePoint> xs{x}, ys{x};
  std::vector<double> z(thetas.begin(), thetas.end());
  std::vector<double> prev(thetas.begin(), thetas.end());
  std::vector<double> w(z.size());
  HolonomyValues out;
  double scale = offset;
  ys[0] = translate(x, offset * sys.base.e_s);
  for (int n = 1; n <= n_max; ++n) {
    const BasePoint xn = xs.back();
    for (double& v : z)
      v = sys.fiber_lift(xn, v);
    for (std::size_t i = 0; i < z.size(); ++i) {
      double v = z[i];
      for (int j = n - 1; j >= 0; --j)
        v = sys.fiber_inverse_lift(ys[static_cast<std::size_t>(j)], v);
      w[i] = v;
    }
    double gap = max_abs_diff(w, prev);
    out.gaps.push_back(gap);
    prev = w;
    if (gap >= tol && roundoff_floor(z, w) > tol)
      throw NumericError("holonomy hit its round-off floor above the requested tolerance");
    if (gap < tol && n >= 2 && out.gaps[out.gaps.size() - 2] < tol) {
      out.image = std::move(w);
      out.n_used = n;
      out.gap = gap;
      return out;
    }
    xs.push_back(sys.base.forward(xn));
    scale *= sys.base.eig_s;
    ys.push_back(translate(xs.back(), scale * sys.base.e_s));
  }
  throw NumericError("stable holonomy did not converge within n_max iterations");
}

/// Unstable holonomy from the fiber over x to the fiber over x + offset e_u,
/// the same construction along backward orbits.
inline HolonomyValues unstable_holonomy_values(const SystemSpec& sys, BasePoint x, double offset,
                                               std::span<const double> thetas, double tol, int n_max)
{
  require_skew(sys);
  std::vector<BasePoint> ys{translate(x, offset * sys.base.e_u)};
  BasePoint xn = x;
  double scale = offset;
  std::vector<double> z(thetas.begin(), thetas.end());
  std::vector<double> prev(thetas.begin(), thetas.end());
  std::vector<double> w(z.size());
  HolonomyValues out;
  for (int n = 1; n <= n_max; ++n) {
    xn = sys.base.backward(xn);
    scale /= sys.base.eig_u;
    ys.push_back(translate(xn, scale * sys.base.e_u)); // ys[n] partners xs[-n]
    for (double& v : z)
      v = sys.fiber_inverse_lift(xn, v);
    for (std::size_t i = 0; i < z.size(); ++i) {
      double v = z[i];
      for (int j = n; j >= 1; --j)
        v = sys.fiber_lift(ys[static_cast<std::size_t>(j)], v);
      w[i] = v;
    }
    double gap = max_abs_diff(w, prev);
    out.gaps.push_back(gap);
    prev = w;
    if (gap >= tol && roundoff_floor(z, w) > tol)
      throw NumericError("holonomy hit its round-off floor above the requested tolerance");
    if (gap < tol && n >= 2 && out.gaps[out.gaps.size() - 2] < tol) {
      out.image = std::move(w);
      out.n_used = n;
      out.gap = gap;
      return out;
    }
  }
  throw NumericError("unstable holonomy did not converge within n_max iterations");
}

/// Signed offset of y from x along `dir`; y - x must lie within
/// `angle_tol` of that line. The partner is then treated as exactly on it.
inline double offset_along(BasePoint x, BasePoint y, Vec2 dir, double angle_tol = 1e-6)
{
  Vec2 d = torus_delta(x, y);
  if (norm(d) == 0.0)
    return 0.0;
  if (line_angle(d, dir) > angle_tol)
    throw ConfigError("target point is not on the local leaf through the source");
  return dot(d, dir);
}

inline HolonomyMap to_map(HolonomyKind kind, BasePoint source, BasePoint target, std::vector<double> grid,
                          HolonomyValues v)
{
  HolonomyMap h;
  h.kind = kind;
  h.source = source;
  h.target = target;
  h.theta = std::move(grid);
  h.image = std::move(v.image);
  h.n_used = v.n_used;
  h.cauchy_gap = v.gap;
  h.gap_history = std::move(v.gaps);
  return h;
}

inline HolonomyMap stable_holonomy_offset(const SystemSpec& sys, BasePoint x, double offset,
                                          const HolonomyOptions& opt = {})
{
  auto grid = uniform_grid(opt.grid);
  auto v = stable_holonomy_values(sys, x, offset, grid, opt.tol, opt.n_max);
  return to_map(HolonomyKind::stable, x, translate(x, offset * sys.base.e_s), std::move(grid), std::move(v));
}

inline HolonomyMap unstable_holonomy_offset(const SystemSpec& sys, BasePoint x, double offset,
                                            const HolonomyOptions& opt = {})
{
  auto grid = uniform_grid(opt.grid);
  auto v = unstable_holonomy_values(sys, x, offset, grid, opt.tol, opt.n_max);
  return to_map(HolonomyKind::unstable, x, translate(x, offset * sys.base.e_u), std::move(grid), std::move(v));
}

inline HolonomyMap stable_holonomy(const SystemSpec& sys, BasePoint x, BasePoint y, const HolonomyOptions& opt = {})
{
  return stable_holonomy_offset(sys, x, offset_along(x, y, sys.base.e_s), opt);
}

inline HolonomyMap unstable_holonomy(const SystemSpec& sys, BasePoint x, BasePoint y,
                                     const HolonomyOptions& opt = {})
{
  return unstable_holonomy_offset(sys, x, offset_along(x, y, sys.base.e_u), opt);
}

/// Largest ratio gap(n)/gap(n-1) past the first `skip` iterations, over
/// steps where the previous gap is still above `floor`.
inline double worst_gap_ratio(const std::vector<double>& gaps, int skip = 5, double floor = 1e-14)
{
  double worst = 0.0;
  for (std::size_t n = static_cast<std::size_t>(skip) + 1; n < gaps.size(); ++n)
    if (gaps[n - 1] > floor)
      worst = std::max(worst, gaps[n] / gaps[n - 1]);
  return worst;
}

/// sup over thetas of dist(f(h^s_{x,y}(t)), h^s_{f x, f y}(f t)).
inline double stable_equivariance_residual(const SystemSpec& sys, BasePoint x, double offset,
                                           std::span<const double> thetas, double tol, int n_max)
{
  auto h = stable_holonomy_values(sys, x, offset, thetas, tol, n_max);
  BasePoint y = translate(x, offset * sys.base.e_s);
  std::vector<double> ft(thetas.size());
  for (std::size_t i = 0; i < thetas.size(); ++i)
    ft[i] = sys.fiber_lift(x, thetas[i]);
  auto g = stable_holonomy_values(sys, sys.base.forward(x), offset * sys.base.eig_s, ft, tol, n_max);
  double worst = 0.0;
  for (std::size_t i = 0; i < thetas.size(); ++i)
    worst = std::max(worst, circle_dist(sys.fiber_lift(y, h.image[i]), g.image[i]));
  return worst;
}

inline double unstable_equivariance_residual(const SystemSpec& sys, BasePoint x, double offset,
                                             std::span<const double> thetas, double tol, int n_max)
{
  auto h = unstable_holonomy_values(sys, x, offset, thetas, tol, n_max);
  BasePoint y = translate(x, offset * sys.base.e_u);
  std::vector<double> ft(thetas.size());
  for (std::size_t i = 0; i < thetas.size(); ++i)
    ft[i] = sys.fiber_lift(x, thetas[i]);
  auto g = unstable_holonomy_values(sys, sys.base.forward(x), offset * sys.base.eig_u, ft, tol, n_max);
  double worst = 0.0;
  for (std::size_t i = 0; i < thetas.size(); ++i)
    worst = std::max(worst, circle_dist(sys.fiber_lift(y, h.image[i]), g.image[i]));
  return worst;
}

// ---------------------------------------------------------------------------
// su-loops

struct LoopHolonomy {
  HolonomyMap map;
  double displacement = 0.0;
  std::array<int, 4> legs_used{};
};

/// Parallelogram x -> +leg e_u -> +leg e_s -> -leg e_u -> -leg e_s, closing
/// exactly on a linear base. The four holonomies are composed pointwise.
inline LoopHolonomy su_loop_holonomy(const SystemSpec& sys, BasePoint x, double leg, const HolonomyOptions& opt = {})
{
  require_skew(sys);
  if (!(std::fabs(leg) < 0.25))
    throw ConfigError("loop leg too long for a local parallelogram");
  auto grid = uniform_grid(opt.grid);
  LoopHolonomy out;
  std::vector<double> v = grid;
  BasePoint p = x;
  double gap = 0.0;
  const Vec2 eu = sys.base.e_u, es = sys.base.e_s;
  struct Leg {
    bool unstable;
    double off;
  };
  const Leg legs[4] = {{true, leg}, {false, leg}, {true, -leg}, {false, -leg}};
  std::vector<double> gaps;
  for (int i = 0; i < 4; ++i) {
    HolonomyValues hv = legs[i].unstable ? unstable_holonomy_values(sys, p, legs[i].off, v, opt.tol, opt.n_max)
                                         : stable_holonomy_values(sys, p, legs[i].off, v, opt.tol, opt.n_max);
    v = std::move(hv.image);
    out.legs_used[static_cast<std::size_t>(i)] = hv.n_used;
    gap = std::max(gap, hv.gap);
    p = translate(p, legs[i].off * (legs[i].unstable ? eu : es));
  }
  double disp = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    disp = std::max(disp, std::fabs(centered(v[i] - grid[i])));
  out.displacement = disp;
  HolonomyValues merged;
  merged.image = std::move(v);
  merged.n_used = *std::max_element(out.legs_used.begin(), out.legs_used.end());
  merged.gap = gap;
  out.map = to_map(HolonomyKind::loop, x, p, std::move(grid), std::move(merged));
  return out;
}

// ---------------------------------------------------------------------------
// Singularity diagnostics

struct SingularityReport {
  int bins = 0;
  std::vector<double> masses;
  double normalized_entropy = 0.0;
  double max_bin_mass = 0.0;
  double jacobian_min = 0.0;
  double jacobian_max = 0.0;
};

/// Push the uniform partition into B arcs through h and measure the image
/// arcs: their normalized entropy and the empirical Jacobians B * mass.
inline SingularityReport holonomy_singularity_report(const HolonomyMap& h, int B)
{
  if (B < 2)
    throw ConfigError("singularity report needs B >= 2");
  if (h.image.empty() || !h.monotone())
    throw ConfigError("singularity report needs a converged monotone holonomy");
  std::vector<double> edges(static_cast<std::size_t>(B) + 1);
  for (int i = 0; i < B; ++i)
    edges[static_cast<std::size_t>(i)] = h.evaluate(static_cast<double>(i) / B);
  edges[static_cast<std::size_t>(B)] = edges[0] + 1.0;
  SingularityReport r;
  r.bins = B;
  r.masses.resize(static_cast<std::size_t>(B));
  double total = edges.back() - edges.front();
  CompensatedSum ent;
  r.jacobian_min = INFINITY;
  for (int i = 0; i < B; ++i) {
    double m = (edges[static_cast<std::size_t>(i) + 1] - edges[static_cast<std::size_t>(i)]) / total;
    r.masses[static_cast<std::size_t>(i)] = m;
    if (m > 0.0)
      ent.add(-m * std::log(m));
    r.max_bin_mass = std::max(r.max_bin_mass, m);
    r.jacobian_min = std::min(r.jacobian_min, m * B);
    r.jacobian_max = std::max(r.jacobian_max, m * B);
  }
  r.normalized_entropy = ent.value() / std::log(static_cast<double>(B));
  return r;
}

// ---------------------------------------------------------------------------
// Cylinder conjugacy between the boundary circles

/// Inverse of the boundary lift on C_1 on the branch containing z.
inline double cylinder_top_inverse(const CylinderSystem& cyl, double z)
{
  const double d = cyl.base_degree;
  double k = std::floor(z / d);
  double r = z - k * d;
  if (r == 0.0)
    return k;
  double y = invert_increasing([&](double t) { return cyl.boundary_lift(t, 1.0); },
                               [&](double t) { return cyl.boundary_slope(t, 1.0); }, r, 0.0, 1.0, 1e-15);
  return y + k;
}

inline void require_expanding_boundary(const CylinderSystem& cyl)
{
  double lowest = INFINITY;
  for (int i = 0; i < 4096; ++i)
    lowest = std::min(lowest, cyl.boundary_slope(i / 4096.0, 1.0));
  if (!(lowest > 1.0))
    throw NumericError("boundary map on C_1 is not expanding; itinerary matching fails");
}

/// Conjugacy h with h o (f|C_0) = (f|C_1) o h, h(0) = 0. On the grid i/B the
/// relation H_n(x) = (f|C_1)^{-1}(H_{n-1}(d x)) closes on grid points, so
/// each depth costs one inverse branch per node.
inline HolonomyMap cylinder_center_holonomy(const CylinderSystem& cyl, int B, int depth = 64, double tol = 1e-12)
{
  require_expanding_boundary(cyl);
  auto grid = uniform_grid(B);
  const int d = cyl.base_degree;
  std::vector<double> H = grid, next(grid.size());
  HolonomyValues v;
  for (int n = 1; n <= depth; ++n) {
    for (int i = 0; i < B; ++i) {
      long di = static_cast<long>(d) * i;
      double w = static_cast<double>(di / B);
      next[static_cast<std::size_t>(i)] = cylinder_top_inverse(cyl, H[static_cast<std::size_t>(di % B)] + w);
    }
    double gap = max_abs_diff(next, H);
    v.gaps.push_back(gap);
    H.swap(next);
    if (gap < tol) {
      v.n_used = n;
      v.gap = gap;
      v.image = H;
      return to_map(HolonomyKind::cylinder, {0.0, 0.0}, {0.0, 1.0}, std::move(grid), std::move(v));
    }
  }
  throw NumericError("cylinder conjugacy did not converge within the requested depth");
}

/// sup_i |H(f_0(x_i)) - f_1(H(x_i))| on the grid.
inline double cylinder_conjugacy_residual(const CylinderSystem& cyl, const HolonomyMap& h)
{
  const long B = static_cast<long>(h.theta.size());
  double worst = 0.0;
  for (long i = 0; i < B; ++i) {
    long di = cyl.base_degree * i;
    double lhs = h.image[static_cast<std::size_t>(di % B)] + static_cast<double>(di / B);
    double rhs = cyl.boundary_lift(h.image[static_cast<std::size_t>(i)], 1.0);
    worst = std::max(worst, std::fabs(lhs - rhs));
  }
  return worst;
}

struct JacobianDrift {
  std::vector<int> depths;
  std::vector<double> log_jacobian; // log(d^-k / H(d^-k)), the inverse conjugacy C_1 -> C_0
  double slope = 0.0;
};

/// Empirical log-Jacobian at the fixed point of h^{-1}: C_1 -> C_0 over the
/// arc [0, H(d^-k)], for k in [k_min, k_max], and its least-squares slope in
/// k. The orbit of d^-k lands on 0, so H(d^-k) is exact at every depth.
inline JacobianDrift fixed_point_jacobian_drift(const CylinderSystem& cyl, int k_min, int k_max)
{
  if (k_min < 1 || k_max <= k_min)
    throw ConfigError("drift fit needs 1 <= k_min < k_max");
  require_expanding_boundary(cyl);
  JacobianDrift out;
  double h = 1.0; // H(d^0) = H(1) = 1
  double scale = 1.0;
  for (int k = 1; k <= k_max; ++k) {
    h = cylinder_top_inverse(cyl, h);
    scale *= cyl.base_degree;
    if (k >= k_min) {
      out.depths.push_back(k);
      out.log_jacobian.push_back(-std::log(h * scale));
    }
  }
  double n = static_cast<double>(out.depths.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < out.depths.size(); ++i) {
    mx += out.depths[i];
    my += out.log_jacobian[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < out.depths.size(); ++i) {
    sxy += (out.depths[i] - mx) * (out.log_jacobian[i] - my);
    sxx += (out.depths[i] - mx) * (out.depths[i] - mx);
  }
  out.slope = sxy / sxx;
  return out;
}

// ---------------------------------------------------------------------------
// Atomicity: forward contraction of a whole fiber

struct AtomicityReport {
  int cluster_count = 0;
  double max_cluster_diameter = 0.0;
  std::vector<double> span_history; // smallest arc holding all fiber points, per step
  double decay_rate = 0.0;          // least-squares slope of log span
  double span_drift = 0.0;          // max_j |span_j - span_0|
};

/// Smallest arc containing all points, given sorted values in [0,1).
inline double circular_span(const std::vector<double>& sorted)
{
  if (sorted.size() < 2)
    return 0.0;
  double max_gap = sorted.front() + 1.0 - sorted.back();
  for (std::size_t i = 1; i < sorted.size(); ++i)
    max_gap = std::max(max_gap, sorted[i] - sorted[i - 1]);
  return 1.0 - max_gap;
}

struct CircleClusters {
  int count = 0;
  double max_diameter = 0.0;
};

/// Split sorted circle points at gaps larger than `radius`.
inline CircleClusters circle_clusters(const std::vector<double>& sorted, double radius)
{
  CircleClusters c;
  const std::size_t m = sorted.size();
  if (m == 0)
    return c;
  std::vector<double> gaps(m);
  for (std::size_t i = 0; i + 1 < m; ++i)
    gaps[i] = sorted[i + 1] - sorted[i];
  gaps[m - 1] = sorted.front() + 1.0 - sorted.back();
  std::size_t start = m;
  for (std::size_t i = 0; i < m; ++i)
    if (gaps[i] > radius) {
      start = i;
      break;
    }
  if (start == m) {
    c.count = 1;
    c.max_diameter = circular_span(sorted);
    return c;
  }
  double cur = 0.0;
  for (std::size_t s = 1; s <= m; ++s) {
    std::size_t i = (start + s) % m; // gap after point i
    if (gaps[i] > radius || s == m) {
      ++c.count;
      c.max_diameter = std::max(c.max_diameter, cur);
      cur = 0.0;
    } else {
      cur += gaps[i];
    }
  }
  return c;
}

inline AtomicityReport atomicity_test(const SystemSpec& sys, BasePoint x, long n, int m_samples,
                                      double cluster_radius)
{
  if (n < 1 || m_samples < 1 || !(cluster_radius > 0.0))
    throw ConfigError("atomicity test needs n >= 1, m_samples >= 1, cluster_radius > 0");
  require_skew(sys);
  std::vector<double> th(static_cast<std::size_t>(m_samples));
  for (int i = 0; i < m_samples; ++i)
    th[static_cast<std::size_t>(i)] = (i + 0.5) / m_samples;
  AtomicityReport r;
  std::vector<double> sorted = th;
  r.span_history.push_back(circular_span(sorted));
  BasePoint b = x;
  for (long j = 1; j <= n; ++j) {
    for (double& t : th)
      t = wrap01(sys.fiber_lift(b, t));
    b = sys.base.forward(b);
    sorted = th;
    std::sort(sorted.begin(), sorted.end());
    r.span_history.push_back(circular_span(sorted));
  }
  auto cl = circle_clusters(sorted, cluster_radius);
  r.cluster_count = cl.count;
  r.max_cluster_diameter = cl.max_diameter;
  for (double s : r.span_history)
    r.span_drift = std::max(r.span_drift, std::fabs(s - r.span_history.front()));

  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < r.span_history.size(); ++j)
    if (r.span_history[j] >= 1e-12 && r.span_history[j] <= 1e-2) {
      xs.push_back(static_cast<double>(j));
      ys.push_back(std::log(r.span_history[j]));
    }
  if (xs.size() < 3) {
    xs.clear();
    ys.clear();
    for (std::size_t j = 0; j < r.span_history.size(); ++j)
      if (r.span_history[j] > 0.0) {
        xs.push_back(static_cast<double>(j));
        ys.push_back(std::log(r.span_history[j]));
      }
  }
  if (xs.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    r.decay_rate = sxy / sxx;
  }
  return r;
}

// ---------------------------------------------------------------------------
// cs/cu transversality

struct TransverseReport {
  bool pass = false;
  int charts = 0;
  bool all_monotone = true;
  double max_fiber_mismatch = 0.0;
  double min_angle = INFINITY;
  double max_angle = 0.0;
  double angle_floor = 0.0;
};

/// Lattice translates that bring the stable and unstable lines of two points
/// in a chart of this radius back together; non-empty means the chart is
/// larger than the injectivity scale.
inline bool chart_is_injective(const AnosovBase& base, double radius, int reach = 8)
{
  for (int a = -reach; a <= reach; ++a)
    for (int b = -reach; b <= reach; ++b) {
      if (a == 0 && b == 0)
        continue;
      auto st = base.eigen_coords({static_cast<double>(a), static_cast<double>(b)});
      if (std::fabs(st[0]) <= 2.0 * radius && std::fabs(st[1]) <= 2.0 * radius)
        return false;
    }
  return true;
}

/// On an m x m grid of charts: the cs-leaf through an offset point and the
/// cu-leaf through the chart center meet in a single fiber; both leaves trace
/// that whole fiber; the dihedral angle between their tangent planes, from
/// finite-difference holonomies, stays above the floor.
inline TransverseReport transverse_intersection_check(const SystemSpec& sys, int m, double chart_radius,
                                                      int fiber_grid = 64, double angle_floor = -1.0,
                                                      const HolonomyOptions& opt = {})
{
  require_skew(sys);
  if (m < 1 || !(chart_radius > 0.0))
    throw ConfigError("transversality check needs m >= 1 and a positive chart radius");
  if (!chart_is_injective(sys.base, chart_radius))
    throw ConfigError("chart radius exceeds the injectivity scale of the local product structure");
  TransverseReport r;
  r.angle_floor = angle_floor >= 0.0 ? angle_floor : line_angle(sys.base.e_s, sys.base.e_u) - 0.05;
  const Vec2 eu = sys.base.e_u, es = sys.base.e_s;
  auto grid = uniform_grid(fiber_grid);
  const double fd = 1e-4;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      ++r.charts;
      BasePoint c{(i + 0.5) / m, (j + 0.5) / m};
      BasePoint q = translate(c, (0.5 * chart_radius) * ((1.0 / std::sqrt(2.0)) * (eu + es)));
      auto st = sys.base.eigen_coords(torus_delta(c, q));
      BasePoint via_cu = translate(c, st[1] * eu);
      BasePoint via_cs = translate(q, -st[0] * es);
      r.max_fiber_mismatch = std::max(r.max_fiber_mismatch, torus_dist(via_cu, via_cs));

      auto hu = unstable_holonomy_values(sys, c, st[1], grid, opt.tol, opt.n_max);
      auto hs = stable_holonomy_values(sys, q, -st[0], grid, opt.tol, opt.n_max);
      for (const auto* h : {&hu.image, &hs.image}) {
        for (std::size_t k = 1; k < h->size(); ++k)
          r.all_monotone = r.all_monotone && (*h)[k] > (*h)[k - 1];
        r.all_monotone = r.all_monotone && h->back() < h->front() + 1.0;
      }

      auto du = unstable_holonomy_values(sys, c, fd, grid, opt.tol, opt.n_max);
      auto ds = stable_holonomy_values(sys, c, fd, grid, opt.tol, opt.n_max);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        Eigen::Vector3d tu(eu.x, eu.y, (du.image[k] - grid[k]) / fd);
        Eigen::Vector3d ts(es.x, es.y, (ds.image[k] - grid[k]) / fd);
        Eigen::Vector3d ez(0.0, 0.0, 1.0);
        Eigen::Vector3d nu = tu.cross(ez).normalized(), ns = ts.cross(ez).normalized();
        double ang = std::acos(std::min(1.0, std::fabs(nu.dot(ns))));
        r.min_angle = std::min(r.min_angle, ang);
        r.max_angle = std::max(r.max_angle, ang);
      }
    }
  r.pass = r.all_monotone && r.max_fiber_mismatch < 1e-9 && r.min_angle >= r.angle_floor;
  return r;
}

} // namespace phlab
