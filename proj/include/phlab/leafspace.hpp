#pragma once

// Quotient dynamics on the leaf space of the center foliation. For skew
// products the leaf space is the base torus and f_c is the Anosov base.

#include <phlab/phase_maps.hpp>
#include <phlab/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <tuple>
#include <span>
#include <vector>

namespace phlab {

using LeafPoint = BasePoint;

/// Symmetric sup-inf (Hausdorff-type) sum between two sampled leaves.
inline double sup_inf_sum(std::span<const PhasePoint> a, std::span<const PhasePoint> b)
{
  auto directed = [](std::span<const PhasePoint> p, std::span<const PhasePoint> q) {
    double worst = 0.0;
    for (const auto& x : p) {
      double best = INFINITY;
      for (const auto& y : q)
        best = std::min(best, phase_dist(x, y));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return directed(a, b) + directed(b, a);
}

/// d_c between the center leaves over two base points, each sampled at
/// `fiber_samples` evenly spaced fiber points.
inline double dc_distance(const SystemSpec& sys, LeafPoint a, LeafPoint b, int fiber_samples = 64)
{
  if (!sys.is_skew())
    throw ConfigError("leaf distance is implemented for skew products");
  if (fiber_samples < 64)
    throw ConfigError("leaves must be sampled with at least 64 fiber points");
  std::vector<PhasePoint> la, lb;
  for (int i = 0; i < fiber_samples; ++i) {
    double t = static_cast<double>(i) / fiber_samples;
    la.push_back({a, t});
    lb.push_back({b, t});
  }
  return sup_inf_sum(la, lb);
}

/// [xi1 xi2]: the stable line through xi1 meets the unstable line through
/// xi2 at xi1 + s e_s, where s is the e_s-coordinate of xi2 - xi1.
inline LeafPoint bracket(const AnosovBase& base, LeafPoint xi1, LeafPoint xi2, double delta = 0.2)
{
  Vec2 d = torus_delta(xi1, xi2);
  if (norm(d) > delta)
    throw ConfigError("bracket points are farther apart than the local product radius");
  auto st = base.eigen_coords(d);
  return translate(xi1, st[0] * base.e_s);
}

// ---------------------------------------------------------------------------
// Periodic points

/// Exact rational periodic point (num_u / den, num_v / den).
struct PeriodicPoint {
  std::int64_t num_u = 0;
  std::int64_t num_v = 0;
  std::int64_t den = 1;

  LeafPoint point() const
  {
    return {static_cast<double>(num_u) / static_cast<double>(den), static_cast<double>(num_v) / static_cast<double>(den)};
  }
  auto operator<=>(const PeriodicPoint&) const = default;
};

inline std::int64_t mod_floor(std::int64_t a, std::int64_t m)
{
  std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

/// M^n - I.
inline IntMatrix2 period_matrix(const AnosovBase& base, int n)
{
  IntMatrix2 a = matrix_power(base.matrix, n);
  a[0][0] -= 1;
  a[1][1] -= 1;
  return a;
}

inline std::int64_t periodic_count(const AnosovBase& base, int n)
{
  if (n < 1 || n > 12)
    throw ConfigError("period must lie in [1, 12]");
  std::int64_t d = determinant(period_matrix(base, n));
  return d < 0 ? -d : d;
}

struct ExtendedGcd {
  std::int64_t g, x, y; // g = x a + y b, g >= 0
};

inline ExtendedGcd extended_gcd(std::int64_t a, std::int64_t b)
{
  std::int64_t x0 = 1, y0 = 0, x1 = 0, y1 = 1;
  while (b != 0) {
    std::int64_t q = a / b;
    std::tie(a, b) = std::pair{b, a - q * b};
    std::tie(x0, x1) = std::pair{x1, x0 - q * x1};
    std::tie(y0, y1) = std::pair{y1, y0 - q * y1};
  }
  if (a < 0)
    return {-a, -x0, -y0};
  return {a, x0, y0};
}

/// Lower-triangular Hermite normal form [[h00, 0], [h10, h11]] of the
/// lattice spanned by the columns of a.
inline IntMatrix2 column_hnf(const IntMatrix2& a)
{
  std::int64_t p = a[0][0], q = a[0][1];
  IntMatrix2 h{};
  if (p == 0 && q == 0)
    throw ConfigError("singular lattice");
  auto e = extended_gcd(p, q);
  std::int64_t g = e.g;
  // col0' = x c0 + y c1, col1' = (-q/g) c0 + (p/g) c1
  h[0][0] = g;
  h[1][0] = e.x * a[1][0] + e.y * a[1][1];
  h[0][1] = 0;
  h[1][1] = (-q / g) * a[1][0] + (p / g) * a[1][1];
  if (h[1][1] < 0)
    h[1][1] = -h[1][1];
  if (h[1][1] == 0)
    throw ConfigError("singular lattice");
  h[1][0] = mod_floor(h[1][0], h[1][1]);
  return h;
}

/// All v in T^2 with (M^n - I) v = 0 mod Z^2, in lexicographic order. The
/// solutions are adj(A) k / det(A) for k over coset representatives of
/// Z^2 / A Z^2, read off the Hermite normal form.
inline std::vector<PeriodicPoint> periodic_base_points_exact(const AnosovBase& base, int n)
{
  if (n < 1 || n > 12)
    throw ConfigError("period must lie in [1, 12]");
  IntMatrix2 a = period_matrix(base, n);
  std::int64_t det = determinant(a);
  std::int64_t D = det < 0 ? -det : det;
  IntMatrix2 adj{{{a[1][1], -a[0][1]}, {-a[1][0], a[0][0]}}};
  if (det < 0)
    for (auto& row : adj)
      for (auto& x : row)
        x = -x;
  IntMatrix2 h = column_hnf(a);
  std::vector<PeriodicPoint> pts;
  pts.reserve(static_cast<std::size_t>(D));
  for (std::int64_t i = 0; i < h[0][0]; ++i)
    for (std::int64_t j = 0; j < h[1][1]; ++j) {
      PeriodicPoint p;
      p.den = D;
      p.num_u = mod_floor(adj[0][0] * i + adj[0][1] * j, D);
      p.num_v = mod_floor(adj[1][0] * i + adj[1][1] * j, D);
      pts.push_back(p);
    }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (static_cast<std::int64_t>(pts.size()) != D)
    throw NumericError("periodic point enumeration lost coset representatives");
  return pts;
}

/// Cross-check by scanning every (p/D, q/D), D = |det(M^n - I)|, through n
/// integer steps mod D. Cost O(n D^2); keep n small.
inline std::vector<PeriodicPoint> periodic_base_points_scan(const AnosovBase& base, int n)
{
  std::int64_t D = periodic_count(base, n);
  if (D > 4096)
    throw ConfigError("brute-force scan is limited to |det(M^n - I)| <= 4096");
  const IntMatrix2& m = base.matrix;
  std::vector<PeriodicPoint> out;
  for (std::int64_t p = 0; p < D; ++p)
    for (std::int64_t q = 0; q < D; ++q) {
      std::int64_t u = p, v = q;
      for (int k = 0; k < n; ++k) {
        std::int64_t nu = mod_floor(m[0][0] * u + m[0][1] * v, D);
        v = mod_floor(m[1][0] * u + m[1][1] * v, D);
        u = nu;
      }
      if (u == p && v == q)
        out.push_back({p, q, D});
    }
  return out;
}

inline std::vector<LeafPoint> periodic_base_points(const AnosovBase& base, int n)
{
  std::vector<LeafPoint> out;
  for (const auto& p : periodic_base_points_exact(base, n))
    out.push_back(p.point());
  return out;
}

// ---------------------------------------------------------------------------
// Attractor bookkeeping

struct AttractorReport {
  int attractor_count = 1;
  bool whole_leaf_space = true;
  bool transitive = true;
  int grid = 0;
  long orbit_length = 0;
  std::vector<long> cell_counts; // row-major, u index first
  int cells_visited = 0;
  double max_relative_deviation = 0.0;
  double deviation_bound = 0.0; // 3 / sqrt(expected count per cell)
  double chi_square = 0.0;
  bool equidistributed = false;
};

inline std::vector<long> orbit_cell_counts(const AnosovBase& base, LeafPoint start, long length, int m)
{
  std::vector<long> counts(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0);
  LeafPoint x = start;
  for (long j = 0; j < length; ++j) {
    int i = std::min(static_cast<int>(x.u * m), m - 1);
    int k = std::min(static_cast<int>(x.v * m), m - 1);
    ++counts[static_cast<std::size_t>(i) * static_cast<std::size_t>(m) + static_cast<std::size_t>(k)];
    x = base.forward(x);
  }
  return counts;
}

/// Transitive hyperbolic base: a single attractor, the whole leaf space,
/// plus cell statistics of the orbit of `start`.
inline AttractorReport attractor_report(const AnosovBase& base, LeafPoint start, long length = 1000000, int m = 16)
{
  if (length < 1 || m < 1)
    throw ConfigError("attractor report needs a positive orbit length and grid");
  AttractorReport r;
  r.transitive = std::llabs(base.trace) > 2 && std::llabs(base.det) == 1;
  if (!r.transitive)
    throw ConfigError("base is not a hyperbolic automorphism");
  r.grid = m;
  r.orbit_length = length;
  r.cell_counts = orbit_cell_counts(base, start, length, m);
  double expected = static_cast<double>(length) / static_cast<double>(r.cell_counts.size());
  for (long c : r.cell_counts) {
    r.cells_visited += c > 0 ? 1 : 0;
    double dev = (static_cast<double>(c) - expected) / expected;
    r.max_relative_deviation = std::max(r.max_relative_deviation, std::fabs(dev));
    r.chi_square += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  }
  r.deviation_bound = 3.0 / std::sqrt(expected);
  r.equidistributed = r.max_relative_deviation < r.deviation_bound;
  return r;
}

/// Geometric-mean per-step contraction of pairs on common stable lines,
/// iterated directly under the base map.
inline double stable_contraction_rate(const AnosovBase& base, int pairs, int steps, std::uint64_t seed,
                                      double offset = 1e-3)
{
  if (pairs < 1 || steps < 1 || !(offset > 0.0))
    throw ConfigError("contraction rate needs pairs >= 1, steps >= 1, offset > 0");
  double total = 0.0;
  for (int i = 0; i < pairs; ++i) {
    Stream rng(seed, "leafspace", static_cast<std::uint64_t>(i));
    LeafPoint x{rng.uniform(), rng.uniform()};
    LeafPoint y = translate(x, offset * base.e_s);
    for (int j = 0; j < steps; ++j) {
      x = base.forward(x);
      y = base.forward(y);
    }
    total += std::log(torus_dist(x, y) / offset) / steps;
  }
  return std::exp(total / pairs);
}

} // namespace phlab
