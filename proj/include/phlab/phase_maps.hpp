#pragma once

// Phase-space points, the catalog of concrete skew products over a linear
// Anosov base, their derivatives, and structural validators.

#include <phlab/random.hpp>
#include <phlab/torus.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace phlab {

/// Invalid parameters or inputs (harness exit code 2).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to converge (harness exit code 3).
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct BasePoint {
  double u = 0.0;
  double v = 0.0;

  static BasePoint reduced(double u, double v) { return {wrap01(u), wrap01(v)}; }
  friend bool operator==(BasePoint, BasePoint) = default;
};

struct PhasePoint {
  BasePoint base;
  double theta = 0.0;

  static PhasePoint reduced(double u, double v, double theta)
  {
    return {BasePoint::reduced(u, v), wrap01(theta)};
  }
  friend bool operator==(PhasePoint, PhasePoint) = default;
};

/// Nearest-representative displacement b - a on the torus.
inline Vec2 torus_delta(BasePoint a, BasePoint b)
{
  return {centered(b.u - a.u), centered(b.v - a.v)};
}

inline double torus_dist(BasePoint a, BasePoint b) { return norm(torus_delta(a, b)); }

inline BasePoint translate(BasePoint a, Vec2 d) { return BasePoint::reduced(a.u + d.x, a.v + d.y); }

/// Euclidean distance on T^2 x S^1 with per-coordinate wrapping.
inline double phase_dist(const PhasePoint& a, const PhasePoint& b)
{
  double dt = circle_dist(a.theta, b.theta);
  return std::sqrt(dot(torus_delta(a.base, b.base), torus_delta(a.base, b.base)) + dt * dt);
}

using IntMatrix2 = std::array<std::array<std::int64_t, 2>, 2>;

inline IntMatrix2 multiply(const IntMatrix2& a, const IntMatrix2& b)
{
  IntMatrix2 r{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return r;
}

inline IntMatrix2 matrix_power(const IntMatrix2& m, int n)
{
  IntMatrix2 r{{{1, 0}, {0, 1}}};
  for (int i = 0; i < n; ++i)
    r = multiply(r, m);
  return r;
}

inline std::int64_t determinant(const IntMatrix2& m) { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }

/// Hyperbolic toral automorphism with its eigendata.
struct AnosovBase {
  IntMatrix2 matrix{};
  IntMatrix2 inverse{};
  std::int64_t det = 0;
  std::int64_t trace = 0;
  double eig_u = 0.0; // signed eigenvalue with |eig_u| > 1
  double eig_s = 0.0;
  double lambda_u = 0.0;
  double lambda_s = 0.0;
  Vec2 e_u;
  Vec2 e_s;

  Vec2 linear(Vec2 p) const
  {
    return {matrix[0][0] * p.x + matrix[0][1] * p.y, matrix[1][0] * p.x + matrix[1][1] * p.y};
  }
  Vec2 linear_inverse(Vec2 p) const
  {
    return {inverse[0][0] * p.x + inverse[0][1] * p.y, inverse[1][0] * p.x + inverse[1][1] * p.y};
  }
  BasePoint forward(BasePoint x) const
  {
    Vec2 r = linear({x.u, x.v});
    return BasePoint::reduced(r.x, r.y);
  }
  BasePoint backward(BasePoint x) const
  {
    Vec2 r = linear_inverse({x.u, x.v});
    return BasePoint::reduced(r.x, r.y);
  }

  /// Coordinates (s, t) with d = s e_s + t e_u.
  std::array<double, 2> eigen_coords(Vec2 d) const
  {
    double det_e = cross(e_s, e_u);
    return {cross(d, e_u) / det_e, cross(e_s, d) / det_e};
  }
};

inline AnosovBase make_anosov_base(const IntMatrix2& m)
{
  AnosovBase b;
  b.matrix = m;
  b.det = determinant(m);
  b.trace = m[0][0] + m[1][1];
  if (b.det != 1 && b.det != -1)
    throw ConfigError("base matrix must be unimodular (|det| = 1)");
  double t = static_cast<double>(b.trace);
  double disc = t * t - 4.0 * static_cast<double>(b.det);
  if (disc <= 0.0 || (b.det == 1 && std::llabs(b.trace) <= 2))
    throw ConfigError("base matrix is not hyperbolic");
  double root = std::sqrt(disc);
  double mu1 = (t + root) / 2.0;
  double mu2 = (t - root) / 2.0;
  if (std::fabs(mu1) > 1.0) {
    b.eig_u = mu1;
    b.eig_s = static_cast<double>(b.det) / mu1;
  } else {
    b.eig_u = mu2;
    b.eig_s = static_cast<double>(b.det) / mu2;
  }
  if (std::fabs(b.eig_s) >= 1.0)
    throw ConfigError("base matrix is not hyperbolic");
  b.lambda_u = std::fabs(b.eig_u);
  b.lambda_s = std::fabs(b.eig_s);
  // hyperbolic integer matrices have m[1][0] != 0
  auto eigvec = [&](double mu) {
    Vec2 e{mu - static_cast<double>(m[1][1]), static_cast<double>(m[1][0])};
    double n = norm(e);
    e = (1.0 / n) * e;
    if (e.y < 0.0 || (e.y == 0.0 && e.x < 0.0))
      e = -1.0 * e;
    return e;
  };
  b.e_u = eigvec(b.eig_u);
  b.e_s = eigvec(b.eig_s);
  b.inverse = {{{b.det * m[1][1], -b.det * m[0][1]}, {-b.det * m[1][0], b.det * m[0][0]}}};
  return b;
}

inline AnosovBase make_cat_base() { return make_anosov_base({{{2, 1}, {1, 1}}}); }

enum class FiberKind { identity, rotation, morse_smale, coupled };
enum class BasePhase { u, v };

inline constexpr double golden_rotation = 0.6180339887498949;

/// Fiber dynamics theta -> h(x, theta), handled through its lift H with
/// H(x, theta + 1) = H(x, theta) + 1.
struct FiberFamily {
  FiberKind kind = FiberKind::identity;
  double omega = 0.0;     // rotation
  double amplitude = 0.0; // morse_smale, coupled
  double coupling = 0.0;  // coupled
  int periodic_points = 2;
  BasePhase phase = BasePhase::u;

  static FiberFamily identity() { return {}; }
  static FiberFamily rotation(double omega)
  {
    FiberFamily f;
    f.kind = FiberKind::rotation;
    f.omega = omega;
    return f;
  }
  /// theta + a/(2 pi k) sin(2 pi k theta), k = s/2: s hyperbolic fixed
  /// points with multipliers 1 + a (repellers) and 1 - a (attractors).
  static FiberFamily morse_smale(double a, int s = 2)
  {
    if (s < 2 || s % 2 != 0)
      throw ConfigError("morse_smale needs an even periodic point count s >= 2");
    FiberFamily f;
    f.kind = FiberKind::morse_smale;
    f.amplitude = a;
    f.periodic_points = s;
    return f;
  }
  static FiberFamily coupled(double a, double b, BasePhase phase = BasePhase::u)
  {
    FiberFamily f;
    f.kind = FiberKind::coupled;
    f.amplitude = a;
    f.coupling = b;
    f.phase = phase;
    return f;
  }

  int modes() const { return periodic_points / 2; }

  double lift(BasePoint x, double theta) const
  {
    switch (kind) {
    case FiberKind::identity:
      return theta;
    case FiberKind::rotation:
      return theta + omega;
    case FiberKind::morse_smale: {
      double k = modes();
      return theta + amplitude / (two_pi * k) * std::sin(two_pi * k * theta);
    }
    case FiberKind::coupled: {
      double w = phase == BasePhase::u ? x.u : x.v;
      return theta + amplitude / two_pi * std::sin(two_pi * theta) + coupling / two_pi * std::sin(two_pi * w);
    }
    }
    return theta;
  }

  double d_theta(BasePoint, double theta) const
  {
    switch (kind) {
    case FiberKind::identity:
    case FiberKind::rotation:
      return 1.0;
    case FiberKind::morse_smale:
      return 1.0 + amplitude * std::cos(two_pi * modes() * theta);
    case FiberKind::coupled:
      return 1.0 + amplitude * std::cos(two_pi * theta);
    }
    return 1.0;
  }

  /// lift and d_theta from one shared sine/cosine evaluation.
  double lift_with_slope(BasePoint x, double theta, double& slope) const
  {
    switch (kind) {
    case FiberKind::identity:
      slope = 1.0;
      return theta;
    case FiberKind::rotation:
      slope = 1.0;
      return theta + omega;
    case FiberKind::morse_smale: {
      double k = modes();
      double arg = two_pi * k * theta;
      double sn = std::sin(arg), cs = std::cos(arg);
      slope = 1.0 + amplitude * cs;
      return theta + amplitude / (two_pi * k) * sn;
    }
    case FiberKind::coupled: {
      double arg = two_pi * theta;
      double sn = std::sin(arg), cs = std::cos(arg);
      double w = phase == BasePhase::u ? x.u : x.v;
      slope = 1.0 + amplitude * cs;
      return theta + amplitude / two_pi * sn + coupling / two_pi * std::sin(two_pi * w);
    }
    }
    slope = 1.0;
    return theta;
  }

  /// Partial derivatives of H with respect to (u, v).
  Vec2 d_base(BasePoint x, double) const
  {
    if (kind != FiberKind::coupled)
      return {};
    if (phase == BasePhase::u)
      return {coupling * std::cos(two_pi * x.u), 0.0};
    return {0.0, coupling * std::cos(two_pi * x.v)};
  }
};

/// Non-skew variant: u' gets an extra eps * sin(2 pi theta).
struct BaseCoupling {
  double eps = 0.0;
};

/// Solve F(t) = z for increasing F given a bracket F(lo) <= z <= F(hi).
/// Newton steps are accepted only inside the current bracket; otherwise bisect.
template <class Fn, class Slope>
double invert_increasing(const Fn& F, const Slope& dF, double z, double lo, double hi, double tol = 1e-13,
                         int max_iter = 200)
{
  if (lo == hi)
    return lo;
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    double r = F(t) - z;
    if (r == 0.0)
      return t;
    if (r < 0.0)
      lo = t;
    else
      hi = t;
    double s = dF(t);
    double next = s > 0.0 ? t - r / s : lo - 1.0;
    if (!(next > lo && next < hi))
      next = 0.5 * (lo + hi);
    if (std::fabs(next - t) <= 0.25 * tol || hi - lo <= tol)
      return next;
    t = next;
  }
  throw NumericError("monotone inversion did not converge");
}

/// Solve F(t) = z for an increasing lift with F(t + 1) = F(t) + 1.
template <class Lift, class Slope>
double invert_degree_one(const Lift& F, const Slope& dF, double z, double tol = 1e-13, int max_iter = 200)
{
  double lo = z, hi = z;
  for (int k = 0; F(lo) > z; ++k) {
    if (k > 64)
      throw NumericError("fiber inversion: no bracket (map is not degree one)");
    lo -= 1.0;
  }
  for (int k = 0; F(hi) < z; ++k) {
    if (k > 64)
      throw NumericError("fiber inversion: no bracket (map is not degree one)");
    hi += 1.0;
  }
  return invert_increasing(F, dF, z, lo, hi, tol, max_iter);
}

struct PartialHyperbolicityReport {
  bool pass = false;
  bool unstable_cone_invariant = false;
  bool stable_cone_invariant = false;
  double expansion_rate = 0.0;    // min per-step growth of unstable-cone vectors
  double max_unstable_rate = 0.0; // max one-step growth of unstable-cone vectors
  double contraction_rate = 0.0;  // max per-step shrink of stable-cone vectors
  double center_min = 0.0;
  double center_max = 0.0;
  double domination_ratio = 0.0; // image aperture / cone aperture, < 1 when cones are strictly invariant
};

class SystemSpec {
public:
  AnosovBase base;
  FiberFamily fiber;
  std::optional<BaseCoupling> base_coupling;
  std::string label;

  bool is_skew() const { return !base_coupling.has_value(); }

  double fiber_lift(BasePoint x, double theta) const { return fiber.lift(x, theta); }

  /// Preimage of the lift value z under H(x, .).
  double fiber_inverse_lift(BasePoint x, double z) const
  {
    if (fiber.kind == FiberKind::identity)
      return z;
    if (fiber.kind == FiberKind::rotation)
      return z - fiber.omega;
    return invert_degree_one([&](double t) { return fiber.lift(x, t); },
                             [&](double t) { return fiber.d_theta(x, t); }, z);
  }

  PhasePoint apply(const PhasePoint& p) const
  {
    Vec2 r = base.linear({p.base.u, p.base.v});
    if (base_coupling)
      r.x += base_coupling->eps * std::sin(two_pi * p.theta);
    return PhasePoint::reduced(r.x, r.y, fiber.lift(p.base, p.theta));
  }

  PhasePoint apply_inverse(const PhasePoint& p) const
  {
    if (is_skew()) {
      BasePoint x = base.backward(p.base);
      return {x, wrap01(fiber_inverse_lift(x, p.theta))};
    }
    double eps = base_coupling->eps;
    auto base_of = [&](double t) {
      Vec2 r = base.linear_inverse({p.base.u - eps * std::sin(two_pi * t), p.base.v});
      return BasePoint::reduced(r.x, r.y);
    };
    auto G = [&](double t) { return fiber.lift(base_of(t), t); };
    auto dG = [&](double t) {
      BasePoint x = base_of(t);
      Vec2 dx = base.linear_inverse({-eps * two_pi * std::cos(two_pi * t), 0.0});
      return fiber.d_theta(x, t) + dot(fiber.d_base(x, t), dx);
    };
    double t = invert_degree_one(G, dG, p.theta);
    return {base_of(t), wrap01(t)};
  }

  double center_derivative(const PhasePoint& p) const { return fiber.d_theta(p.base, p.theta); }

  /// apply(p), also storing center_derivative(p).
  PhasePoint advance(const PhasePoint& p, double& center_slope) const
  {
    Vec2 r = base.linear({p.base.u, p.base.v});
    if (base_coupling)
      r.x += base_coupling->eps * std::sin(two_pi * p.theta);
    double t = fiber.lift_with_slope(p.base, p.theta, center_slope);
    return PhasePoint::reduced(r.x, r.y, t);
  }

  /// Derivative of the forward map in (u, v, theta) coordinates.
  Eigen::Matrix3d jacobian(const PhasePoint& p) const
  {
    Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
    J(0, 0) = static_cast<double>(base.matrix[0][0]);
    J(0, 1) = static_cast<double>(base.matrix[0][1]);
    J(1, 0) = static_cast<double>(base.matrix[1][0]);
    J(1, 1) = static_cast<double>(base.matrix[1][1]);
    if (base_coupling)
      J(0, 2) = base_coupling->eps * two_pi * std::cos(two_pi * p.theta);
    Vec2 db = fiber.d_base(p.base, p.theta);
    J(2, 0) = db.x;
    J(2, 1) = db.y;
    J(2, 2) = fiber.d_theta(p.base, p.theta);
    return J;
  }
};

/// Smallest value of the fiber derivative (and, for non-skew systems, of
/// the derivative of the implicit inversion equation) on a validation grid.
inline double min_fiber_slope(const FiberFamily& fiber, const std::optional<BaseCoupling>& coupling,
                              const AnosovBase& base, int base_grid = 16, int theta_grid = 4096)
{
  double lowest = INFINITY;
  for (int i = 0; i < base_grid; ++i)
    for (int j = 0; j < base_grid; ++j) {
      BasePoint x{(i + 0.5) / base_grid, (j + 0.5) / base_grid};
      for (int k = 0; k < theta_grid; ++k) {
        double t = static_cast<double>(k) / theta_grid;
        double s = fiber.d_theta(x, t);
        if (coupling) {
          Vec2 dx = base.linear_inverse({-coupling->eps * two_pi * std::cos(two_pi * t), 0.0});
          s += dot(fiber.d_base(x, t), dx);
        }
        lowest = std::fmin(lowest, s);
      }
      if (fiber.kind != FiberKind::coupled && !coupling)
        return lowest; // fiber does not depend on the base point
    }
  return lowest;
}

inline SystemSpec make_system(const AnosovBase& base, const FiberFamily& fiber,
                              std::optional<BaseCoupling> base_coupling = std::nullopt, std::string label = {})
{
  if (!std::isfinite(fiber.amplitude) || !std::isfinite(fiber.coupling) || !std::isfinite(fiber.omega))
    throw ConfigError("fiber parameters must be finite");
  if (min_fiber_slope(fiber, base_coupling, base) <= 0.0)
    throw ConfigError("fiber map is not a diffeomorphism: d(theta) h <= 0 on the validation grid");
  SystemSpec sys;
  sys.base = base;
  sys.fiber = fiber;
  sys.base_coupling = base_coupling;
  sys.label = std::move(label);
  return sys;
}

/// Cone test over `iterates` steps along random orbits. Unstable-cone probes
/// are pushed forward, stable-cone probes backward; each probe starts on the
/// cone boundary or its axis.
inline PartialHyperbolicityReport validate_partial_hyperbolicity(const SystemSpec& sys, double cone_angle,
                                                                 int samples, std::uint64_t seed = 0,
                                                                 int iterates = 50)
{
  if (!(cone_angle > 0.0 && cone_angle < std::numbers::pi / 4))
    throw ConfigError("cone angle must lie in (0, pi/4)");
  if (samples < 1)
    throw ConfigError("samples must be positive");
  using Eigen::Vector3d;
  const Vector3d eu(sys.base.e_u.x, sys.base.e_u.y, 0.0);
  const Vector3d es(sys.base.e_s.x, sys.base.e_s.y, 0.0);
  const Vector3d ec(0.0, 0.0, 1.0);
  const double tan_a = std::tan(cone_angle);

  auto probes = [&](const Vector3d& axis, const Vector3d& side1, const Vector3d& side2) {
    std::vector<Vector3d> out{axis};
    for (int k = 0; k < 8; ++k) {
      double phi = two_pi * k / 8.0;
      out.push_back(axis + tan_a * (std::cos(phi) * side1 + std::sin(phi) * side2));
    }
    for (auto& v : out)
      v.normalize();
    return out;
  };
  auto aperture = [](const Vector3d& v, const Vector3d& axis) {
    double along = std::fabs(v.dot(axis));
    return (v - v.dot(axis) * axis).norm() / along;
  };

  PartialHyperbolicityReport rep;
  rep.unstable_cone_invariant = true;
  rep.stable_cone_invariant = true;
  rep.expansion_rate = INFINITY;
  rep.max_unstable_rate = 0.0;
  rep.contraction_rate = 0.0;
  rep.center_min = INFINITY;
  rep.center_max = 0.0;
  rep.domination_ratio = 0.0;

  for (int s = 0; s < samples; ++s) {
    Stream rng(seed, "partial_hyperbolicity", static_cast<std::uint64_t>(s));
    PhasePoint p0 = PhasePoint::reduced(rng.uniform(), rng.uniform(), rng.uniform());

    for (Vector3d v : probes(eu, es, ec)) {
      PhasePoint p = p0;
      double log_growth = 0.0;
      for (int j = 0; j < iterates; ++j) {
        Vector3d w = sys.jacobian(p) * v;
        double g = w.norm();
        rep.max_unstable_rate = std::fmax(rep.max_unstable_rate, g);
        log_growth += std::log(g);
        v = w / g;
        double ap = aperture(v, eu);
        rep.domination_ratio = std::fmax(rep.domination_ratio, ap / tan_a);
        if (ap > tan_a * (1.0 + 1e-12))
          rep.unstable_cone_invariant = false;
        rep.center_min = std::fmin(rep.center_min, (sys.jacobian(p) * ec).norm());
        rep.center_max = std::fmax(rep.center_max, (sys.jacobian(p) * ec).norm());
        p = sys.apply(p);
      }
      rep.expansion_rate = std::fmin(rep.expansion_rate, std::exp(log_growth / iterates));
    }

    for (Vector3d v : probes(es, eu, ec)) {
      PhasePoint p = p0;
      double log_growth = 0.0;
      for (int j = 0; j < iterates; ++j) {
        PhasePoint q = sys.apply_inverse(p);
        Vector3d w = sys.jacobian(q).inverse() * v;
        double g = w.norm();
        log_growth += std::log(g);
        v = w / g;
        double ap = aperture(v, es);
        rep.domination_ratio = std::fmax(rep.domination_ratio, ap / tan_a);
        if (ap > tan_a * (1.0 + 1e-12))
          rep.stable_cone_invariant = false;
        p = q;
      }
      rep.contraction_rate = std::fmax(rep.contraction_rate, std::exp(-log_growth / iterates));
    }
  }
  rep.pass = rep.unstable_cone_invariant && rep.stable_cone_invariant && rep.domination_ratio < 1.0 &&
             rep.expansion_rate > rep.center_max && rep.contraction_rate < rep.center_min;
  return rep;
}

// ---------------------------------------------------------------------------
// Cylinder example: S^1 x [0,1] with f(x, t) = (d x + eps sin(2 pi x) t, g(t)).

struct CylinderPoint {
  double x = 0.0; // S^1 coordinate in [0,1)
  double t = 0.0; // interval coordinate in [0,1]
};

struct CylinderSystem {
  int base_degree = 2;
  double c = 0.0;
  double eps = 0.0;

  double g(double t) const { return t - c * t * (1.0 - t); }
  double g_prime(double t) const { return 1.0 - c + 2.0 * c * t; }

  /// Lift of the restriction to the circle {t = level}.
  double boundary_lift(double x, double level) const
  {
    return base_degree * x + eps * std::sin(two_pi * x) * level;
  }
  double boundary_slope(double x, double level) const
  {
    return base_degree + two_pi * eps * std::cos(two_pi * x) * level;
  }
  double horizontal_derivative(const CylinderPoint& p) const { return boundary_slope(p.x, p.t); }

  CylinderPoint apply(const CylinderPoint& p) const
  {
    double t = std::clamp(p.t, 0.0, 1.0);
    return {wrap01(boundary_lift(p.x, t)), std::clamp(g(t), 0.0, 1.0)};
  }
};

inline CylinderSystem make_cylinder(double c, double eps, int base_degree = 2)
{
  if (base_degree < 2)
    throw ConfigError("cylinder base degree must be >= 2");
  if (!(c > 0.0 && c < 1.0))
    throw ConfigError("cylinder parameter c must lie in (0,1) so that 0 < g' < 2");
  if (!(eps >= 0.0) || !std::isfinite(eps))
    throw ConfigError("cylinder eps must be >= 0");
  CylinderSystem cyl{base_degree, c, eps};
  for (int i = 0; i <= 1024; ++i) {
    double t = i / 1024.0;
    double gp = cyl.g_prime(t);
    if (!(gp > 0.0 && gp < 2.0))
      throw ConfigError("g' leaves (0,2)");
    if (i > 0 && i < 1024 && !(cyl.g(t) < t))
      throw ConfigError("g(t) < t violated");
  }
  return cyl;
}

} // namespace phlab
