#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>

namespace phlab {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// floor(x) through integer truncation, exact for |x| < 2^52.
inline double fast_floor(double x)
{
  if (!(std::fabs(x) < 4.5e15))
    return std::floor(x);
  double t = static_cast<double>(static_cast<long long>(x));
  return t > x ? t - 1.0 : t;
}

/// Reduce a real into [0,1).
inline double wrap01(double x)
{
  double r = x - fast_floor(x);
  return r >= 1.0 ? 0.0 : r;
}

/// Signed representative of x mod 1 in [-1/2, 1/2).
inline double centered(double x)
{
  return x - fast_floor(x + 0.5);
}

/// Distance on R/Z: min(|d|, 1-|d|).
inline double circle_dist(double a, double b)
{
  double d = std::fabs(wrap01(a) - wrap01(b));
  return std::fmin(d, 1.0 - d);
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Unsigned angle in [0, pi/2] between the lines spanned by a and b.
inline double line_angle(Vec2 a, Vec2 b)
{
  double c = std::fabs(dot(a, b)) / (norm(a) * norm(b));
  return std::acos(std::fmin(1.0, c));
}

/// Neumaier-compensated running sum. Adding the same sequence in the same
/// order always gives the same bits.
class CompensatedSum {
public:
  void add(double x)
  {
    double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_total(std::span<const double> xs)
{
  CompensatedSum s;
  for (double x : xs)
    s.add(x);
  return s.value();
}

struct MeanAndError {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean and standard error of the mean, both via compensated sums.
inline MeanAndError mean_and_error(std::span<const double> xs)
{
  MeanAndError out;
  if (xs.empty())
    return out;
  double n = static_cast<double>(xs.size());
  out.mean = compensated_total(xs) / n;
  if (xs.size() < 2)
    return out;
  CompensatedSum ss;
  for (double x : xs)
    ss.add((x - out.mean) * (x - out.mean));
  out.std_error = std::sqrt(ss.value() / (n - 1.0)) / std::sqrt(n);
  return out;
}

} // namespace phlab
