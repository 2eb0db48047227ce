#pragma once

#include <phlab/phase_maps.hpp>

#include <vector>

namespace phlab {

/// A segment in the base, tangent to the unstable cone, carrying a graph
/// theta(t) over its arclength parameter.
struct UDisk {
  PhasePoint anchor;
  Vec2 direction;
  double length = 0.1;
  std::vector<double> theta_profile; // values at equally spaced t nodes; empty = constant anchor.theta
  int n_samples = 1000;

  double theta_at(double t) const
  {
    if (theta_profile.size() < 2)
      return theta_profile.empty() ? anchor.theta : theta_profile.front();
    double s = t / length * static_cast<double>(theta_profile.size() - 1);
    std::size_t i = std::min(static_cast<std::size_t>(std::max(0.0, s)), theta_profile.size() - 2);
    double f = s - static_cast<double>(i);
    return theta_profile[i] + f * (theta_profile[i + 1] - theta_profile[i]);
  }

  double theta_slope(double t) const
  {
    if (theta_profile.size() < 2)
      return 0.0;
    double s = t / length * static_cast<double>(theta_profile.size() - 1);
    std::size_t i = std::min(static_cast<std::size_t>(std::max(0.0, s)), theta_profile.size() - 2);
    return (theta_profile[i + 1] - theta_profile[i]) * static_cast<double>(theta_profile.size() - 1) / length;
  }

  PhasePoint point_at(double t) const
  {
    return PhasePoint::reduced(anchor.base.u + t * direction.x, anchor.base.v + t * direction.y, theta_at(t));
  }
};

inline void validate_udisk(const UDisk& d, const AnosovBase& base, double cone_angle = 0.2)
{
  if (!(d.length > 0.0))
    throw ConfigError("u-disk length must be positive");
  if (d.n_samples < 1)
    throw ConfigError("u-disk needs at least one sample");
  if (std::fabs(norm(d.direction) - 1.0) > 1e-9)
    throw ConfigError("u-disk direction must be a unit vector");
  if (line_angle(d.direction, base.e_u) > cone_angle)
    throw ConfigError("u-disk direction lies outside the unstable cone");
}

/// Unstable segment through `anchor` along e_u.
inline UDisk make_udisk(const AnosovBase& base, PhasePoint anchor, double length = 0.1, int n_samples = 1000)
{
  UDisk d;
  d.anchor = anchor;
  d.direction = base.e_u;
  d.length = length;
  d.n_samples = n_samples;
  return d;
}

/// Arclength parameters of the samples: cell midpoints, or one uniform draw
/// per cell when jitter_seed is set.
inline std::vector<double> disk_parameters(const UDisk& d, std::optional<std::uint64_t> jitter_seed = std::nullopt)
{
  std::vector<double> ts(static_cast<std::size_t>(d.n_samples));
  for (int i = 0; i < d.n_samples; ++i) {
    double off = 0.5;
    if (jitter_seed) {
      Stream rng(*jitter_seed, "udisk_jitter", static_cast<std::uint64_t>(i));
      off = rng.uniform();
    }
    ts[static_cast<std::size_t>(i)] = (i + off) / d.n_samples * d.length;
  }
  return ts;
}

inline std::vector<PhasePoint> disk_samples(const UDisk& d, std::optional<std::uint64_t> jitter_seed = std::nullopt)
{
  std::vector<PhasePoint> pts;
  pts.reserve(static_cast<std::size_t>(d.n_samples));
  for (double t : disk_parameters(d, jitter_seed))
    pts.push_back(d.point_at(t));
  return pts;
}

} // namespace phlab
