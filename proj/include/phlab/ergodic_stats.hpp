#pragma once

// Orbit statistics: Birkhoff averages, center Lyapunov exponents, the
// mostly-contracting disk test, and hyperbolic times.

#include <phlab/parallel.hpp>
#include <phlab/phase_maps.hpp>
#include <phlab/udisk.hpp>

#include <algorithm>
#include <concepts>
#include <optional>
#include <string>
#include <vector>

namespace phlab {

/// Anything with a forward map and a positive center derivative.
template <class S>
concept CenterSystem = requires(const S& s, const PhasePoint& p) {
  { s.apply(p) } -> std::convertible_to<PhasePoint>;
  { s.center_derivative(p) } -> std::convertible_to<double>;
};

/// One forward step that also reports the center derivative at p.
template <CenterSystem S>
PhasePoint advance(const S& sys, const PhasePoint& p, double& center_slope)
{
  if constexpr (requires { sys.advance(p, center_slope); }) {
    return sys.advance(p, center_slope);
  } else {
    center_slope = sys.center_derivative(p);
    return sys.apply(p);
  }
}

/// The k-th iterate of a system, as a system in its own right.
template <CenterSystem S>
struct Power {
  const S* inner = nullptr;
  int k = 1;

  PhasePoint apply(const PhasePoint& p) const
  {
    PhasePoint q = p;
    for (int i = 0; i < k; ++i)
      q = inner->apply(q);
    return q;
  }
  double center_derivative(const PhasePoint& p) const
  {
    double d = 1.0;
    PhasePoint q = p;
    for (int i = 0; i < k; ++i) {
      d *= inner->center_derivative(q);
      q = inner->apply(q);
    }
    return d;
  }
};

template <CenterSystem S>
Power<S> power(const S& s, int k)
{
  return Power<S>{&s, k};
}

/// Sum of logs of positive factors. Factors are multiplied in blocks and one
/// log is taken per block; the block boundaries depend only on the count.
class LogProductSum {
public:
  void add(double factor)
  {
    prod_ *= factor;
    if (++pending_ == 32 || prod_ > 1e150 || prod_ < 1e-150)
      flush();
  }
  double value() const
  {
    CompensatedSum s = sum_;
    if (pending_ > 0)
      s.add(std::log(prod_));
    return s.value();
  }

private:
  void flush()
  {
    sum_.add(std::log(prod_));
    prod_ = 1.0;
    pending_ = 0;
  }

  CompensatedSum sum_;
  double prod_ = 1.0;
  int pending_ = 0;
};

// ---------------------------------------------------------------------------
// Observables

enum class ObservableKind { constant, cosine, sine, base_cell };

struct Observable {
  ObservableKind kind = ObservableKind::constant;
  int mode = 1;      // Fourier mode k
  int partition = 1; // m for an m x m base partition
  int cell_i = 0;
  int cell_j = 0;
  std::string name;
};

/// Bounded test functions, evaluated together so Fourier modes share one
/// sin/cos evaluation.
class ObservableSet {
public:
  ObservableSet() = default;
  explicit ObservableSet(std::vector<Observable> obs) : obs_(std::move(obs))
  {
    for (const auto& o : obs_) {
      if ((o.kind == ObservableKind::cosine || o.kind == ObservableKind::sine) && o.mode < 1)
        throw ConfigError("Fourier mode must be >= 1");
      if (o.kind == ObservableKind::base_cell &&
          (o.partition < 1 || o.cell_i < 0 || o.cell_j < 0 || o.cell_i >= o.partition || o.cell_j >= o.partition))
        throw ConfigError("base cell outside its partition");
      if (o.kind == ObservableKind::cosine || o.kind == ObservableKind::sine)
        max_mode_ = std::max(max_mode_, o.mode);
    }
  }

  static ObservableSet constant_one() { return ObservableSet({{ObservableKind::constant, 1, 1, 0, 0, "one"}}); }

  /// cos/sin(2 pi k theta) for k = 1..modes, then the listed cells of an
  /// m x m base partition.
  static ObservableSet signature(int modes = 3, int partition = 2,
                                 std::vector<std::pair<int, int>> cells = {{0, 0}, {1, 1}})
  {
    std::vector<Observable> obs;
    for (int k = 1; k <= modes; ++k) {
      obs.push_back({ObservableKind::cosine, k, 1, 0, 0, "cos" + std::to_string(k)});
      obs.push_back({ObservableKind::sine, k, 1, 0, 0, "sin" + std::to_string(k)});
    }
    for (auto [i, j] : cells)
      obs.push_back({ObservableKind::base_cell, 1, partition, i, j,
                     "cell" + std::to_string(i) + "_" + std::to_string(j)});
    return ObservableSet(std::move(obs));
  }

  std::size_t size() const { return obs_.size(); }
  const std::vector<Observable>& items() const { return obs_; }

  void evaluate(const PhasePoint& p, std::span<double> out) const
  {
    double c[9], s[9];
    double* cs = c;
    double* sn = s;
    std::vector<double> cbig, sbig;
    if (max_mode_ > 8) {
      cbig.resize(static_cast<std::size_t>(max_mode_) + 1);
      sbig.resize(static_cast<std::size_t>(max_mode_) + 1);
      cs = cbig.data();
      sn = sbig.data();
    }
    if (max_mode_ > 0) {
      cs[1] = std::cos(two_pi * p.theta);
      sn[1] = std::sin(two_pi * p.theta);
      for (int k = 2; k <= max_mode_; ++k) {
        cs[k] = cs[k - 1] * cs[1] - sn[k - 1] * sn[1];
        sn[k] = sn[k - 1] * cs[1] + cs[k - 1] * sn[1];
      }
    }
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      const Observable& o = obs_[i];
      switch (o.kind) {
      case ObservableKind::constant:
        out[i] = 1.0;
        break;
      case ObservableKind::cosine:
        out[i] = cs[o.mode];
        break;
      case ObservableKind::sine:
        out[i] = sn[o.mode];
        break;
      case ObservableKind::base_cell: {
        int ci = std::min(static_cast<int>(p.base.u * o.partition), o.partition - 1);
        int cj = std::min(static_cast<int>(p.base.v * o.partition), o.partition - 1);
        out[i] = (ci == o.cell_i && cj == o.cell_j) ? 1.0 : 0.0;
        break;
      }
      }
    }
  }

private:
  std::vector<Observable> obs_;
  int max_mode_ = 0;
};

// ---------------------------------------------------------------------------
// Birkhoff averages and exponents

struct OrbitStats {
  std::vector<double> average;      // over the whole window
  std::vector<double> first_half;   // over [burn_in, burn_in + n/2)
  std::vector<double> second_half;  // over the rest
  double exponent = 0.0;            // center exponent over the window
  PhasePoint end;

  /// Largest coordinate difference between the half-window averages.
  double drift() const
  {
    double d = 0.0;
    for (std::size_t i = 0; i < first_half.size(); ++i)
      d = std::max(d, std::fabs(first_half[i] - second_half[i]));
    return d;
  }
};

/// Time averages over n iterates after burn_in, their two half-window
/// averages, and the center exponent over the same window.
template <CenterSystem S>
OrbitStats orbit_stats(const S& sys, PhasePoint p, const ObservableSet& obs, long n, long burn_in)
{
  if (n < 1 || burn_in < 0)
    throw ConfigError("orbit statistics need n >= 1 and burn_in >= 0");
  for (long j = 0; j < burn_in; ++j)
    p = sys.apply(p);
  const std::size_t K = obs.size();
  std::vector<CompensatedSum> first(K), second(K);
  std::vector<double> vals(K), partial(K, 0.0);
  LogProductSum logs;
  const long half = n / 2;
  constexpr long block = 256;
  auto flush = [&](std::vector<CompensatedSum>& acc) {
    for (std::size_t i = 0; i < K; ++i) {
      acc[i].add(partial[i]);
      partial[i] = 0.0;
    }
  };
  for (long j = 0; j < n; ++j) {
    obs.evaluate(p, vals);
    for (std::size_t i = 0; i < K; ++i)
      partial[i] += vals[i];
    double d = 1.0;
    p = advance(sys, p, d);
    logs.add(d);
    if (j + 1 == half)
      flush(first);
    else if ((j + 1) % block == 0 || j + 1 == n)
      flush(j < half ? first : second);
  }
  OrbitStats st;
  st.average.resize(K);
  st.first_half.resize(K);
  st.second_half.resize(K);
  for (std::size_t i = 0; i < K; ++i) {
    double a = first[i].value(), b = second[i].value();
    st.average[i] = (a + b) / static_cast<double>(n);
    st.first_half[i] = half > 0 ? a / static_cast<double>(half) : b / static_cast<double>(n);
    st.second_half[i] = b / static_cast<double>(n - half);
  }
  st.exponent = logs.value() / static_cast<double>(n);
  st.end = p;
  return st;
}

template <CenterSystem S>
std::vector<double> birkhoff_average(const S& sys, PhasePoint p0, const ObservableSet& obs, long n, long burn_in = 0)
{
  return orbit_stats(sys, p0, obs, n, burn_in).average;
}

/// (1/n) sum_{j<n} log center_derivative(f^j(p0)).
template <CenterSystem S>
double center_lyapunov_orbit(const S& sys, PhasePoint p, long n)
{
  if (n < 1)
    throw ConfigError("exponent needs n >= 1");
  LogProductSum logs;
  for (long j = 0; j < n; ++j) {
    double d = 1.0;
    p = advance(sys, p, d);
    logs.add(d);
  }
  return logs.value() / static_cast<double>(n);
}

/// Initial-condition distribution: uniform on T^2 x S^1, optionally with the
/// fiber coordinate pinned.
struct Sampler {
  std::optional<double> theta;
  long burn_in = 0;

  PhasePoint draw(Stream& rng) const
  {
    double u = rng.uniform(), v = rng.uniform(), t = rng.uniform();
    return PhasePoint::reduced(u, v, theta ? *theta : t);
  }
};

struct ExponentEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long n_orbits = 0;
  long n_steps = 0;
  std::vector<double> per_orbit;
};

inline ExponentEstimate make_estimate(std::vector<double> values, long n_steps)
{
  ExponentEstimate e;
  auto me = mean_and_error(values);
  e.mean = me.mean;
  e.std_error = me.std_error;
  e.n_orbits = static_cast<long>(values.size());
  e.n_steps = n_steps;
  e.per_orbit = std::move(values);
  return e;
}

template <CenterSystem S>
ExponentEstimate center_lyapunov_measure(const S& sys, const Sampler& sampler, long n_orbits, long n_steps,
                                         std::uint64_t seed, int workers = 1)
{
  if (n_orbits < 2)
    throw ConfigError("exponent ensemble needs at least 2 orbits");
  std::vector<double> ex(static_cast<std::size_t>(n_orbits));
  parallel_for(ex.size(), workers, [&](std::size_t i) {
    Stream rng(seed, "lyapunov", i);
    PhasePoint p = sampler.draw(rng);
    for (long j = 0; j < sampler.burn_in; ++j)
      p = sys.apply(p);
    ex[i] = center_lyapunov_orbit(sys, p, n_steps);
  });
  return make_estimate(std::move(ex), n_steps);
}

/// Negative means below -max(3 std_error, 1e-3) nats per iterate.
inline double negativity_threshold(double std_error) { return std::max(3.0 * std_error, 1e-3); }

struct MostlyContractingResult {
  double fraction = 0.0;
  double threshold = 0.0;
  ExponentEstimate exponents;
};

/// Finite-time center exponents of points spread over a u-disk, and the
/// fraction that are negative beyond the ensemble threshold.
template <CenterSystem S>
MostlyContractingResult mostly_contracting_test(const S& sys, const UDisk& disk, int n_samples, long n_steps,
                                                std::uint64_t seed, int workers = 1)
{
  if (n_samples < 10)
    throw ConfigError("mostly contracting test needs at least 10 samples");
  UDisk d = disk;
  d.n_samples = n_samples;
  auto pts = disk_samples(d, seed);
  std::vector<double> ex(pts.size());
  parallel_for(pts.size(), workers, [&](std::size_t i) { ex[i] = center_lyapunov_orbit(sys, pts[i], n_steps); });
  MostlyContractingResult r;
  r.exponents = make_estimate(std::move(ex), n_steps);
  r.threshold = negativity_threshold(r.exponents.std_error);
  long neg = std::count_if(r.exponents.per_orbit.begin(), r.exponents.per_orbit.end(),
                           [&](double x) { return x < -r.threshold; });
  r.fraction = static_cast<double>(neg) / static_cast<double>(n_samples);
  return r;
}

// ---------------------------------------------------------------------------
// Hyperbolic times

/// Times m <= n/l at which every suffix block average of the per-block
/// contraction a_i = -log Df^l|E^c(f^{(i-1)l} p0) is at least c2.
struct HyperbolicTimesRecord {
  PhasePoint seed_point;
  double c2 = 0.0;
  int l = 1;
  long horizon = 0;
  std::vector<long> times;
  double density = 0.0;
};

template <CenterSystem S>
std::vector<double> block_contractions(const S& sys, PhasePoint p, int l, long blocks)
{
  std::vector<double> a(static_cast<std::size_t>(blocks));
  for (long i = 0; i < blocks; ++i) {
    CompensatedSum s;
    for (int j = 0; j < l; ++j) {
      s.add(-std::log(sys.center_derivative(p)));
      p = sys.apply(p);
    }
    a[static_cast<std::size_t>(i)] = s.value();
  }
  return a;
}

template <CenterSystem S>
HyperbolicTimesRecord hyperbolic_times(const S& sys, PhasePoint p0, double c2, int l, long n)
{
  if (!(c2 > 0.0) || l < 1 || n < l)
    throw ConfigError("hyperbolic times need c2 > 0, l >= 1, n >= l");
  HyperbolicTimesRecord rec;
  rec.seed_point = p0;
  rec.c2 = c2;
  rec.l = l;
  rec.horizon = n;
  const long blocks = n / l;
  auto a = block_contractions(sys, p0, l, blocks);
  // m is a hyperbolic time iff T_m >= max_{j<m} T_j with T_j = sum_{i<=j} (a_i - c2)
  CompensatedSum running;
  double best_prefix = 0.0; // T_0
  for (long m = 1; m <= blocks; ++m) {
    running.add(a[static_cast<std::size_t>(m - 1)] - c2);
    double t = running.value();
    if (t >= best_prefix)
      rec.times.push_back(m);
    best_prefix = std::max(best_prefix, t);
  }
  rec.density = static_cast<double>(rec.times.size()) * l / static_cast<double>(n);
  return rec;
}

struct ContractionCheck {
  bool pass = true;
  long checked = 0;
  std::vector<std::pair<long, long>> violations; // (m, worst k)
};

/// Re-check each recorded m from the orbit: the forward center derivative
/// over the last k blocks is at most exp(-c2 k) * exp(1e-9) for all k <= m.
/// Products are carried as mantissa/exponent pairs, a route independent of
/// the log sums used to find the times.
template <CenterSystem S>
ContractionCheck verify_contraction_at_hyperbolic_times(const HyperbolicTimesRecord& rec, const S& sys)
{
  ContractionCheck out;
  const long blocks = rec.horizon / rec.l;
  // W_j = log prod_{i<=j} (D_i e^{c2}); a time m needs W_m - W_j <= 1e-9 for all j < m.
  std::vector<double> W(static_cast<std::size_t>(blocks) + 1, 0.0);
  PhasePoint p = rec.seed_point;
  double mant = 1.0;
  long expo = 0;
  const double ec2 = std::exp(rec.c2);
  for (long i = 1; i <= blocks; ++i) {
    for (int j = 0; j < rec.l; ++j) {
      mant *= sys.center_derivative(p);
      p = sys.apply(p);
    }
    mant *= ec2;
    int e = 0;
    mant = std::frexp(mant, &e);
    expo += e;
    W[static_cast<std::size_t>(i)] = std::log(mant) + static_cast<double>(expo) * std::numbers::ln2;
  }
  // prefix minima with their positions
  std::vector<double> min_before(static_cast<std::size_t>(blocks) + 1);
  std::vector<long> arg_before(static_cast<std::size_t>(blocks) + 1);
  double mn = W[0];
  long arg = 0;
  for (long m = 1; m <= blocks; ++m) {
    min_before[static_cast<std::size_t>(m)] = mn;
    arg_before[static_cast<std::size_t>(m)] = arg;
    if (W[static_cast<std::size_t>(m)] < mn) {
      mn = W[static_cast<std::size_t>(m)];
      arg = m;
    }
  }
  for (long m : rec.times) {
    ++out.checked;
    if (m < 1 || m > blocks) {
      out.violations.emplace_back(m, 0);
      continue;
    }
    if (W[static_cast<std::size_t>(m)] - min_before[static_cast<std::size_t>(m)] > 1e-9)
      out.violations.emplace_back(m, m - arg_before[static_cast<std::size_t>(m)]);
  }
  out.pass = out.violations.empty();
  return out;
}

} // namespace phlab
