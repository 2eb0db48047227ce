#include <phlab/ergodic_stats.hpp>
#include <phlab/udisk.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace phlab;

namespace {

const double pi = std::numbers::pi;

SystemSpec ms(double a = 0.5, int s = 2) { return make_system(make_cat_base(), FiberFamily::morse_smale(a, s)); }
SystemSpec id() { return make_system(make_cat_base(), FiberFamily::identity()); }
SystemSpec rot() { return make_system(make_cat_base(), FiberFamily::rotation(golden_rotation)); }

// scalar fiber iteration, independent of the library's fiber code
double fiber_only_exponent(double a, double theta, long n)
{
  double sum = 0.0;
  for (long j = 0; j < n; ++j) {
    sum += std::log(1.0 + a * std::cos(2 * pi * theta));
    theta = theta + a / (2 * pi) * std::sin(2 * pi * theta);
    theta -= std::floor(theta);
  }
  return sum / static_cast<double>(n);
}

ObservableSet cos1()
{
  return ObservableSet({{ObservableKind::cosine, 1, 1, 0, 0, "cos1"}});
}

} // namespace

TEST(Birkhoff, ConstantFiberGivesExactZero)
{
  auto v = birkhoff_average(id(), {{0.1, 0.7}, 0.25}, cos1(), 1000);
  EXPECT_NEAR(v[0], 0.0, 1e-15);
}

TEST(Birkhoff, MorseSmaleConvergesToAttractor)
{
  auto v = birkhoff_average(ms(), {{0.137, 0.591}, 0.2}, cos1(), 100000);
  EXPECT_NEAR(v[0], -1.0, 0.01);
}

TEST(Birkhoff, ConstantOneObservable)
{
  for (const auto& sys : {id(), rot(), ms()}) {
    auto v = birkhoff_average(sys, {{0.3, 0.4}, 0.1}, ObservableSet::constant_one(), 777, 5);
    EXPECT_NEAR(v[0], 1.0, 1e-14);
  }
}

TEST(Birkhoff, SignatureEntriesAreBounded)
{
  auto obs = ObservableSet::signature();
  EXPECT_EQ(obs.size(), 8u);
  auto v = birkhoff_average(ms(0.5, 4), {{0.61, 0.13}, 0.9}, obs, 5000, 100);
  for (double x : v)
    EXPECT_LE(std::fabs(x), 1.0 + 1e-12);
}

TEST(Exponent, ProductIdentityIsExactZero)
{
  EXPECT_EQ(center_lyapunov_orbit(id(), {{0.3, 0.2}, 0.6}, 12345), 0.0);
}

TEST(Exponent, MorseSmaleMatchesFiberOracle)
{
  double lib = center_lyapunov_orbit(ms(), {{0.2, 0.9}, 0.1}, 100000);
  EXPECT_NEAR(lib, std::log(0.5), 0.01);
  EXPECT_NEAR(lib, fiber_only_exponent(0.5, 0.1, 100000), 1e-9);
}

TEST(Exponent, RepellingFiberLine)
{
  EXPECT_NEAR(center_lyapunov_orbit(ms(), {{0.2, 0.9}, 0.0}, 1000), std::log(1.5), 1e-12);
}

TEST(Exponent, AdditivityUnderComposition)
{
  auto sys = ms(0.4);
  PhasePoint p{{0.31, 0.47}, 0.83};
  auto sq = power(sys, 2);
  double one = center_lyapunov_orbit(sys, p, 2000);
  double two = center_lyapunov_orbit(sq, p, 1000);
  EXPECT_NEAR(two, 2.0 * one, 1e-12);
}

TEST(ExponentMeasure, IdentityIsExact)
{
  auto e = center_lyapunov_measure(id(), Sampler{}, 50, 1000, 3);
  EXPECT_EQ(e.mean, 0.0);
  EXPECT_EQ(e.std_error, 0.0);
  EXPECT_EQ(e.n_orbits, 50);
}

TEST(ExponentMeasure, MorseSmaleEnsemble)
{
  auto e = center_lyapunov_measure(ms(), Sampler{}, 1000, 10000, 42);
  EXPECT_NEAR(e.mean, std::log(0.5), 0.005);
  EXPECT_GE(e.std_error, 0.0);
}

TEST(ExponentMeasure, RotationBelowRoundoff)
{
  auto e = center_lyapunov_measure(rot(), Sampler{}, 20, 1000, 1);
  EXPECT_LT(std::fabs(e.mean), 1e-12);
}

TEST(ExponentMeasure, RejectsSingleOrbit)
{
  EXPECT_THROW(center_lyapunov_measure(id(), Sampler{}, 1, 10, 0), ConfigError);
}

TEST(ExponentMeasure, BitIdenticalAcrossWorkerCounts)
{
  auto a = center_lyapunov_measure(ms(0.3, 4), Sampler{}, 64, 500, 9, 1);
  auto b = center_lyapunov_measure(ms(0.3, 4), Sampler{}, 64, 500, 9, 8);
  auto c = center_lyapunov_measure(ms(0.3, 4), Sampler{}, 64, 500, 9, 3);
  EXPECT_EQ(a.per_orbit, b.per_orbit);
  EXPECT_EQ(a.per_orbit, c.per_orbit);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, c.std_error);
}

TEST(MostlyContracting, MorseSmaleDisk)
{
  auto b = make_cat_base();
  auto disk = make_udisk(b, {{0.21, 0.34}, 0.05});
  auto r = mostly_contracting_test(ms(), disk, 200, 10000, 5);
  EXPECT_GE(r.fraction, 0.99);
}

TEST(MostlyContracting, IsometricFibersHaveNoNegativeExponents)
{
  auto b = make_cat_base();
  auto disk = make_udisk(b, {{0.21, 0.34}, 0.05});
  for (const auto& sys : {rot(), id()}) {
    auto r = mostly_contracting_test(sys, disk, 100, 1000, 5);
    EXPECT_EQ(r.fraction, 0.0);
    for (double x : r.exponents.per_orbit)
      EXPECT_LE(std::fabs(x), r.threshold);
  }
}

TEST(MostlyContracting, RejectsTooFewSamples)
{
  auto disk = make_udisk(make_cat_base(), {{0.2, 0.3}, 0.5});
  EXPECT_THROW(mostly_contracting_test(ms(), disk, 5, 10, 0), ConfigError);
}

TEST(HyperbolicTimes, AttractorEveryTimeIsHyperbolic)
{
  auto rec = hyperbolic_times(ms(), {{0.0, 0.0}, 0.5}, 0.5, 1, 1000);
  EXPECT_EQ(rec.times.size(), 1000u);
  EXPECT_DOUBLE_EQ(rec.density, 1.0);
}

TEST(HyperbolicTimes, GenericOrbitDensity)
{
  auto sys = ms();
  auto rec = hyperbolic_times(sys, {{0.377, 0.119}, 0.02}, 0.3, 1, 100000);
  EXPECT_GE(rec.density, 0.3);
  auto chk = verify_contraction_at_hyperbolic_times(rec, sys);
  EXPECT_TRUE(chk.pass);
  EXPECT_EQ(chk.checked, static_cast<long>(rec.times.size()));
}

TEST(HyperbolicTimes, UnreachableRateGivesEmptySet)
{
  auto rec = hyperbolic_times(ms(), {{0.377, 0.119}, 0.3}, 1.0, 1, 5000);
  EXPECT_TRUE(rec.times.empty());
  EXPECT_EQ(rec.density, 0.0);
}

TEST(HyperbolicTimes, DirectScanOracle)
{
  // brute force over all (m, k) from raw derivatives
  auto sys = ms(0.5);
  PhasePoint p0{{0.71, 0.05}, 0.93};
  const long n = 300;
  const double c2 = 0.3;
  std::vector<double> a;
  PhasePoint p = p0;
  for (long i = 0; i < n; ++i) {
    a.push_back(-std::log(1.0 + 0.5 * std::cos(2 * pi * p.theta)));
    p = sys.apply(p);
  }
  std::vector<long> expected;
  for (long m = 1; m <= n; ++m) {
    bool ok = true;
    double s = 0.0;
    for (long k = 1; k <= m && ok; ++k) {
      s += a[static_cast<std::size_t>(m - k)];
      ok = s / static_cast<double>(k) >= c2 - 1e-12;
    }
    if (ok)
      expected.push_back(m);
  }
  auto rec = hyperbolic_times(sys, p0, c2, 1, n);
  EXPECT_EQ(rec.times, expected);
}

TEST(HyperbolicTimes, BlockLengthTwo)
{
  auto sys = ms();
  auto rec = hyperbolic_times(sys, {{0.5, 0.25}, 0.11}, 0.4, 2, 2000);
  EXPECT_FALSE(rec.times.empty());
  for (long m : rec.times)
    EXPECT_LE(m, 1000);
  EXPECT_TRUE(verify_contraction_at_hyperbolic_times(rec, sys).pass);
}

TEST(HyperbolicTimes, InjectedSpuriousTimeIsCaught)
{
  auto sys = ms();
  // start on the repeller: early blocks expand, so m = 1 is not hyperbolic
  PhasePoint p0{{0.0, 0.0}, 0.0};
  auto rec = hyperbolic_times(sys, p0, 0.3, 1, 50);
  EXPECT_TRUE(rec.times.empty());
  rec.times.push_back(1);
  auto chk = verify_contraction_at_hyperbolic_times(rec, sys);
  EXPECT_FALSE(chk.pass);
  ASSERT_EQ(chk.violations.size(), 1u);
  EXPECT_EQ(chk.violations[0].first, 1);
}

TEST(HyperbolicTimes, DensityBookkeeping)
{
  auto sys = ms(0.5, 4);
  const long n = 20000;
  auto rec = hyperbolic_times(sys, {{0.9, 0.4}, 0.6}, 0.3, 1, n);
  long below = std::count_if(rec.times.begin(), rec.times.end(), [&](long m) { return m >= 1 && m < n; });
  EXPECT_GE(static_cast<double>(below), static_cast<double>(n) * rec.density - 1.0);
}

TEST(HyperbolicTimes, PlissLowerBound)
{
  auto sys = ms(0.5);
  const long n = 50000;
  const double c2 = 0.3;
  PhasePoint p0{{0.12, 0.34}, 0.56};
  auto rec = hyperbolic_times(sys, p0, c2, 1, n);
  // time average of -log derivative and its per-step maximum L
  double sum = 0.0, L = -INFINITY;
  PhasePoint p = p0;
  for (long i = 0; i < n; ++i) {
    double v = -std::log(sys.center_derivative(p));
    sum += v;
    L = std::max(L, v);
    p = sys.apply(p);
  }
  double c = sum / static_cast<double>(n);
  ASSERT_GT(c, c2);
  EXPECT_GE(rec.density, (c - c2) / (L - c2) - 0.01);
}

TEST(HyperbolicTimes, RejectsBadParameters)
{
  EXPECT_THROW(hyperbolic_times(ms(), {}, 0.0, 1, 10), ConfigError);
  EXPECT_THROW(hyperbolic_times(ms(), {}, 0.3, 0, 10), ConfigError);
  EXPECT_THROW(hyperbolic_times(ms(), {}, 0.3, 20, 10), ConfigError);
}
