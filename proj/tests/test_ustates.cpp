#include <phlab/ustates.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace phlab;

namespace {

AnosovBase cat() { return make_cat_base(); }
SystemSpec ms(double a = 0.5, int s = 2) { return make_system(cat(), FiberFamily::morse_smale(a, s)); }
SystemSpec id() { return make_system(cat(), FiberFamily::identity()); }
SystemSpec rot() { return make_system(cat(), FiberFamily::rotation(golden_rotation)); }

CensusParams small_census(std::uint64_t seed = 1)
{
  CensusParams p;
  p.grid = {6, 6, 8};
  p.n = 20000;
  p.burn_in = 1000;
  p.seed = seed;
  return p;
}

double sum(const std::vector<double>& w) { return std::accumulate(w.begin(), w.end(), 0.0); }

// Textbook complete linkage: repeatedly merge the closest pair (max of
// pairwise point distances), first pair in index order on ties.
std::vector<std::vector<long>> naive_complete_linkage(const std::vector<std::vector<double>>& pts, double tol)
{
  std::vector<std::vector<long>> cl;
  for (std::size_t i = 0; i < pts.size(); ++i)
    cl.push_back({static_cast<long>(i)});
  auto link = [&](const std::vector<long>& a, const std::vector<long>& b) {
    double d = 0.0;
    for (long x : a)
      for (long y : b)
        d = std::max(d, max_norm_dist(pts[static_cast<std::size_t>(x)], pts[static_cast<std::size_t>(y)]));
    return d;
  };
  while (true) {
    double best = INFINITY;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < cl.size(); ++i)
      for (std::size_t j = i + 1; j < cl.size(); ++j) {
        double d = link(cl[i], cl[j]);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    if (cl.size() < 2 || best > tol)
      break;
    cl[bi].insert(cl[bi].end(), cl[bj].begin(), cl[bj].end());
    cl.erase(cl.begin() + static_cast<long>(bj));
  }
  for (auto& g : cl)
    std::sort(g.begin(), g.end());
  std::sort(cl.begin(), cl.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return cl;
}

} // namespace

TEST(IterateUDisk, ZeroStepsReturnsSamples)
{
  auto d = make_udisk(cat(), {{0.2, 0.3}, 0.4}, 0.1, 50);
  auto a = iterate_udisk(id(), d, 0);
  auto b = disk_samples(d);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(a[i], b[i]);
}

TEST(IterateUDisk, IdentityFiberKeepsTheta)
{
  auto d = make_udisk(cat(), {{0.2, 0.3}, 0.3}, 0.1, 100);
  for (const auto& p : iterate_udisk(id(), d, 15))
    EXPECT_EQ(p.theta, 0.3);
}

TEST(IterateUDisk, SegmentExpandsByLambdaUPower)
{
  auto b = cat();
  auto d = make_udisk(b, {{0.2, 0.3}, 0.3}, 0.01, 2);
  d.n_samples = 2;
  // endpoints of the segment
  PhasePoint p0 = d.point_at(0.0), p1 = d.point_at(0.01);
  auto img = iterate_points(id(), {p0, p1}, 10);
  // oracle: M^10 applied to the unwrapped displacement, reduced mod Z^2
  double expected = 0.01 * std::pow(b.lambda_u, 10);
  IntMatrix2 m10 = matrix_power(b.matrix, 10);
  Vec2 d0 = 0.01 * b.e_u;
  Vec2 d10{m10[0][0] * d0.x + m10[0][1] * d0.y, m10[1][0] * d0.x + m10[1][1] * d0.y};
  EXPECT_NEAR(norm(d10), expected, 1e-9);
  Vec2 got = torus_delta(img[0].base, img[1].base);
  EXPECT_NEAR(centered(got.x - d10.x), 0.0, 1e-9);
  EXPECT_NEAR(centered(got.y - d10.y), 0.0, 1e-9);
  EXPECT_NEAR(expected, 0.01 * 15126.99993, 1e-3);
}

TEST(CesaroUState, IdentityBaseMarginalEquidistributes)
{
  auto d = make_udisk(cat(), {{0.2, 0.3}, 0.3});
  auto m = cesaro_ustate(id(), d, 1000, {64, 64, 10}, 7);
  EXPECT_NEAR(m.total(), 1.0, 1e-12);
  EXPECT_LT(total_variation_to_uniform(m.base_marginal()), 0.05);
  auto th = m.theta_marginal();
  EXPECT_NEAR(th[3], 1.0, 1e-12); // theta = 0.3 lies in bin 3 of 10
}

TEST(CesaroUState, MorseSmaleConcentratesOnAttractor)
{
  auto d = make_udisk(cat(), {{0.2, 0.3}, 0.3});
  auto m = cesaro_ustate(ms(), d, 1000, {8, 8, 100}, 7);
  auto th = m.theta_marginal();
  double near = 0.0;
  for (int k = 45; k < 55; ++k)
    near += th[static_cast<std::size_t>(k)];
  EXPECT_GE(near, 0.95);
  EXPECT_NEAR(sum(m.weights), 1.0, 1e-12);
}

TEST(CesaroUState, WorkerCountInvariant)
{
  auto d = make_udisk(cat(), {{0.7, 0.1}, 0.9}, 0.1, 300);
  auto a = cesaro_ustate(ms(0.4, 4), d, 200, {8, 8, 16}, 3, 1);
  auto b = cesaro_ustate(ms(0.4, 4), d, 200, {8, 8, 16}, 3, 8);
  EXPECT_EQ(a.weights, b.weights);
}

TEST(DensityRatio, LinearSystemIsFlat)
{
  auto d = make_udisk(cat(), {{0.2, 0.3}, 0.3}, 0.1, 100000);
  auto r = unstable_density_ratio(id(), d, 10, BaseWindow{});
  EXPECT_LT(r.ratio, 1.1);
  EXPECT_GE(r.ratio, 1.0);
}

TEST(DensityRatio, MorseSmaleResolutionStable)
{
  auto d = make_udisk(cat(), {{0.2, 0.3}, 0.3}, 0.1, 2000);
  d.theta_profile = {0.1, 0.6};
  auto sys = ms();
  BaseWindow w{{0.5, 0.5}, 0.25};
  auto r100 = unstable_density_ratio(sys, d, 100, w);
  auto r1000 = unstable_density_ratio(sys, d, 1000, w);
  EXPECT_GE(r100.ratio, 1.0);
  EXPECT_GE(r1000.ratio, 1.0);
  EXPECT_LT(std::max(r100.ratio, r1000.ratio) / std::min(r100.ratio, r1000.ratio), 2.0);
}

TEST(DensityRatio, InsufficientSamplesInWindow)
{
  auto d = make_udisk(cat(), {{0.2, 0.3}, 0.3}, 0.1, 20);
  EXPECT_THROW(unstable_density_ratio(id(), d, 0, BaseWindow{{0.8, 0.8}, 0.01}), NumericError);
}

TEST(CompleteLinkage, MatchesNaiveAgglomeration)
{
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Stream rng(seed, "linkage", 0);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 40; ++i) {
      double cx = std::floor(rng.uniform() * 3.0) * 0.3;
      pts.push_back({cx + 0.15 * rng.uniform(), 0.2 * rng.uniform(), rng.uniform()});
    }
    for (double tol : {0.05, 0.2, 0.5})
      EXPECT_EQ(complete_linkage(pts, tol), naive_complete_linkage(pts, tol)) << seed << " " << tol;
  }
}

TEST(Census, SingleAttractorSmallGrid)
{
  auto c = physical_measure_census(ms(), ObservableSet::signature(), small_census());
  ASSERT_EQ(c.clusters.size(), 1u);
  EXPECT_GE(c.clusters[0].basin_fraction, 0.99);
  EXPECT_NEAR(c.clusters[0].exponent.mean, std::log(0.5), 0.01);
  auto r = classify_regime(c);
  EXPECT_EQ(r.kind, RegimeKind::mostly_contracting);
  EXPECT_EQ(r.clusters, 1);
}

TEST(Census, TwoAttractorsSplitBasins)
{
  auto c = physical_measure_census(ms(0.5, 4), ObservableSet::signature(), small_census());
  ASSERT_EQ(c.clusters.size(), 2u);
  for (const auto& cl : c.clusters) {
    EXPECT_NEAR(cl.basin_fraction, 0.5, 0.05);
    EXPECT_NEAR(cl.exponent.mean, std::log(0.5), 0.01);
  }
  EXPECT_LT(theta_overlap(c.clusters[0], c.clusters[1]), 0.01);
  EXPECT_GE(c.min_centroid_separation, small_census().merge_tol);
}

TEST(Census, RotationExtension)
{
  auto prm = small_census();
  auto c = physical_measure_census(rot(), ObservableSet::signature(), prm);
  ASSERT_FALSE(c.clusters.empty());
  long assigned = 0;
  for (const auto& cl : c.clusters)
    assigned += cl.members;
  EXPECT_GE(static_cast<double>(c.clusters[0].members), 0.99 * static_cast<double>(assigned));
  EXPECT_LT(std::fabs(c.clusters[0].exponent.mean), 1e-3);
  EXPECT_EQ(classify_regime(c).kind, RegimeKind::rotation_like);
}

TEST(Census, FractionsAreExhaustive)
{
  for (const auto& sys : {ms(), ms(0.5, 4), id(), rot()}) {
    auto c = physical_measure_census(sys, ObservableSet::signature(), small_census(3));
    double f = c.unassigned_fraction;
    for (const auto& cl : c.clusters)
      f += cl.basin_fraction;
    EXPECT_NEAR(f, 1.0, 1e-12);
    for (const auto& cl : c.clusters)
      EXPECT_NEAR(cl.representative.total(), 1.0, 1e-12);
  }
}

TEST(Census, SignExponentDichotomy)
{
  for (const auto& sys : {ms(), ms(0.3, 4), rot()}) {
    auto c = physical_measure_census(sys, ObservableSet::signature(), small_census(5));
    for (const auto& cl : c.clusters)
      EXPECT_LE(cl.exponent.mean, 3.0 * cl.exponent.std_error + 1e-12);
  }
}

TEST(Census, WorkerCountInvariant)
{
  auto p1 = small_census(11);
  p1.n = 3000;
  auto p8 = p1;
  p8.workers = 8;
  auto a = physical_measure_census(ms(0.5, 4), ObservableSet::signature(), p1);
  auto b = physical_measure_census(ms(0.5, 4), ObservableSet::signature(), p8);
  ASSERT_EQ(a.clusters.size(), b.clusters.size());
  for (std::size_t i = 0; i < a.clusters.size(); ++i) {
    EXPECT_EQ(a.clusters[i].centroid, b.clusters[i].centroid);
    EXPECT_EQ(a.clusters[i].member_ids, b.clusters[i].member_ids);
    EXPECT_EQ(a.clusters[i].representative.weights, b.clusters[i].representative.weights);
  }
}

TEST(Census, GridRefinementStability)
{
  auto coarse = small_census(2);
  auto fine = coarse;
  fine.grid = {12, 12, 16};
  auto a = physical_measure_census(ms(0.5, 4), ObservableSet::signature(), coarse);
  auto b = physical_measure_census(ms(0.5, 4), ObservableSet::signature(), fine);
  ASSERT_EQ(a.clusters.size(), b.clusters.size());
  std::vector<std::vector<double>> ca, cb;
  for (const auto& c : a.clusters)
    ca.push_back(c.centroid);
  for (const auto& c : b.clusters)
    cb.push_back(c.centroid);
  EXPECT_LT(matched_displacement(ca, cb), coarse.merge_tol / 2);
}

TEST(Census, RejectsBadParameters)
{
  auto p = small_census();
  p.grid = {0, 4, 4};
  EXPECT_THROW(physical_measure_census(ms(), ObservableSet::signature(), p), ConfigError);
  p = small_census();
  p.merge_tol = 0.0;
  EXPECT_THROW(physical_measure_census(ms(), ObservableSet::signature(), p), ConfigError);
}

TEST(ClassifyRegime, MixedExponents)
{
  MeasureCensus c;
  ClusterSummary a, b;
  a.exponent.mean = -0.7;
  b.exponent.mean = 0.0;
  c.clusters = {a, b};
  EXPECT_EQ(classify_regime(c).kind, RegimeKind::mixed);
  EXPECT_EQ(to_string(classify_regime(c).kind), "Mixed");
  EXPECT_THROW(classify_regime(MeasureCensus{}), ConfigError);
}

TEST(StabilitySweep, ConstantCountAndSmallDisplacement)
{
  auto prm = small_census();
  prm.grid = {4, 4, 6};
  prm.n = 5000;
  auto sw = stability_sweep(cat(), 2, 0.3, 0.7, 5, ObservableSet::signature(), prm);
  ASSERT_EQ(sw.rows.size(), 5u);
  EXPECT_TRUE(sw.count_constant);
  EXPECT_EQ(sw.rows[0].cluster_count, 1);
  EXPECT_LE(sw.max_displacement, 5.0 * sw.spacing);
}

TEST(StabilitySweep, FourPointFamilyKeepsTwoClusters)
{
  auto prm = small_census();
  prm.grid = {4, 4, 8};
  prm.n = 5000;
  auto sw = stability_sweep(cat(), 4, 0.4, 0.6, 3, ObservableSet::signature(), prm);
  EXPECT_TRUE(sw.count_constant);
  EXPECT_EQ(sw.rows[0].cluster_count, 2);
}

TEST(StabilitySweep, DegenerateSingleStep)
{
  auto prm = small_census();
  prm.grid = {3, 3, 3};
  prm.n = 2000;
  auto sw = stability_sweep(cat(), 2, 0.5, 0.5, 1, ObservableSet::signature(), prm);
  EXPECT_EQ(sw.rows.size(), 1u);
  EXPECT_TRUE(sw.count_constant);
  EXPECT_EQ(sw.max_displacement, 0.0);
  EXPECT_THROW(stability_sweep(cat(), 2, 0.3, 0.5, 1, ObservableSet::signature(), prm), ConfigError);
}

TEST(BlockRecurrence, AttractorBlockIsHitOften)
{
  CsBlock block{{0.0, 0.0}, 0.1, 0.1, 0.5, 0.1, "attractor"};
  auto d = make_udisk(cat(), {{0.3, 0.6}, 0.2}, 0.1, 1000);
  auto r = block_recurrence(ms(), d, block, 200, 1);
  EXPECT_EQ(r.fractions.size(), 201u);
  EXPECT_GE(r.hits, 20);
  // a denser disk gives a count within 20%
  d.n_samples = 4000;
  auto r4 = block_recurrence(ms(), d, block, 200, 1);
  EXPECT_NEAR(static_cast<double>(r4.hits), static_cast<double>(r.hits), 0.2 * static_cast<double>(r.hits));
}

TEST(BlockRecurrence, RepellerBlockEmpties)
{
  CsBlock block{{0.0, 0.0}, 0.1, 0.1, 0.0, 0.1, "repeller"};
  auto d = make_udisk(cat(), {{0.3, 0.6}, 0.2}, 0.1, 1000);
  auto r = block_recurrence(ms(), d, block, 200, 1);
  for (long t = 100; t <= 200; ++t)
    EXPECT_LE(r.fractions[static_cast<std::size_t>(t)], 0.01);
}

TEST(BlockRecurrence, HorizonZero)
{
  CsBlock block{{0.0, 0.0}, 0.1, 0.1, 0.5, 0.1, "b"};
  auto d = make_udisk(cat(), {{0.3, 0.6}, 0.2}, 0.1, 10);
  auto r = block_recurrence(ms(), d, block, 0, 1);
  EXPECT_EQ(r.fractions.size(), 1u);
}

TEST(BlockRecurrence, RejectsDegenerateBlock)
{
  CsBlock block{{0.0, 0.0}, 0.1, 0.1, 0.5, 0.0, "b"};
  auto d = make_udisk(cat(), {{0.3, 0.6}, 0.2}, 0.1, 10);
  EXPECT_THROW(block_recurrence(ms(), d, block, 5, 1), ConfigError);
  block.theta_half = 0.6;
  EXPECT_THROW(block_recurrence(ms(), d, block, 5, 1), ConfigError);
}

TEST(UDiskValidation, ConeAndLength)
{
  auto b = cat();
  auto d = make_udisk(b, {{0.1, 0.1}, 0.0});
  EXPECT_NO_THROW(validate_udisk(d, b));
  d.direction = b.e_s;
  EXPECT_THROW(validate_udisk(d, b), ConfigError);
  d = make_udisk(b, {{0.1, 0.1}, 0.0});
  d.length = 0.0;
  EXPECT_THROW(validate_udisk(d, b), ConfigError);
}

TEST(Distances, TotalVariationAndOverlap)
{
  std::vector<double> p{0.5, 0.5, 0.0}, q{0.0, 0.5, 0.5};
  EXPECT_NEAR(total_variation(p, q), 0.5, 1e-15);
  EXPECT_NEAR(overlap(p, q), 0.5, 1e-15);
  EXPECT_NEAR(total_variation(p, p), 0.0, 1e-15);
}
