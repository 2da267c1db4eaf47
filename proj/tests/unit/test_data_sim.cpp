#include "inrct/data_sim.hpp"
#include "inrct/metrics.hpp"

#include <gtest/gtest.h>

using namespace inrct;

namespace {

double mean_pairwise_psnr(const std::vector<ImageGrid>& fam) {
  double acc = 0;
  int n = 0;
  for (std::size_t a = 0; a < fam.size(); ++a)
    for (std::size_t b = a + 1; b < fam.size(); ++b) {
      const double p = metrics::psnr(fam[a], fam[b], 1.0);
      EXPECT_TRUE(std::isfinite(p));
      acc += p;
      ++n;
    }
  return acc / n;
}

}  // namespace

TEST(PhantomFamily, ZeroJitterGivesIdenticalMembers) {
  PhantomFamilySpec s;
  s.side = 32;
  s.count = 5;
  s.jitter = 0;
  s.seed = 3;
  const auto fam = make_phantom_family(s);
  ASSERT_EQ(fam.size(), 5u);
  for (const auto& m : fam) EXPECT_EQ(m.values(), fam[0].values());
}

TEST(PhantomFamily, Deterministic) {
  PhantomFamilySpec s;
  s.side = 48;
  s.count = 4;
  s.jitter = 0.1;
  s.seed = 11;
  const auto a = make_phantom_family(s);
  const auto b = make_phantom_family(s);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].values(), b[i].values());
  s.seed = 12;
  const auto c = make_phantom_family(s);
  EXPECT_NE(a[0].values(), c[0].values());
}

TEST(PhantomFamily, MemberIndependentOfCount) {
  PhantomFamilySpec s;
  s.side = 32;
  s.jitter = 0.1;
  s.seed = 5;
  s.count = 3;
  const auto small = make_phantom_family(s);
  s.count = 8;
  const auto large = make_phantom_family(s);
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i].values(), large[i].values());
}

TEST(PhantomFamily, LargerJitterMeansLessSimilar) {
  PhantomFamilySpec s;
  s.side = 64;
  s.count = 10;
  s.seed = 1;
  s.jitter = 0.1;
  const double wide = mean_pairwise_psnr(make_phantom_family(s));
  s.jitter = 0.01;
  const double tight = mean_pairwise_psnr(make_phantom_family(s));
  EXPECT_LT(wide, tight);
}

TEST(PhantomFamily, ValuesInUnitRangeAndCentered) {
  PhantomFamilySpec s;
  s.side = 64;
  s.count = 20;
  s.jitter = 0.5;  // large enough to force the re-clamp
  s.seed = 9;
  for (const auto& m : make_phantom_family(s)) {
    EXPECT_GE(m.values().minCoeff(), 0.0);
    EXPECT_LE(m.values().maxCoeff(), 1.0);
    // every ellipse stays inside the disk of radius kPhantomBound
    const auto& g = m.spec();
    const double h = g.half_extent();
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) {
        const double rad = std::hypot(g.x_of(c), g.y_of(r)) / h;
        if (rad > kPhantomBound + g.spacing) {
          EXPECT_EQ(m(r, c), 0.0) << r << "," << c;
        }
      }
  }
}

TEST(PhantomFamily, RejectsInvalidSpec) {
  PhantomFamilySpec s;
  s.count = 0;
  EXPECT_THROW(make_phantom_family(s), Error);
  s.count = 1;
  s.jitter = -0.1;
  EXPECT_THROW(make_phantom_family(s), Error);
  s.jitter = 0;
  s.base_ellipses = {{0, 0, 0.5, 0.5, 0, 1.5}};
  EXPECT_THROW(make_phantom_family(s), Error);
}

TEST(Disk, AreaMatches) {
  const auto d = make_disk(128, 0.5);
  const double area = d.values().sum() * d.spacing() * d.spacing();
  EXPECT_NEAR(area, std::numbers::pi * 0.25, 2e-3);
}

TEST(Noise, HugePhotonCountIsNearlyClean) {
  const auto grid = GridSpec::unit_square(32);
  const auto g = ProjectionGeometry::parallel(10, grid);
  const auto clean = forward_project(make_disk(32, 0.6), g);
  NoiseSpec ns;
  ns.photon_count = 1e9;
  ns.seed = 2;
  const auto noisy = apply_poisson_noise(clean, ns);
  const double rms = (noisy.sinogram.values - clean.values).norm() / clean.values.norm();
  EXPECT_LT(rms, 1e-3);
  EXPECT_EQ(noisy.clamped_zero_counts, 0u);
}

TEST(Noise, CountMomentsMatchPoisson) {
  // Constant line integral: every bin draws from the same Poisson law.
  const int bins = 100000;
  ProjectionGeometry g;
  g.angles = {0.0};
  g.detector_count = bins;
  g.detector_spacing = 1.0;
  const double y0 = 2.0;
  Sinogram s(g, VecD::Constant(bins, y0));
  NoiseSpec ns;
  ns.photon_count = 5000;
  ns.gamma_abs = 0.5;
  ns.max_attenuation = 0;  // no rescaling, counts use y0 directly
  ns.seed = 77;
  const auto noisy = apply_poisson_noise(s, ns);
  const double lambda = expected_counts(y0, ns);
  double m = 0, m2 = 0;
  for (double y : noisy.sinogram.values) {
    const double counts = ns.photon_count * std::exp(-ns.gamma_abs * y);
    m += counts;
    m2 += counts * counts;
  }
  m /= bins;
  const double var = m2 / bins - m * m;
  EXPECT_NEAR(m / lambda, 1.0, 0.02);
  EXPECT_NEAR(var / lambda, 1.0, 0.02);
}

TEST(Noise, DeterministicAndSeedSensitive) {
  const auto grid = GridSpec::unit_square(16);
  const auto g = ProjectionGeometry::parallel(6, grid);
  const auto clean = forward_project(make_disk(16), g);
  NoiseSpec ns;
  ns.seed = 4;
  EXPECT_EQ(apply_poisson_noise(clean, ns).sinogram.values, apply_poisson_noise(clean, ns).sinogram.values);
  NoiseSpec other = ns;
  other.seed = 5;
  EXPECT_NE(apply_poisson_noise(clean, ns).sinogram.values, apply_poisson_noise(clean, other).sinogram.values);
}

TEST(Noise, ScalingPutsPeakAttenuationAtTarget) {
  const auto grid = GridSpec::unit_square(32);
  const auto g = ProjectionGeometry::parallel(8, grid);
  const auto clean = forward_project(make_disk(32, 0.7), g);
  NoiseSpec ns;
  const auto noisy = apply_poisson_noise(clean, ns);
  EXPECT_NEAR(ns.gamma_abs * clean.values.maxCoeff() * noisy.scale, ns.max_attenuation, 1e-12);
}

TEST(Noise, ZeroCountsAreClampedAndCounted) {
  ProjectionGeometry g;
  g.angles = {0.0};
  g.detector_count = 1000;
  g.detector_spacing = 1.0;
  Sinogram s(g, VecD::Constant(1000, 30.0));
  NoiseSpec ns;
  ns.photon_count = 1;
  ns.gamma_abs = 1;
  ns.max_attenuation = 0;
  const auto noisy = apply_poisson_noise(s, ns);
  EXPECT_GT(noisy.clamped_zero_counts, 900u);
  EXPECT_TRUE(noisy.sinogram.values.allFinite());
  EXPECT_DOUBLE_EQ(noisy.sinogram.values.maxCoeff(), 0.0);  // one count of I0 = 1 maps to y = 0
}

TEST(Noise, RejectsInvalidSpec) {
  const auto g = ProjectionGeometry::parallel(2, GridSpec::unit_square(8));
  NoiseSpec ns;
  ns.photon_count = 0;
  EXPECT_THROW(apply_poisson_noise(Sinogram(g), ns), Error);
  ns.photon_count = 10;
  ns.gamma_abs = 1.5;
  EXPECT_THROW(apply_poisson_noise(Sinogram(g), ns), Error);
}
