#include "inrct/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace inrct;
using namespace inrct::metrics;

namespace {

ImageGrid random_image(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  ImageGrid img(GridSpec::unit_square(side));
  for (auto& v : img.values()) v = u(rng);
  return img;
}

ImageGrid constant(int side, double c) {
  return ImageGrid(GridSpec::unit_square(side), VecD::Constant(side * side, c));
}

}  // namespace

TEST(Psnr, IdenticalIsSentinel) {
  const auto a = random_image(16, 1);
  EXPECT_EQ(psnr(a, a, 1.0), kPsnrIdentical);
  EXPECT_TRUE(std::isinf(kPsnrIdentical));
}

TEST(Psnr, UniformOffsetTwentyDb) {
  const auto a = random_image(16, 2);
  ImageGrid b(a.spec(), a.values().array() + 0.1);
  EXPECT_NEAR(psnr(a, b, 1.0), 20.0, 1e-12);
  EXPECT_NEAR(mse(a, b), 0.01, 1e-15);
}

TEST(Psnr, ScaleInvariant) {
  const auto a = random_image(16, 3), b = random_image(16, 4);
  const ImageGrid a2(a.spec(), 2.0 * a.values()), b2(b.spec(), 2.0 * b.values());
  EXPECT_NEAR(psnr(a, b, 1.0), psnr(a2, b2, 2.0), 1e-12);
}

TEST(Psnr, MonotoneInMse) {
  const auto a = random_image(16, 5);
  double prev = kPsnrIdentical;
  for (double off : {0.01, 0.02, 0.05, 0.1, 0.3}) {
    const double p = psnr(a, ImageGrid(a.spec(), a.values().array() + off), 1.0);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Psnr, Errors) {
  EXPECT_THROW(psnr(random_image(8, 1), random_image(9, 1), 1.0), ShapeError);
  EXPECT_THROW(psnr(random_image(8, 1), random_image(8, 2), 0.0), Error);
  EXPECT_DOUBLE_EQ(data_range_of(constant(4, 0.0)), 1.0);
  EXPECT_DOUBLE_EQ(data_range_of(constant(4, 0.7)), 0.7);
}

TEST(Ssim, Identity) {
  const auto a = random_image(24, 6);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim(constant(16, 0.3), constant(16, 0.3)), 1.0, 1e-12);
}

TEST(Ssim, IndependentNoiseIsDissimilar) {
  for (int t = 0; t < 20; ++t) EXPECT_LT(ssim(random_image(32, 100 + t), random_image(32, 200 + t)), 0.5);
}

TEST(Ssim, Symmetric) {
  const auto a = random_image(20, 7), b = random_image(20, 8);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
}

TEST(Ssim, InRangeAndDegradesWithNoise) {
  const auto a = random_image(24, 9);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  double prev = 1.0;
  for (double s : {0.01, 0.05, 0.2}) {
    ImageGrid b = a;
    for (auto& v : b.values()) v += s * g(rng);
    const double v = ssim(a, b);
    EXPECT_LT(v, prev);
    EXPECT_GE(v, -1.0);
    prev = v;
  }
  const ImageGrid neg(a.spec(), 1.0 - a.values().array());
  EXPECT_LT(ssim(a, neg), 0.0);
}

TEST(Ssim, WindowWeightsAndErrors) {
  SsimConfig c;
  const VecD w = c.weights();
  EXPECT_EQ(w.size(), 7);
  EXPECT_NEAR(w.sum(), 1.0, 1e-15);
  EXPECT_NEAR(w[0], w[6], 1e-15);
  EXPECT_THROW(ssim(random_image(6, 1), random_image(6, 2)), Error);
  EXPECT_THROW(ssim(random_image(8, 1), random_image(9, 2)), ShapeError);
  c.window = 6;
  EXPECT_THROW(c.weights(), Error);
}

TEST(Aggregate, Examples) {
  const std::vector<double> one{3.5}, ones{1, 1, 1}, pair{0, 2};
  EXPECT_EQ(aggregate(one).mean, 3.5);
  EXPECT_EQ(aggregate(one).standard_error, 0.0);
  EXPECT_EQ(aggregate(ones).mean, 1.0);
  EXPECT_EQ(aggregate(ones).standard_error, 0.0);
  EXPECT_DOUBLE_EQ(aggregate(pair).mean, 1.0);
  EXPECT_DOUBLE_EQ(aggregate(pair).standard_error, 1.0);
  EXPECT_THROW(aggregate(std::vector<double>{}), Error);
}
