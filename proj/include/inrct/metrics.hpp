#pragma once

#include "inrct/core.hpp"

#include <limits>

namespace inrct::metrics {

// Returned by psnr() for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

inline double mse(const ImageGrid& a, const ImageGrid& b) {
  require_shape(a.side() == b.side(), "metrics: image shapes differ");
  return (a.values() - b.values()).squaredNorm() / static_cast<double>(a.values().size());
}

inline double psnr(const ImageGrid& a, const ImageGrid& b, double data_range) {
  require(data_range > 0, "psnr: data_range must be positive");
  const double e = mse(a, b);
  if (e == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(data_range * data_range / e);
}

// Peak of the reference image, the default data range.
inline double data_range_of(const ImageGrid& reference) {
  const double hi = reference.values().maxCoeff();
  return hi > 0 ? hi : 1.0;
}

struct SsimConfig {
  int window = 7;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;

  VecD weights() const {
    require(window >= 1 && window % 2 == 1, "SSIM window must be odd");
    VecD g(window);
    const int h = window / 2;
    for (int i = 0; i < window; ++i) g[i] = std::exp(-0.5 * (i - h) * (i - h) / (sigma * sigma));
    return g / g.sum();
  }
};

// Mean of the local SSIM map over all fully contained Gaussian windows.
inline double ssim(const ImageGrid& a, const ImageGrid& b, const SsimConfig& cfg = {}) {
  require_shape(a.side() == b.side(), "ssim: image shapes differ");
  require(cfg.data_range > 0, "ssim: data_range must be positive");
  require(a.side() >= cfg.window, "ssim: image smaller than the window");
  const VecD g = cfg.weights();
  const int w = cfg.window;
  const int n = a.side() - w + 1;
  const double c1 = std::pow(cfg.k1 * cfg.data_range, 2);
  const double c2 = std::pow(cfg.k2 * cfg.data_range, 2);
  double total = 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
          const double k = g[i] * g[j];
          const double va = a(r + i, c + j), vb = b(r + i, c + j);
          ma += k * va;
          mb += k * vb;
          saa += k * va * va;
          sbb += k * vb * vb;
          sab += k * va * vb;
        }
      const double var_a = saa - ma * ma;
      const double var_b = sbb - mb * mb;
      const double cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
  return total / (static_cast<double>(n) * n);
}

struct Summary {
  double mean = 0;
  double standard_error = 0;
};

// Mean and standard error (sample standard deviation over sqrt(n)).
inline Summary aggregate(std::span<const double> values) {
  require(!values.empty(), "aggregate: no values");
  const double n = static_cast<double>(values.size());
  double mean = 0;
  for (double v : values) mean += v;
  mean /= n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1)) / std::sqrt(n)};
}

}  // namespace inrct::metrics
