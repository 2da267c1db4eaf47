#pragma once

#include "inrct/core.hpp"
#include "inrct/projector.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>
#include <numbers>

namespace inrct {

enum class FbpFilter { RamLak, Hann };

inline FbpFilter parse_fbp_filter(const std::string& name) {
  if (name == "ram-lak") return FbpFilter::RamLak;
  if (name == "hann") return FbpFilter::Hann;
  throw Error("unknown FBP filter '" + name + "' (expected ram-lak or hann)");
}

namespace detail {

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Frequency response of the band-limited ramp, obtained from its sampled
// spatial kernel so the DC term is exact. Real and even.
inline std::vector<double> ramp_response(int padded, double spacing, FbpFilter kind) {
  std::vector<double> h(static_cast<std::size_t>(padded), 0.0);
  h[0] = 1.0 / (4.0 * spacing * spacing);
  for (int n = 1; n < padded / 2 + 1; ++n) {
    if (n % 2 == 0) continue;
    const double v = -1.0 / (std::numbers::pi * std::numbers::pi * n * n * spacing * spacing);
    h[static_cast<std::size_t>(n)] = v;
    if (padded - n != n) h[static_cast<std::size_t>(padded - n)] = v;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, h);
  std::vector<double> resp(static_cast<std::size_t>(padded));
  for (int k = 0; k < padded; ++k) {
    double r = spectrum[static_cast<std::size_t>(k)].real();
    if (kind == FbpFilter::Hann) {
      const double f = static_cast<double>(std::min(k, padded - k)) / padded;  // cycles per sample, <= 0.5
      r *= 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * f));
    }
    resp[static_cast<std::size_t>(k)] = r;
  }
  return resp;
}

}  // namespace detail

// Filters every detector row with the ramp (zero-padded to a power of two at
// least twice the row length), back-projects and scales by pi / angles.
inline ImageGrid fbp(const Sinogram& sino, const ProjectionGeometry& geom, const GridSpec& grid,
                     FbpFilter filter = FbpFilter::RamLak) {
  require(geom.angles.size() >= 2, "fbp: needs at least two angles");
  require_shape(sino.geometry == geom, "fbp: sinogram geometry mismatch");
  const int d = geom.detector_count;
  const int padded = detail::next_pow2(2 * d);
  const auto resp = detail::ramp_response(padded, geom.detector_spacing, filter);
  Sinogram filtered(geom);
  Eigen::FFT<double> fft;
  std::vector<double> row(static_cast<std::size_t>(padded));
  std::vector<std::complex<double>> spec;
  std::vector<double> back;
  for (int a = 0; a < sino.angle_count(); ++a) {
    std::fill(row.begin(), row.end(), 0.0);
    for (int k = 0; k < d; ++k) row[static_cast<std::size_t>(k)] = sino(a, k);
    fft.fwd(spec, row);
    for (int k = 0; k < padded; ++k) spec[static_cast<std::size_t>(k)] *= resp[static_cast<std::size_t>(k)];
    fft.inv(back, spec);
    for (int k = 0; k < d; ++k)
      filtered.values[a * d + k] = back[static_cast<std::size_t>(k)] * geom.detector_spacing;
  }
  ImageGrid img = back_project(filtered, geom, grid);
  // The transpose of the ray-sampled operator sums to spacing^2 / detector
  // spacing per pixel and angle; undo that to get the interpolating
  // back-projection of the inversion formula.
  const double scale = std::numbers::pi / static_cast<double>(geom.angles.size()) * geom.detector_spacing /
                       (grid.spacing * grid.spacing);
  img.values() *= scale;
  return img;
}

struct SirtOptions {
  int iterations = 500;
  bool nonneg = true;
  // Called after every iteration with (iteration, image, residual y - Ax).
  std::function<void(int, const VecD&, const VecD&)> observer;
};

// x <- x + C A^T R (y - A x), R and C the inverse row and column sums of A,
// with zero sums giving zero weight. Starts from zero.
inline ImageGrid sirt(const Sinogram& sino, const ProjectionOperator& op, const SirtOptions& opt) {
  require(opt.iterations >= 1, "sirt: iterations must be >= 1");
  require_shape(sino.geometry == op.geometry(), "sirt: sinogram geometry mismatch");
  const auto& a = op.matrix();
  VecD row_w = a * VecD::Ones(a.cols());
  VecD col_w = a.transpose() * VecD::Ones(a.rows());
  row_w = row_w.unaryExpr([](double s) { return s > 0 ? 1.0 / s : 0.0; });
  col_w = col_w.unaryExpr([](double s) { return s > 0 ? 1.0 / s : 0.0; });
  VecD x = VecD::Zero(a.cols());
  VecD residual = sino.values - a * x;
  for (int it = 1; it <= opt.iterations; ++it) {
    x += col_w.cwiseProduct(a.transpose() * row_w.cwiseProduct(residual));
    if (opt.nonneg) x = x.cwiseMax(0.0);
    residual = sino.values - a * x;
    if (opt.observer) opt.observer(it, x, residual);
  }
  return ImageGrid(op.grid(), std::move(x));
}

inline ImageGrid sirt(const Sinogram& sino, const ProjectionGeometry& geom, const GridSpec& grid, int iterations,
                      bool nonneg = true) {
  const ProjectionOperator op(geom, grid);
  return sirt(sino, op, SirtOptions{iterations, nonneg, {}});
}

}  // namespace inrct
