#pragma once

#include "inrct/core.hpp"

#include <numbers>
#include <random>

namespace inrct::nn {

// Random Fourier feature map for 2D coordinates. The frequency matrix is
// drawn once from N(0, scale^2) and never changes afterwards.
template <class Real>
class FourierEmbedding {
 public:
  FourierEmbedding() = default;
  FourierEmbedding(Mat<double> frequencies, double scale) : freq_(std::move(frequencies)), scale_(scale) {
    require(freq_.cols() == 2, "frequency matrix must have two columns");
    require(freq_.rows() >= 1, "embedding needs at least one frequency");
    require(freq_.allFinite(), "non-finite frequency matrix");
  }

  static FourierEmbedding random(int num_frequencies, double scale, std::uint64_t seed) {
    require(num_frequencies >= 1, "num_frequencies must be >= 1");
    require(scale > 0, "Fourier scale must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    Mat<double> b(num_frequencies, 2);
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      for (Eigen::Index j = 0; j < 2; ++j) b(i, j) = n(rng);
    return FourierEmbedding(std::move(b), scale);
  }

  int num_frequencies() const { return static_cast<int>(freq_.rows()); }
  int output_dim() const { return 2 * num_frequencies(); }
  double scale() const { return scale_; }
  const Mat<double>& frequencies() const { return freq_; }

  // Features for N points given as an N x 2 matrix. The result is
  // output_dim x N (one column per point): cos(2 pi B c) stacked over
  // sin(2 pi B c).
  Mat<Real> embed(const Eigen::Matrix<double, Eigen::Dynamic, 2>& coords) const {
    require(coords.allFinite(), "embed: non-finite coordinates");
    const Eigen::Index f = freq_.rows();
    const Mat<double> phase = 2.0 * std::numbers::pi * (freq_ * coords.transpose());
    Mat<Real> out(2 * f, coords.rows());
    out.topRows(f) = phase.array().cos().matrix().template cast<Real>();
    out.bottomRows(f) = phase.array().sin().matrix().template cast<Real>();
    return out;
  }

 private:
  Mat<double> freq_;
  double scale_ = 1.0;
};

}  // namespace inrct::nn
