#pragma once

#include "inrct/core.hpp"
#include "inrct/projector.hpp"

#include <numbers>
#include <random>

namespace inrct {

// Ellipse in normalized [-1, 1]^2 coordinates; angle in radians.
struct Ellipse {
  double cx = 0, cy = 0;
  double ax = 0.5, ay = 0.5;
  double angle = 0;
  double intensity = 1;

  bool contains(double x, double y) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (x - cx) * c + (y - cy) * s;
    const double v = -(x - cx) * s + (y - cy) * c;
    return (u * u) / (ax * ax) + (v * v) / (ay * ay) <= 1.0;
  }
};

struct PhantomFamilySpec {
  int side = 64;
  std::vector<Ellipse> base_ellipses;
  double jitter = 0.05;
  int count = 10;
  std::uint64_t seed = 0;
  int supersample = 4;

  void validate() const {
    require(side >= 1, "phantom side must be >= 1");
    require(count >= 1, "phantom family count must be >= 1");
    require(jitter >= 0 && std::isfinite(jitter), "phantom jitter must be >= 0");
    require(supersample >= 1, "supersample must be >= 1");
    for (const auto& e : base_ellipses) {
      require(e.intensity >= 0 && e.intensity <= 1, "ellipse intensity outside [0, 1]");
      require(e.ax > 0 && e.ay > 0, "ellipse axes must be positive");
    }
  }
};

// Six nested ellipses in the spirit of Shepp-Logan, painted in order so
// later ellipses overwrite earlier ones.
inline std::vector<Ellipse> default_ellipse_layout() {
  const double deg = std::numbers::pi / 180.0;
  return {
      {0.0, 0.0, 0.69, 0.88, 0.0, 0.8},
      {0.0, -0.02, 0.62, 0.80, 0.0, 0.25},
      {0.22, 0.05, 0.12, 0.32, -18 * deg, 0.55},
      {-0.22, 0.05, 0.16, 0.40, 18 * deg, 0.45},
      {0.0, 0.38, 0.20, 0.24, 0.0, 0.9},
      {0.0, -0.55, 0.10, 0.07, 0.0, 1.0},
  };
}

// Largest |coordinate| any ellipse may reach after jitter.
inline constexpr double kPhantomBound = 0.98;

namespace detail {

inline Ellipse clamp_into_grid(Ellipse e) {
  e.ax = std::clamp(e.ax, 1e-3, kPhantomBound);
  e.ay = std::clamp(e.ay, 1e-3, kPhantomBound);
  const double reach = std::max(e.ax, e.ay);
  const double limit = kPhantomBound - reach;
  e.cx = std::clamp(e.cx, -std::max(limit, 0.0), std::max(limit, 0.0));
  e.cy = std::clamp(e.cy, -std::max(limit, 0.0), std::max(limit, 0.0));
  e.intensity = std::clamp(e.intensity, 0.0, 1.0);
  return e;
}

}  // namespace detail

inline ImageGrid rasterize_ellipses(const std::vector<Ellipse>& ellipses, int side, int supersample = 4) {
  const GridSpec grid = GridSpec::unit_square(side);
  ImageGrid img(grid);
  const double h = grid.half_extent();
  const double sub = grid.spacing / supersample;
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      double acc = 0;
      for (int sr = 0; sr < supersample; ++sr)
        for (int sc = 0; sc < supersample; ++sc) {
          const double x = (grid.x_of(c) - 0.5 * grid.spacing + (sc + 0.5) * sub) / h;
          const double y = (grid.y_of(r) + 0.5 * grid.spacing - (sr + 0.5) * sub) / h;
          double v = 0;
          for (const auto& e : ellipses)
            if (e.contains(x, y)) v = e.intensity;
          acc += v;
        }
      img(r, c) = std::clamp(acc / (supersample * supersample), 0.0, 1.0);
    }
  return img;
}

// Member i scales every ellipse parameter p by (1 + jitter * z), z ~ N(0, 1)
// drawn from the member's own sub-seed, so parameters that are zero in the
// base layout (centered ellipses, unrotated axes) stay put.
inline std::vector<ImageGrid> make_phantom_family(const PhantomFamilySpec& spec) {
  spec.validate();
  const auto& base = spec.base_ellipses.empty() ? default_ellipse_layout() : spec.base_ellipses;
  std::vector<ImageGrid> family(static_cast<std::size_t>(spec.count));
  parallel_for(family.size(), [&](std::size_t i) {
    std::mt19937_64 rng(mix_seed(spec.seed, i));
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<Ellipse> layout;
    layout.reserve(base.size());
    for (const auto& e0 : base) {
      Ellipse e = e0;
      const double j = spec.jitter;
      e.cx *= 1 + j * z(rng);
      e.cy *= 1 + j * z(rng);
      e.ax *= 1 + j * z(rng);
      e.ay *= 1 + j * z(rng);
      e.angle *= 1 + j * z(rng);
      e.intensity *= 1 + j * z(rng);
      layout.push_back(detail::clamp_into_grid(e));
    }
    family[i] = rasterize_ellipses(layout, spec.side, spec.supersample);
  });
  return family;
}

// Uniform disk of the given normalized radius, anti-aliased by supersampling.
inline ImageGrid make_disk(int side, double radius = 0.5, double intensity = 1.0, int supersample = 4) {
  return rasterize_ellipses({{0, 0, radius, radius, 0, intensity}}, side, supersample);
}

struct NoiseSpec {
  double photon_count = 5000;  // I0
  double gamma_abs = 0.5;      // average absorption
  std::uint64_t seed = 0;
  // Line integrals are rescaled so that max(gamma * y) equals this value
  // before counts are drawn, then scaled back. <= 0 disables rescaling.
  double max_attenuation = 4.0;

  void validate() const {
    require(photon_count > 0 && std::isfinite(photon_count), "photon count I0 must be > 0");
    require(gamma_abs > 0 && gamma_abs <= 1, "absorption must lie in (0, 1]");
  }
};

struct NoisySinogram {
  Sinogram sinogram;
  std::size_t clamped_zero_counts = 0;
  double scale = 1.0;
};

// Expected detected count for an (already scaled) line integral. Counts
// fall with thicker material.
inline double expected_counts(double line_integral, const NoiseSpec& spec) {
  return spec.photon_count * std::exp(-spec.gamma_abs * line_integral);
}

// Draws Poisson photon counts per bin and maps them back through the log
// transform. Zero-count draws are clamped to one count and tallied.
inline NoisySinogram apply_poisson_noise(const Sinogram& sino, const NoiseSpec& spec) {
  spec.validate();
  NoisySinogram out{sino, 0, 1.0};
  const double peak = sino.values.size() ? sino.values.maxCoeff() : 0.0;
  if (spec.max_attenuation > 0 && peak > 0) out.scale = spec.max_attenuation / (spec.gamma_abs * peak);
  std::mt19937_64 rng(spec.seed);
  for (Eigen::Index i = 0; i < sino.values.size(); ++i) {
    const double y0 = sino.values[i] * out.scale;
    std::poisson_distribution<long long> draw(expected_counts(y0, spec));
    long long counts = draw(rng);
    if (counts == 0) {
      counts = 1;
      ++out.clamped_zero_counts;
    }
    const double y = -std::log(static_cast<double>(counts) / spec.photon_count) / spec.gamma_abs;
    out.sinogram.values[i] = y / out.scale;
  }
  return out;
}

}  // namespace inrct
