#pragma once

#include "inrct/core.hpp"

#include <Eigen/Sparse>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace inrct {

// Parallel-beam acquisition: one detector row per angle, detector centered on
// the rotation axis. Angle a puts the detector axis along (cos a, sin a) and
// rays along (-sin a, cos a).
struct ProjectionGeometry {
  std::vector<double> angles;
  int detector_count = 1;
  double detector_spacing = 1.0;
  double arc_degrees = 180.0;

  // Equispaced angles over [0, arc). detectors <= 0 picks the smallest count
  // whose span covers the grid diagonal at pixel pitch.
  static ProjectionGeometry parallel(int n_angles, const GridSpec& grid, double arc_degrees = 180.0,
                                     int detectors = 0) {
    require(n_angles >= 1, "geometry needs at least one angle");
    ProjectionGeometry g;
    g.arc_degrees = arc_degrees;
    const double arc = arc_degrees * std::numbers::pi / 180.0;
    g.angles.resize(static_cast<std::size_t>(n_angles));
    for (int i = 0; i < n_angles; ++i) g.angles[static_cast<std::size_t>(i)] = arc * i / n_angles;
    g.detector_spacing = grid.spacing;
    g.detector_count = detectors > 0 ? detectors : static_cast<int>(std::ceil(grid.side * std::numbers::sqrt2 - 1e-9));
    g.validate();
    return g;
  }

  std::size_t bins() const { return angles.size() * static_cast<std::size_t>(detector_count); }
  double detector_center(int k) const { return (k + 0.5 - 0.5 * detector_count) * detector_spacing; }

  void validate() const {
    require(!angles.empty(), "geometry has an empty angle list");
    require(detector_count >= 1, "detector_count must be >= 1");
    require(detector_spacing > 0 && std::isfinite(detector_spacing), "detector_spacing must be positive");
    require(arc_degrees > 0 && std::isfinite(arc_degrees), "arc must be positive");
    const double arc = arc_degrees * std::numbers::pi / 180.0;
    for (std::size_t i = 0; i < angles.size(); ++i) {
      require(std::isfinite(angles[i]), "non-finite projection angle");
      require(angles[i] >= 0 && angles[i] < arc + 1e-12, "angles must lie in [0, arc)");
      if (i > 0) require(angles[i] > angles[i - 1], "angles must be strictly increasing");
    }
  }

  friend bool operator==(const ProjectionGeometry&, const ProjectionGeometry&) = default;
};

// Line integrals, row-major: one row of detector_count values per angle.
struct Sinogram {
  ProjectionGeometry geometry;
  VecD values;

  Sinogram() = default;
  Sinogram(ProjectionGeometry g, VecD v) : geometry(std::move(g)), values(std::move(v)) {
    require_shape(values.size() == static_cast<Eigen::Index>(geometry.bins()),
                  "sinogram length does not match geometry");
    require(values.allFinite(), "sinogram contains non-finite values");
  }
  explicit Sinogram(ProjectionGeometry g) : geometry(std::move(g)), values(VecD::Zero(geometry.bins())) {}

  int angle_count() const { return static_cast<int>(geometry.angles.size()); }
  int detector_count() const { return geometry.detector_count; }
  double operator()(int angle, int det) const { return values[angle * geometry.detector_count + det]; }
};

namespace detail {

inline void check_consistent(const ProjectionGeometry& g, const GridSpec& grid) {
  g.validate();
  require(grid.side > 0 && grid.spacing > 0, "invalid grid");
  const double diagonal = grid.side * grid.spacing * std::numbers::sqrt2;
  require(g.detector_count * g.detector_spacing >= diagonal - grid.spacing,
          "detector array does not cover the grid's bounding square");
}

// Ray sampling: points every half pixel along the ray, symmetric about the
// detector, reaching past the grid's half diagonal.
struct RaySampling {
  double step;
  int half_count;

  explicit RaySampling(const GridSpec& grid) : step(0.5 * grid.spacing) {
    const double reach = grid.half_extent() * std::numbers::sqrt2 + grid.spacing;
    half_count = static_cast<int>(std::ceil(reach / step));
  }
};

}  // namespace detail

// Visits every (ray, pixel, weight) contribution of the discretized operator.
// Each sample point is bilinearly interpolated from its four neighbouring
// pixel centers (zero outside the grid) and weighted by the step length.
// visit(ray, pixel, weight) may be called several times for the same pair.
template <class Visit>
void trace_rays(const ProjectionGeometry& g, const GridSpec& grid, Visit&& visit) {
  detail::check_consistent(g, grid);
  const detail::RaySampling s(grid);
  const int side = grid.side;
  const double inv = 1.0 / grid.spacing;
  const double offset = 0.5 * side - 0.5;
  for (std::size_t a = 0; a < g.angles.size(); ++a) {
    const double c = std::cos(g.angles[a]);
    const double sn = std::sin(g.angles[a]);
    for (int k = 0; k < g.detector_count; ++k) {
      const std::size_t ray = a * static_cast<std::size_t>(g.detector_count) + static_cast<std::size_t>(k);
      const double d = g.detector_center(k);
      for (int n = -s.half_count; n <= s.half_count; ++n) {
        const double t = n * s.step;
        const double x = d * c - t * sn;
        const double y = d * sn + t * c;
        const double col = x * inv + offset;
        const double row = offset - y * inv;
        if (col <= -1.0 || row <= -1.0 || col >= side || row >= side) continue;
        const double c0 = std::floor(col);
        const double r0 = std::floor(row);
        const double fx = col - c0;
        const double fy = row - r0;
        const int j0 = static_cast<int>(c0);
        const int i0 = static_cast<int>(r0);
        const std::array<int, 2> rows{i0, i0 + 1};
        const std::array<int, 2> cols{j0, j0 + 1};
        const std::array<double, 2> wr{1.0 - fy, fy};
        const std::array<double, 2> wc{1.0 - fx, fx};
        for (int u = 0; u < 2; ++u) {
          if (rows[u] < 0 || rows[u] >= side || wr[u] == 0.0) continue;
          for (int v = 0; v < 2; ++v) {
            if (cols[v] < 0 || cols[v] >= side || wc[v] == 0.0) continue;
            visit(ray, static_cast<std::size_t>(rows[u]) * side + cols[v], s.step * wr[u] * wc[v]);
          }
        }
      }
    }
  }
}

inline Sinogram forward_project(const ImageGrid& image, const ProjectionGeometry& geom) {
  require(image.values().allFinite(), "forward_project: non-finite image");
  VecD out = VecD::Zero(static_cast<Eigen::Index>(geom.bins()));
  const VecD& x = image.values();
  trace_rays(geom, image.spec(), [&](std::size_t ray, std::size_t px, double w) {
    out[static_cast<Eigen::Index>(ray)] += w * x[static_cast<Eigen::Index>(px)];
  });
  return Sinogram(geom, std::move(out));
}

// Exact transpose of forward_project.
inline ImageGrid back_project(const Sinogram& sino, const ProjectionGeometry& geom, const GridSpec& grid) {
  require_shape(sino.geometry == geom, "back_project: sinogram geometry mismatch");
  require(sino.values.allFinite(), "back_project: non-finite sinogram");
  VecD out = VecD::Zero(static_cast<Eigen::Index>(grid.pixels()));
  const VecD& y = sino.values;
  trace_rays(geom, grid, [&](std::size_t ray, std::size_t px, double w) {
    out[static_cast<Eigen::Index>(px)] += w * y[static_cast<Eigen::Index>(ray)];
  });
  return ImageGrid(grid, std::move(out));
}

inline constexpr int kDenseOperatorMaxSide = 64;

// Explicit matrix of the operator, for testing. Entries are accumulated
// pixel by pixel from the separable hat-function form of bilinear weights
// rather than through trace_rays.
inline MatD build_dense_operator(const ProjectionGeometry& geom, const GridSpec& grid) {
  require(grid.side <= kDenseOperatorMaxSide, "build_dense_operator: grid side exceeds 64");
  detail::check_consistent(geom, grid);
  const detail::RaySampling s(grid);
  const int side = grid.side;
  MatD a = MatD::Zero(static_cast<Eigen::Index>(geom.bins()), static_cast<Eigen::Index>(grid.pixels()));
  auto hat = [](double u) { return std::max(0.0, 1.0 - std::abs(u)); };
  for (std::size_t ang = 0; ang < geom.angles.size(); ++ang) {
    const double c = std::cos(geom.angles[ang]);
    const double sn = std::sin(geom.angles[ang]);
    for (int k = 0; k < geom.detector_count; ++k) {
      const Eigen::Index ray = static_cast<Eigen::Index>(ang) * geom.detector_count + k;
      const double d = geom.detector_center(k);
      for (int n = -s.half_count; n <= s.half_count; ++n) {
        const double t = n * s.step;
        const double x = d * c - t * sn;
        const double y = d * sn + t * c;
        for (int row = 0; row < side; ++row) {
          const double wy = hat((y - grid.y_of(row)) / grid.spacing);
          if (wy == 0.0) continue;
          for (int col = 0; col < side; ++col) {
            const double wx = hat((x - grid.x_of(col)) / grid.spacing);
            if (wx == 0.0) continue;
            a(ray, static_cast<Eigen::Index>(row) * side + col) += s.step * wx * wy;
          }
        }
      }
    }
  }
  return a;
}

// Sparse cache of the operator for repeated application during training.
class ProjectionOperator {
 public:
  using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  ProjectionOperator(ProjectionGeometry geom, GridSpec grid) : geom_(std::move(geom)), grid_(grid) {
    std::vector<Eigen::Triplet<double>> entries;
    trace_rays(geom_, grid_, [&](std::size_t ray, std::size_t px, double w) {
      entries.emplace_back(static_cast<int>(ray), static_cast<int>(px), w);
    });
    matrix_.resize(static_cast<Eigen::Index>(geom_.bins()), static_cast<Eigen::Index>(grid_.pixels()));
    matrix_.setFromTriplets(entries.begin(), entries.end());
    matrix_.makeCompressed();
  }

  const ProjectionGeometry& geometry() const { return geom_; }
  const GridSpec& grid() const { return grid_; }
  const SparseRows& matrix() const { return matrix_; }

  VecD apply(const VecD& image) const {
    require_shape(image.size() == matrix_.cols(), "ProjectionOperator::apply: size mismatch");
    return matrix_ * image;
  }
  VecD adjoint(const VecD& sino) const {
    require_shape(sino.size() == matrix_.rows(), "ProjectionOperator::adjoint: size mismatch");
    return matrix_.transpose() * sino;
  }

  Sinogram project(const ImageGrid& image) const { return Sinogram(geom_, apply(image.values())); }
  ImageGrid back(const Sinogram& sino) const { return ImageGrid(grid_, adjoint(sino.values)); }

 private:
  ProjectionGeometry geom_;
  GridSpec grid_;
  SparseRows matrix_;
};

// Binary layout: "SINO", uint32 angles, uint32 detectors, uint32 reserved,
// then angles*detectors little-endian float32 values.
inline void save_sinogram(const Sinogram& sino, const std::string& path) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot open " + path);
  const std::uint32_t header[3] = {static_cast<std::uint32_t>(sino.angle_count()),
                                   static_cast<std::uint32_t>(sino.detector_count()), 0u};
  out.write("SINO", 4);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  for (Eigen::Index i = 0; i < sino.values.size(); ++i) {
    const float v = static_cast<float>(sino.values[i]);
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  require(static_cast<bool>(out), "write failed: " + path);
}

struct RawSinogram {
  int angles = 0;
  int detectors = 0;
  VecD values;
};

inline RawSinogram read_sinogram_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path);
  char magic[4];
  std::uint32_t header[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  require(static_cast<bool>(in) && std::memcmp(magic, "SINO", 4) == 0, path + ": not a sinogram file");
  RawSinogram raw{static_cast<int>(header[0]), static_cast<int>(header[1]), {}};
  const std::size_t n = static_cast<std::size_t>(raw.angles) * static_cast<std::size_t>(raw.detectors);
  std::vector<float> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
  require(static_cast<bool>(in), path + ": truncated sinogram");
  raw.values = Eigen::Map<const Eigen::VectorXf>(buf.data(), static_cast<Eigen::Index>(n)).cast<double>();
  return raw;
}

inline Sinogram load_sinogram(const std::string& path, const ProjectionGeometry& geom) {
  RawSinogram raw = read_sinogram_file(path);
  require_shape(raw.angles == static_cast<int>(geom.angles.size()) && raw.detectors == geom.detector_count,
                path + ": dimensions do not match geometry");
  return Sinogram(geom, std::move(raw.values));
}

// One line per angle: angle in radians followed by the detector values.
inline void save_sinogram_csv(const Sinogram& sino, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot open " + path);
  out << "angle";
  for (int k = 0; k < sino.detector_count(); ++k) out << ",d" << k;
  out << '\n' << std::setprecision(9);
  for (int a = 0; a < sino.angle_count(); ++a) {
    out << sino.geometry.angles[static_cast<std::size_t>(a)];
    for (int k = 0; k < sino.detector_count(); ++k) out << ',' << sino(a, k);
    out << '\n';
  }
}

}  // namespace inrct
