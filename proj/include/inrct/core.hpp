#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace inrct {

template <class Real>
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
template <class Real>
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

using VecD = Vec<double>;
using MatD = Mat<double>;

// Flat parameter vector of one network.
template <class Real>
using WeightVector = Vec<Real>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(what);
}

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <class Range>
bool all_finite(const Range& r) {
  return std::all_of(std::begin(r), std::end(r), [](auto v) { return std::isfinite(v); });
}

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

// Square pixel lattice. Pixel (row, col) has its center at
//   x = (col + 0.5 - side/2) * spacing,  y = (side/2 - row - 0.5) * spacing
// so the grid is centered on the rotation axis; row 0 is the top.
struct GridSpec {
  int side = 64;
  double spacing = 2.0 / 64;

  static GridSpec unit_square(int side) { return {side, 2.0 / side}; }

  std::size_t pixels() const { return static_cast<std::size_t>(side) * side; }
  double half_extent() const { return 0.5 * side * spacing; }
  double x_of(int col) const { return (col + 0.5 - 0.5 * side) * spacing; }
  double y_of(int row) const { return (0.5 * side - row - 0.5) * spacing; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Attenuation per unit length on a square grid, row-major.
class ImageGrid {
 public:
  ImageGrid() = default;
  explicit ImageGrid(GridSpec spec) : spec_(spec), values_(VecD::Zero(spec.pixels())) { validate_spec(); }
  ImageGrid(GridSpec spec, VecD values) : spec_(spec), values_(std::move(values)) {
    validate_spec();
    require_shape(values_.size() == static_cast<Eigen::Index>(spec_.pixels()),
                  "image values length " + std::to_string(values_.size()) + " != side^2 = " +
                      std::to_string(spec_.pixels()));
    require(values_.allFinite(), "image contains non-finite values");
  }

  const GridSpec& spec() const { return spec_; }
  int side() const { return spec_.side; }
  double spacing() const { return spec_.spacing; }

  const VecD& values() const { return values_; }
  VecD& values() { return values_; }

  double operator()(int row, int col) const { return values_[index(row, col)]; }
  double& operator()(int row, int col) { return values_[index(row, col)]; }

  Eigen::Index index(int row, int col) const { return static_cast<Eigen::Index>(row) * spec_.side + col; }

 private:
  void validate_spec() const {
    require(spec_.side > 0, "grid side must be positive");
    require(spec_.spacing > 0 && std::isfinite(spec_.spacing), "grid spacing must be positive");
  }

  GridSpec spec_;
  VecD values_;
};

// Normalized [-1, 1]^2 coordinates of every pixel center, one row per pixel
// in row-major image order.
inline Eigen::Matrix<double, Eigen::Dynamic, 2> pixel_coordinates(const GridSpec& grid) {
  Eigen::Matrix<double, Eigen::Dynamic, 2> c(static_cast<Eigen::Index>(grid.pixels()), 2);
  const double h = grid.half_extent();
  for (int r = 0; r < grid.side; ++r)
    for (int col = 0; col < grid.side; ++col) {
      const Eigen::Index i = static_cast<Eigen::Index>(r) * grid.side + col;
      c(i, 0) = grid.x_of(col) / h;
      c(i, 1) = grid.y_of(r) / h;
    }
  return c;
}

// splitmix64: derives independent sub-seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Worker count for node-level parallelism. INRCT_THREADS overrides the
// hardware default; results never depend on this value.
inline int worker_count() {
  if (const char* env = std::getenv("INRCT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n). Each index is processed by exactly one worker,
// so per-index outputs are identical to a sequential loop.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int workers = worker_count()) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += count) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace inrct
