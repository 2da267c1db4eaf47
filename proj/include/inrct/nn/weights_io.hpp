#pragma once

#include "inrct/nn/fourier.hpp"
#include "inrct/nn/siren.hpp"

#include <bit>
#include <fstream>

namespace inrct::nn {

static_assert(std::endian::native == std::endian::little, "weight files are little-endian");

namespace detail {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace detail

// "INRW" | u32 version | u32 input_dim | u32 width | u32 depth |
// u32 output_dim | f32 omega0 | u64 count | count x f32
template <class Real>
void save_weights(const std::string& path, const SirenArch& arch, const WeightVector<Real>& w) {
  require_shape(w.size() == arch.parameter_count(), "save_weights: length does not match architecture");
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot open " + path);
  out.write("INRW", 4);
  detail::put<std::uint32_t>(out, 1);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.input_dim));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.width));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.depth));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.output_dim));
  detail::put<float>(out, static_cast<float>(arch.omega0));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(w.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) detail::put<float>(out, static_cast<float>(w[i]));
  require(static_cast<bool>(out), "write failed: " + path);
}

template <class Real>
struct LoadedWeights {
  SirenArch arch;
  WeightVector<Real> weights;
};

template <class Real>
LoadedWeights<Real> load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  require(static_cast<bool>(in) && std::memcmp(magic, "INRW", 4) == 0, path + ": not a weight file");
  require(detail::get<std::uint32_t>(in) == 1, path + ": unsupported weight file version");
  LoadedWeights<Real> lw;
  lw.arch.input_dim = static_cast<int>(detail::get<std::uint32_t>(in));
  lw.arch.width = static_cast<int>(detail::get<std::uint32_t>(in));
  lw.arch.depth = static_cast<int>(detail::get<std::uint32_t>(in));
  lw.arch.output_dim = static_cast<int>(detail::get<std::uint32_t>(in));
  lw.arch.omega0 = detail::get<float>(in);
  const auto count = detail::get<std::uint64_t>(in);
  require(static_cast<bool>(in), path + ": truncated header");
  require(static_cast<Eigen::Index>(count) == lw.arch.parameter_count(),
          path + ": parameter count does not match architecture");
  lw.weights.resize(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < lw.weights.size(); ++i) lw.weights[i] = static_cast<Real>(detail::get<float>(in));
  require(static_cast<bool>(in), path + ": truncated weights");
  return lw;
}

// "FEMB" | u32 version | u32 num_frequencies | f64 scale | rows x 2 f64
// Frequencies are kept in double so reloaded embeddings are bit-identical.
template <class Real>
void save_embedding(const std::string& path, const FourierEmbedding<Real>& emb) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot open " + path);
  out.write("FEMB", 4);
  detail::put<std::uint32_t>(out, 1);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(emb.num_frequencies()));
  detail::put<double>(out, emb.scale());
  for (Eigen::Index i = 0; i < emb.frequencies().rows(); ++i)
    for (Eigen::Index j = 0; j < 2; ++j) detail::put<double>(out, emb.frequencies()(i, j));
  require(static_cast<bool>(out), "write failed: " + path);
}

template <class Real>
FourierEmbedding<Real> load_embedding(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  require(static_cast<bool>(in) && std::memcmp(magic, "FEMB", 4) == 0, path + ": not an embedding file");
  require(detail::get<std::uint32_t>(in) == 1, path + ": unsupported embedding version");
  const auto rows = detail::get<std::uint32_t>(in);
  const double scale = detail::get<double>(in);
  Mat<double> b(rows, 2);
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < 2; ++j) b(i, j) = detail::get<double>(in);
  require(static_cast<bool>(in), path + ": truncated embedding");
  return FourierEmbedding<Real>(std::move(b), scale);
}

}  // namespace inrct::nn
