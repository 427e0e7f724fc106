#pragma once

// Image-set ingestion (IDX format), dictionary learning on vectorized
// images, a PCA baseline, and top-k reconstruction.
//
// IDX image files: a big-endian header of magic 0x00000803, the image
// count, rows and columns (each a 32-bit unsigned integer), then
// count·rows·cols unsigned bytes in row-major order per image.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "l4dict/error.hpp"
#include "l4dict/experiments.hpp"
#include "l4dict/linalg.hpp"
#include "l4dict/matrix.hpp"
#include "l4dict/solver.hpp"

namespace l4dict {

class BadMagic : public Error {
 public:
  using Error::Error;
};
class TruncatedFile : public Error {
 public:
  using Error::Error;
};
class DimensionOverflow : public Error {
 public:
  using Error::Error;
};
class ZeroVariance : public Error {
 public:
  using Error::Error;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;

struct ImageSet {
  std::size_t count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // count·height·width values in [0, 1], image-major

  std::size_t dim() const noexcept { return height * width; }

  // n×count matrix whose j-th column is image j.
  Matrix data_matrix() const {
    const std::size_t n = dim();
    Matrix y(n, count);
    for (std::size_t j = 0; j < count; ++j)
      for (std::size_t i = 0; i < n; ++i) y(i, j) = pixels[j * n + i];
    return y;
  }

  static ImageSet from_matrix(const Matrix& y, std::size_t height, std::size_t width) {
    if (y.rows() != height * width)
      throw DimensionMismatch("ImageSet: matrix rows must equal height*width");
    ImageSet s{y.cols(), height, width, std::vector<double>(y.size())};
    for (std::size_t j = 0; j < y.cols(); ++j)
      for (std::size_t i = 0; i < y.rows(); ++i) s.pixels[j * y.rows() + i] = y(i, j);
    return s;
  }
};

namespace detail {
inline std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}
inline void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}
}  // namespace detail

inline ImageSet parse_idx_images(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw TruncatedFile("idx: header shorter than 16 bytes");
  const std::uint32_t magic = detail::read_be32(bytes, 0);
  if (magic != kIdxImageMagic) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "idx: bad magic 0x%08x (expected 0x%08x)", magic,
                  kIdxImageMagic);
    throw BadMagic(buf);
  }
  const std::uint64_t count = detail::read_be32(bytes, 4);
  const std::uint64_t rows = detail::read_be32(bytes, 8);
  const std::uint64_t cols = detail::read_be32(bytes, 12);
  if (rows == 0 || cols == 0) throw DimensionOverflow("idx: zero image dimension");
  const std::uint64_t per_image = rows * cols;  // < 2^64 for 32-bit fields
  if (count != 0 && per_image > std::numeric_limits<std::uint64_t>::max() / count)
    throw DimensionOverflow("idx: count*rows*cols overflows 64 bits");
  const std::uint64_t payload = count * per_image;
  if (bytes.size() - 16 < payload)
    throw TruncatedFile("idx: expected " + std::to_string(payload) + " pixel bytes, found " +
                        std::to_string(bytes.size() - 16));
  ImageSet s{count, rows, cols, std::vector<double>(payload)};
  for (std::size_t k = 0; k < payload; ++k) s.pixels[k] = bytes[16 + k] / 255.0;
  return s;
}

inline ImageSet load_idx_images(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("idx: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return parse_idx_images(bytes);
}

// Pixels are quantized to round(255·v); exact for sets read from IDX.
inline std::vector<std::uint8_t> encode_idx_images(const ImageSet& s) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + s.pixels.size());
  detail::write_be32(out, kIdxImageMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(s.count));
  detail::write_be32(out, static_cast<std::uint32_t>(s.height));
  detail::write_be32(out, static_cast<std::uint32_t>(s.width));
  for (double v : s.pixels)
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return out;
}

inline void save_idx_images(const std::string& path, const ImageSet& s) {
  const auto bytes = encode_idx_images(s);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("idx: cannot open " + path);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// MSP dictionary learning on the raw n×count data matrix (no centering, no
// whitening). Returns A_T; the learned dictionary is A_Tᵀ. `theta` only
// scales the f̂ trace.
inline SolveTrace learn_image_dictionary_trace(const ImageSet& images, const SolveConfig& cfg,
                                               std::uint64_t seed, double theta = 0.5) {
  const std::size_t n = images.dim();
  if (n < 2) throw InvalidArgument("learn_image_dictionary: images need at least 2 pixels");
  if (images.count < n)
    throw InvalidArgument("learn_image_dictionary: need at least as many images as pixels");
  return msp_dl(initial_iterate(n, seed), images.data_matrix(), theta, cfg);
}

inline OrthogonalMatrix learn_image_dictionary(const ImageSet& images, const SolveConfig& cfg,
                                               std::uint64_t seed) {
  return learn_image_dictionary_trace(images, cfg, seed).final_iterate;
}

struct PcaBasis {
  Matrix components;               // n×k, orthonormal columns, by descending variance
  std::vector<double> variances;   // per component
  std::vector<double> mean;        // per pixel
};

// Top-k principal directions of the mean-centered data matrix (columns
// are samples), from the SVD of the n×n scatter matrix.
inline PcaBasis pca_basis(const Matrix& data, std::size_t k) {
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  if (k == 0 || k > n) throw InvalidArgument("pca_basis: k must lie in [1, n]");
  std::vector<double> mean(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = data.row(i);
    mean[i] = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(p);
  }
  Matrix centered = data;
  for (std::size_t i = 0; i < n; ++i)
    for (double& v : centered.row(i)) v -= mean[i];
  Matrix scatter = matmul_nt(centered, centered);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += scatter(i, i);
  if (!(total > 0.0)) throw ZeroVariance("pca_basis: data have zero variance");
  scatter *= 1.0 / static_cast<double>(p);
  const SvdResult s = svd(scatter);
  PcaBasis out{Matrix(n, k), std::vector<double>(s.sigma.begin(), s.sigma.begin() + k),
               std::move(mean)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out.components(i, j) = s.u(i, j);
  return out;
}

inline PcaBasis pca_basis(const ImageSet& images, std::size_t k) {
  return pca_basis(images.data_matrix(), k);
}

enum class BasisRanking {
  AsGiven,  // keep columns in their stored order (PCA)
  Energy,   // by mean squared coefficient Σ_j (b_iᵀ y_j)² / p, descending
};

// Column order of `basis` (n×m, orthonormal columns) under `ranking`.
inline std::vector<std::size_t> rank_basis(const Matrix& data, const Matrix& basis,
                                           BasisRanking ranking) {
  std::vector<std::size_t> order(basis.cols());
  std::iota(order.begin(), order.end(), 0);
  if (ranking == BasisRanking::AsGiven) return order;
  const Matrix coeff = matmul_tn(basis, data);  // m×p
  std::vector<double> energy(basis.cols());
  for (std::size_t i = 0; i < basis.cols(); ++i) {
    const auto r = coeff.row(i);
    energy[i] = detail::dot(r.data(), r.data(), r.size()) / static_cast<double>(data.cols());
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return energy[a] > energy[b]; });
  return order;
}

struct Reconstruction {
  Matrix images;                  // n×p
  std::vector<double> per_image;  // mean squared error per image
  double mse = 0.0;               // mean over images
};

// Keeps the top-k ranked columns B_k of `basis` and reconstructs every
// sample as B_k·B_kᵀ·y. Both basis types use this same linear rule.
inline Reconstruction reconstruct_topk(const Matrix& data, const Matrix& basis,
                                       BasisRanking ranking, std::size_t k) {
  const std::size_t n = data.rows();
  if (basis.rows() != n) throw DimensionMismatch("reconstruct_topk: basis has wrong row count");
  if (k == 0 || k > basis.cols()) throw InvalidArgument("reconstruct_topk: k out of range");
  const auto order = rank_basis(data, basis, ranking);
  Matrix bk(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) bk(i, j) = basis(i, order[j]);
  Matrix rec = matmul(bk, matmul_tn(bk, data));
  Reconstruction out{std::move(rec), std::vector<double>(data.cols(), 0.0), 0.0};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < data.cols(); ++j) {
      const double d = data(i, j) - out.images(i, j);
      out.per_image[j] += d * d;
    }
  for (double& e : out.per_image) {
    e /= static_cast<double>(n);
    out.mse += e;
  }
  out.mse /= static_cast<double>(data.cols());
  return out;
}

}  // namespace l4dict
