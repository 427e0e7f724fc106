#pragma once

// Dense real matrix and the arithmetic the solvers need.
//
// Storage is row-major: element (i, j) lives at data[i * cols + j]. The
// hot loops of the solvers are A·Y (n×n times n×p) and G·Yᵀ (n×p times
// p×n); both stream contiguous rows in this layout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "l4dict/error.hpp"

namespace l4dict {

class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    check_shape();
    if (!std::isfinite(fill)) throw NonFinite("Matrix: non-finite fill value");
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    check_shape();
    if (data_.size() != rows_ * cols_)
      throw DimensionMismatch("Matrix: data length " + std::to_string(data_.size()) +
                              " does not match " + std::to_string(rows_) + "x" +
                              std::to_string(cols_));
    for (double v : data_)
      if (!std::isfinite(v)) throw NonFinite("Matrix: non-finite entry");
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    check_shape();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionMismatch("Matrix: ragged initializer list");
      for (double v : r) {
        if (!std::isfinite(v)) throw NonFinite("Matrix: non-finite entry");
        data_.push_back(v);
      }
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix& operator+=(const Matrix& o) {
    require_same_shape(o, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    require_same_shape(o, "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Matrix& operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  friend Matrix operator-(Matrix a) { return a *= -1.0; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  void check_shape() const {
    if (rows_ == 0 || cols_ == 0) throw DimensionMismatch("Matrix: empty shape");
  }
  void require_same_shape(const Matrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw DimensionMismatch(std::string("Matrix ") + op + ": shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

// Four independent accumulators let the compiler pipeline the reduction
// without reassociation flags.
inline double dot(const double* a, const double* b, std::size_t n) noexcept {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

// a · b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw DimensionMismatch("matmul: " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " times " + std::to_string(b.rows()) +
                            "x" + std::to_string(b.cols()));
  Matrix c(a.rows(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < m; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

// a · bᵀ without materializing the transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionMismatch("matmul_nt: inner dimension mismatch");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      c(i, j) = detail::dot(a.row(i).data(), b.row(j).data(), a.cols());
  return c;
}

// aᵀ · b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionMismatch("matmul_tn: inner dimension mismatch");
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* ak = a.row(k).data();
    const double* bk = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      double* ci = c.row(i).data();
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

inline double ipow(double x, int r) noexcept {
  double y = x;
  for (int k = 1; k < r; ++k) y *= x;
  return y;
}

// Entry-wise r-th power, r >= 1.
inline Matrix hadamard_power(Matrix m, int r) {
  if (r < 1) throw InvalidArgument("hadamard_power: exponent must be >= 1");
  if (r == 1) return m;
  for (double& v : m.data()) v = ipow(v, r);
  return m;
}

// Σ m_ij^{order}; order must be even and >= 2.
inline double l2k_norm(const Matrix& m, int order) {
  if (order < 2 || order % 2 != 0) throw InvalidArgument("l2k_norm: order must be even and >= 2");
  double s = 0.0;
  for (double v : m.data()) s += ipow(v, order);
  return s;
}

inline double l4_norm_4th(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) {
    const double v2 = v * v;
    s += v2 * v2;
  }
  return s;
}

inline double frobenius_sq(const Matrix& m) noexcept {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

inline double frobenius(const Matrix& m) noexcept { return std::sqrt(frobenius_sq(m)); }

inline double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("frobenius_distance: shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.data()[k] - b.data()[k];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("max_abs_diff: shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    s = std::max(s, std::abs(a.data()[k] - b.data()[k]));
  return s;
}

// ‖WᵀW − I‖_F
inline double orthogonality_defect(const Matrix& w) {
  if (!w.is_square()) throw DimensionMismatch("orthogonality_defect: matrix must be square");
  Matrix g = matmul_tn(w, w);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return frobenius(g);
}

// A square Matrix certified on construction to satisfy
// ‖WᵀW − I‖_F <= ortho_tol·√n.
class OrthogonalMatrix {
 public:
  static constexpr double kDefaultTol = 1e-8;

  explicit OrthogonalMatrix(Matrix m, double ortho_tol = kDefaultTol)
      : inner_(std::move(m)), ortho_tol_(ortho_tol) {
    if (!inner_.is_square()) throw NotOrthogonal("OrthogonalMatrix: matrix is not square");
    const double defect = orthogonality_defect(inner_);
    const double bound = ortho_tol_ * std::sqrt(static_cast<double>(inner_.rows()));
    if (!(defect <= bound)) {
      std::ostringstream os;
      os << "OrthogonalMatrix: ||W^T W - I||_F = " << defect << " exceeds " << bound;
      throw NotOrthogonal(os.str());
    }
  }

  static OrthogonalMatrix identity(std::size_t n) {
    return OrthogonalMatrix(Matrix::identity(n));
  }

  const Matrix& matrix() const noexcept { return inner_; }
  operator const Matrix&() const noexcept { return inner_; }  // NOLINT(google-explicit-constructor)

  std::size_t n() const noexcept { return inner_.rows(); }
  double ortho_tol() const noexcept { return ortho_tol_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return inner_(i, j); }

  OrthogonalMatrix transpose() const { return OrthogonalMatrix(inner_.transpose(), ortho_tol_); }

  friend bool operator==(const OrthogonalMatrix& a, const OrthogonalMatrix& b) {
    return a.inner_ == b.inner_;
  }

 private:
  Matrix inner_;
  double ortho_tol_;
};

// Product of two orthogonal matrices, re-certified at the looser tolerance.
inline OrthogonalMatrix operator*(const OrthogonalMatrix& a, const OrthogonalMatrix& b) {
  return OrthogonalMatrix(matmul(a.matrix(), b.matrix()),
                          2.0 * std::max(a.ortho_tol(), b.ortho_tol()));
}

// ---------------------------------------------------------------------------
// Text format: "rows cols" on the first line, then one line per row with
// space-separated values printed to 17 significant digits.

inline void write_matrix(std::ostream& os, const Matrix& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  char buf[40];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) os << ' ';
      os << buf;
    }
    os << '\n';
  }
}

inline Matrix read_matrix(std::istream& is) {
  std::size_t rows = 0, cols = 0;
  if (!(is >> rows >> cols)) throw ParseError("read_matrix: missing 'rows cols' header");
  if (rows == 0 || cols == 0) throw ParseError("read_matrix: empty shape");
  std::vector<double> data;
  data.reserve(rows * cols);
  std::string tok;
  for (std::size_t k = 0; k < rows * cols; ++k) {
    if (!(is >> tok))
      throw ParseError("read_matrix: expected " + std::to_string(rows * cols) +
                       " values, got " + std::to_string(k));
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw ParseError("read_matrix: bad number '" + tok + "'");
    data.push_back(v);
  }
  if (is >> tok) throw ParseError("read_matrix: trailing data after matrix");
  return Matrix(rows, cols, std::move(data));
}

inline std::string to_text(const Matrix& m) {
  std::ostringstream os;
  write_matrix(os, m);
  return os.str();
}

inline Matrix from_text(const std::string& s) {
  std::istringstream is(s);
  return read_matrix(is);
}

inline void save_matrix(const std::string& path, const Matrix& m) {
  std::ofstream os(path);
  if (!os) throw Error("save_matrix: cannot open " + path);
  write_matrix(os, m);
  if (!os) throw Error("save_matrix: write failed for " + path);
}

inline Matrix load_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("load_matrix: cannot open " + path);
  return read_matrix(is);
}

}  // namespace l4dict
