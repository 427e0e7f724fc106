#pragma once

// SVD by one-sided (Hestenes) Jacobi, the polar projection onto O(n), and
// the nearest signed permutation of an orthogonal matrix.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "l4dict/error.hpp"
#include "l4dict/matrix.hpp"

namespace l4dict {

struct SvdResult {
  OrthogonalMatrix u;
  std::vector<double> sigma;  // descending, >= 0
  OrthogonalMatrix v;
};

namespace detail {

// Result of orthogonalizing the rows of an r×c matrix M (r <= c):
// rotated · M == rows, with the rows of `rows` mutually orthogonal and
// `rotated` orthogonal (r×r). Then M = rotatedᵀ · diag(σ) · Vᵀ where
// σ_i = ‖rows_i‖ and row i of Vᵀ is rows_i / σ_i.
struct RowJacobi {
  Matrix rows;
  Matrix rotated;
  std::vector<double> norms;
};

inline std::size_t jacobi_rotation_budget(std::size_t r) { return 30 * r * r; }

inline RowJacobi orthogonalize_rows(Matrix w) {
  const std::size_t r = w.rows();
  const std::size_t c = w.cols();
  if (r > c) throw DimensionMismatch("orthogonalize_rows: more rows than columns");
  Matrix q = Matrix::identity(r);
  std::vector<double> nrm(r);
  const double tol = std::numeric_limits<double>::epsilon() *
                     std::max(1.0, std::sqrt(static_cast<double>(c)));
  const std::size_t budget = jacobi_rotation_budget(r);
  std::size_t rotations = 0;

  auto rotate = [](double* x, double* y, std::size_t len, double cs, double sn) {
    for (std::size_t k = 0; k < len; ++k) {
      const double xk = x[k];
      const double yk = y[k];
      x[k] = cs * xk - sn * yk;
      y[k] = sn * xk + cs * yk;
    }
  };

  bool converged = (r == 1);
  while (!converged) {
    for (std::size_t i = 0; i < r; ++i) nrm[i] = dot(w.row(i).data(), w.row(i).data(), c);
    converged = true;
    for (std::size_t i = 0; i + 1 < r; ++i) {
      for (std::size_t j = i + 1; j < r; ++j) {
        double* wi = w.row(i).data();
        double* wj = w.row(j).data();
        const double alpha = nrm[i];
        const double beta = nrm[j];
        const double gamma = dot(wi, wj, c);
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        converged = false;
        if (++rotations > budget)
          throw NonConvergence("svd: one-sided Jacobi exceeded " + std::to_string(budget) +
                               " rotations");
        const double zeta = (beta - alpha) / (2.0 * gamma);
        double t;
        if (std::abs(zeta) > 1e150) {
          t = 0.5 / zeta;
        } else {
          t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        }
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        rotate(wi, wj, c, cs, sn);
        rotate(q.row(i).data(), q.row(j).data(), r, cs, sn);
        nrm[i] = alpha - t * gamma;
        nrm[j] = beta + t * gamma;
      }
    }
  }
  for (std::size_t i = 0; i < r; ++i)
    nrm[i] = std::sqrt(dot(w.row(i).data(), w.row(i).data(), c));
  return {std::move(w), std::move(q), std::move(nrm)};
}

// Fill rows of `v` flagged in `missing` with unit vectors orthogonal to
// every other row (modified Gram-Schmidt against the standard basis).
inline void complete_orthonormal_rows(Matrix& v, const std::vector<bool>& missing) {
  const std::size_t n = v.cols();
  std::vector<bool> done(v.rows());
  for (std::size_t i = 0; i < v.rows(); ++i) done[i] = !missing[i];
  std::size_t candidate = 0;
  for (std::size_t i = 0; i < v.rows(); ++i) {
    if (done[i]) continue;
    for (; candidate < n; ++candidate) {
      std::vector<double> e(n, 0.0);
      e[candidate] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < v.rows(); ++k) {
          if (!done[k]) continue;
          const double proj = dot(e.data(), v.row(k).data(), n);
          for (std::size_t j = 0; j < n; ++j) e[j] -= proj * v(k, j);
        }
      }
      const double len = std::sqrt(dot(e.data(), e.data(), n));
      if (len > 0.5) {
        for (std::size_t j = 0; j < n; ++j) v(i, j) = e[j] / len;
        done[i] = true;
        ++candidate;
        break;
      }
    }
  }
}

}  // namespace detail

// Full SVD of a square matrix: m = U · diag(σ) · Vᵀ.
inline SvdResult svd(const Matrix& m) {
  if (!m.is_square()) throw DimensionMismatch("svd: matrix must be square");
  const std::size_t n = m.rows();
  auto jac = detail::orthogonalize_rows(m);

  // Rows of vt are the right singular vectors; zero rows are completed.
  Matrix vt = jac.rows;
  std::vector<bool> missing(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = jac.norms[i];
    if (s < std::numeric_limits<double>::min()) {
      missing[i] = true;
      jac.norms[i] = 0.0;
      continue;
    }
    for (double& x : vt.row(i)) x /= s;
  }
  detail::complete_orthonormal_rows(vt, missing);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return jac.norms[a] > jac.norms[b]; });

  Matrix u(n, n);
  Matrix v(n, n);
  std::vector<double> sigma(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    sigma[k] = jac.norms[src];
    for (std::size_t i = 0; i < n; ++i) {
      u(i, k) = jac.rotated(src, i);  // U = rotatedᵀ
      v(i, k) = vt(src, i);
    }
  }
  return {OrthogonalMatrix(std::move(u)), std::move(sigma), OrthogonalMatrix(std::move(v))};
}

// Singular values ≤ this fraction of σ₁ make the polar factor non-unique.
inline constexpr double kRankTolerance = 1e-12;

// Frobenius-nearest orthogonal matrix U·Vᵀ.
inline OrthogonalMatrix project_orthogonal(const Matrix& m) {
  if (!m.is_square()) throw DimensionMismatch("project_orthogonal: matrix must be square");
  const std::size_t n = m.rows();
  auto jac = detail::orthogonalize_rows(m);
  const auto [lo, hi] = std::minmax_element(jac.norms.begin(), jac.norms.end());
  if (!(*hi > 0.0) || *lo <= kRankTolerance * *hi)
    throw RankDeficient("project_orthogonal: sigma_min/sigma_max below 1e-12");
  // m = rotatedᵀ Σ Vᵀ  =>  U Vᵀ = rotatedᵀ · normalize_rows(rows).
  for (std::size_t i = 0; i < n; ++i)
    for (double& x : jac.rows.row(i)) x /= jac.norms[i];
  return OrthogonalMatrix(matmul_tn(jac.rotated, jac.rows));
}

// A signed permutation matrix stored as, per column j, the row index
// holding the nonzero and its sign.
struct SignedPermutation {
  std::vector<std::size_t> row_of_col;
  std::vector<int> sign;

  std::size_t n() const noexcept { return row_of_col.size(); }

  Matrix to_matrix() const {
    Matrix p(n(), n());
    for (std::size_t j = 0; j < n(); ++j) p(row_of_col[j], j) = static_cast<double>(sign[j]);
    return p;
  }

  bool valid() const {
    std::vector<bool> used(n(), false);
    for (std::size_t j = 0; j < n(); ++j) {
      if (row_of_col[j] >= n() || used[row_of_col[j]]) return false;
      if (sign[j] != 1 && sign[j] != -1) return false;
      used[row_of_col[j]] = true;
    }
    return true;
  }
};

struct NearestSignedPermutation {
  SignedPermutation perm;
  double dist_sq_over_n;  // ‖W − P‖_F² / n
};

// Per column, the row of the largest-magnitude entry with its sign. If two
// columns pick the same row, falls back to a greedy assignment over all
// entries in descending magnitude.
inline NearestSignedPermutation nearest_signed_permutation(const Matrix& w) {
  if (!w.is_square()) throw DimensionMismatch("nearest_signed_permutation: matrix must be square");
  const std::size_t n = w.rows();
  SignedPermutation p{std::vector<std::size_t>(n), std::vector<int>(n)};
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(w(i, j)) > std::abs(w(best, j))) best = i;
    p.row_of_col[j] = best;
    p.sign[j] = w(best, j) < 0.0 ? -1 : 1;
  }
  if (!p.valid()) {
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    cells.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) cells.emplace_back(i, j);
    std::stable_sort(cells.begin(), cells.end(), [&](const auto& a, const auto& b) {
      return std::abs(w(a.first, a.second)) > std::abs(w(b.first, b.second));
    });
    std::vector<bool> row_used(n, false), col_used(n, false);
    std::size_t assigned = 0;
    for (const auto& [i, j] : cells) {
      if (row_used[i] || col_used[j]) continue;
      row_used[i] = col_used[j] = true;
      p.row_of_col[j] = i;
      p.sign[j] = w(i, j) < 0.0 ? -1 : 1;
      if (++assigned == n) break;
    }
  }
  const double d = frobenius_distance(w, p.to_matrix());
  return {std::move(p), d * d / static_cast<double>(n)};
}

}  // namespace l4dict
