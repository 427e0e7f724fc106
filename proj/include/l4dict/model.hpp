#pragma once

// Bernoulli-Gaussian synthetic data Y = D_o · X_o with a Haar-random
// orthogonal dictionary, and the whitening step that reduces a complete
// dictionary to the orthogonal case.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "l4dict/error.hpp"
#include "l4dict/linalg.hpp"
#include "l4dict/matrix.hpp"
#include "l4dict/random.hpp"

namespace l4dict {

struct ModelParams {
  std::size_t n = 10;
  std::size_t p = 1000;
  double theta = 0.3;
  std::uint64_t seed = 42;

  void validate() const {
    std::vector<std::string> bad;
    if (n < 2) bad.push_back("n must be >= 2");
    if (p < n) bad.push_back("p must be >= n");
    if (!(theta > 0.0 && theta < 1.0)) bad.push_back("theta must lie in (0, 1)");
    if (bad.empty()) return;
    std::string msg = "ModelParams: " + bad[0];
    for (std::size_t k = 1; k < bad.size(); ++k) msg += "; " + bad[k];
    throw InvalidArgument(msg);
  }
};

struct DatasetBundle {
  OrthogonalMatrix dictionary;  // D_o, n×n
  Matrix codes;                 // X_o, n×p
  Matrix observations;          // Y = D_o X_o
  ModelParams params;
};

// Each entry is Ber(θ)·N(0,1). Entries are filled row-major and every
// entry consumes one Bernoulli draw followed by one Gaussian draw, even
// when the gate is closed, so the stream layout does not depend on θ.
inline Matrix gen_bernoulli_gaussian(std::size_t n, std::size_t p, double theta, Rng& rng) {
  if (!(theta > 0.0 && theta < 1.0))
    throw InvalidArgument("gen_bernoulli_gaussian: theta must lie in (0, 1)");
  if (n == 0 || p == 0) throw InvalidArgument("gen_bernoulli_gaussian: empty shape");
  Matrix x(n, p);
  for (double& v : x.data()) {
    const bool gate = rng.bernoulli(theta);
    const double g = rng.normal();
    v = gate ? g : 0.0;
  }
  return x;
}

inline Matrix gen_gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix g(rows, cols);
  for (double& v : g.data()) v = rng.normal();
  return g;
}

// Haar-distributed orthogonal matrix: Q from the QR factorization of an
// n×n standard Gaussian matrix, normalized so that diag(R) > 0.
inline OrthogonalMatrix gen_haar_orthogonal(std::size_t n, Rng& rng) {
  if (n < 2) throw InvalidArgument("gen_haar_orthogonal: n must be >= 2");
  // Rows of qt are the columns of the Gaussian matrix; Gram-Schmidt with
  // a second pass keeps them orthonormal to working precision.
  Matrix qt = gen_gaussian(n, n, rng).transpose();
  for (std::size_t j = 0; j < n; ++j) {
    double* qj = qt.row(j).data();
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        const double* qk = qt.row(k).data();
        const double r = detail::dot(qj, qk, n);
        for (std::size_t i = 0; i < n; ++i) qj[i] -= r * qk[i];
      }
    }
    const double len = std::sqrt(detail::dot(qj, qj, n));
    if (!(len > 0.0)) throw RankDeficient("gen_haar_orthogonal: degenerate Gaussian draw");
    for (std::size_t i = 0; i < n; ++i) qj[i] /= len;
  }
  return OrthogonalMatrix(qt.transpose());
}

inline SignedPermutation gen_signed_permutation(std::size_t n, Rng& rng) {
  SignedPermutation p{std::vector<std::size_t>(n), std::vector<int>(n)};
  for (std::size_t j = 0; j < n; ++j) p.row_of_col[j] = j;
  for (std::size_t j = n; j > 1; --j) std::swap(p.row_of_col[j - 1], p.row_of_col[rng.below(j)]);
  for (std::size_t j = 0; j < n; ++j) p.sign[j] = rng.bernoulli(0.5) ? -1 : 1;
  return p;
}

// Y = D · X for a caller-supplied dictionary; X is drawn from `params.seed`.
inline DatasetBundle synthesize_with_dictionary(const ModelParams& params,
                                                OrthogonalMatrix dictionary) {
  params.validate();
  if (dictionary.n() != params.n)
    throw DimensionMismatch("synthesize: dictionary size does not match n");
  Rng rng(params.seed);
  Matrix codes = gen_bernoulli_gaussian(params.n, params.p, params.theta, rng);
  Matrix obs = matmul(dictionary.matrix(), codes);
  return {std::move(dictionary), std::move(codes), std::move(obs), params};
}

// D_o is drawn first, then X_o, from a single stream seeded by params.seed.
inline DatasetBundle synthesize(const ModelParams& params) {
  params.validate();
  Rng rng(params.seed);
  OrthogonalMatrix dict = gen_haar_orthogonal(params.n, rng);
  Matrix codes = gen_bernoulli_gaussian(params.n, params.p, params.theta, rng);
  Matrix obs = matmul(dict.matrix(), codes);
  return {std::move(dict), std::move(codes), std::move(obs), params};
}

// Ȳ = ((1/pθ)·YYᵀ)^{−1/2}·Y.
//
// With Y = U Σ Vᵀ the whitening operator is U·diag(√(pθ)/σ)·Uᵀ, so
// Ȳ = √(pθ)·U·Vᵀ and (1/pθ)·ȲȲᵀ = I exactly up to rounding.
inline Matrix precondition(const Matrix& y, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw InvalidArgument("precondition: theta must lie in (0, 1)");
  if (y.rows() > y.cols()) throw RankDeficient("precondition: fewer samples than dimensions");
  auto jac = detail::orthogonalize_rows(y);
  const auto [lo, hi] = std::minmax_element(jac.norms.begin(), jac.norms.end());
  if (!(*hi > 0.0) || *lo <= kRankTolerance * *hi)
    throw RankDeficient("precondition: Y Y^T is singular");
  const double scale = std::sqrt(static_cast<double>(y.cols()) * theta);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const double f = scale / jac.norms[i];
    for (double& x : jac.rows.row(i)) x *= f;
  }
  return matmul_tn(jac.rotated, jac.rows);
}

}  // namespace l4dict
