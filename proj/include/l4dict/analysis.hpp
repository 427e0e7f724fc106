#pragma once

// Closed-form expectations of the ℓ⁴ objective and its gradient under the
// Bernoulli-Gaussian model, critical-point and SO(2) checks, and
// Monte-Carlo probes that compare the sample objective to its mean.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "l4dict/error.hpp"
#include "l4dict/linalg.hpp"
#include "l4dict/matrix.hpp"
#include "l4dict/model.hpp"
#include "l4dict/random.hpp"
#include "l4dict/solver.hpp"

namespace l4dict {

struct ExpectationReport {
  double empirical = 0.0;
  double predicted = 0.0;
  double abs_error = 0.0;
  std::size_t samples_used = 0;

  double rel_error() const { return abs_error / std::abs(predicted); }
};

namespace detail {
inline void require_theta(double theta, const char* who) {
  if (!(theta > 0.0 && theta < 1.0))
    throw InvalidArgument(std::string(who) + ": theta must lie in (0, 1)");
}
}  // namespace detail

// E‖A·D·X‖₄⁴ = 3pθ·((1−θ)·‖AD‖₄⁴ + θn)
inline double expected_objective(const OrthogonalMatrix& a, const OrthogonalMatrix& d,
                                 double theta, double p) {
  detail::require_theta(theta, "expected_objective");
  const double n = static_cast<double>(a.n());
  return 3.0 * p * theta * ((1.0 - theta) * l4_norm_4th(matmul(a, d)) + theta * n);
}

// E[4(AY)^{∘3}Yᵀ] = 3pθ(1−θ)·4(AD)^{∘3}Dᵀ + 12pθ²·A
inline Matrix expected_gradient(const OrthogonalMatrix& a, const OrthogonalMatrix& d,
                                double theta, double p) {
  detail::require_theta(theta, "expected_gradient");
  Matrix g = objective_gradient(a, d, 4);
  g *= 3.0 * p * theta * (1.0 - theta);
  g += (12.0 * p * theta * theta) * a.matrix();
  return g;
}

// Mean of ‖A·D·X‖₄⁴ over `draws` fresh X ~ BG(θ)^{n×p}.
inline ExpectationReport monte_carlo_objective(const OrthogonalMatrix& a,
                                               const OrthogonalMatrix& d, double theta,
                                               std::size_t p, std::size_t draws, Rng& rng) {
  const Matrix ad = matmul(a, d);
  double sum = 0.0;
  for (std::size_t k = 0; k < draws; ++k)
    sum += l4_norm_4th(matmul(ad, gen_bernoulli_gaussian(a.n(), p, theta, rng)));
  ExpectationReport r;
  r.empirical = sum / static_cast<double>(draws);
  r.predicted = expected_objective(a, d, theta, static_cast<double>(p));
  r.abs_error = std::abs(r.empirical - r.predicted);
  r.samples_used = draws * p;
  return r;
}

// Mean of 4(AY)^{∘3}Yᵀ with Y = D·X; errors are Frobenius norms.
inline ExpectationReport monte_carlo_gradient(const OrthogonalMatrix& a,
                                              const OrthogonalMatrix& d, double theta,
                                              std::size_t p, std::size_t draws, Rng& rng) {
  Matrix mean(a.n(), a.n());
  for (std::size_t k = 0; k < draws; ++k) {
    const Matrix y = matmul(d.matrix(), gen_bernoulli_gaussian(a.n(), p, theta, rng));
    mean += objective_gradient(a, y, 4);
  }
  mean *= 1.0 / static_cast<double>(draws);
  const Matrix pred = expected_gradient(a, d, theta, static_cast<double>(p));
  ExpectationReport r;
  r.empirical = frobenius(mean);
  r.predicted = frobenius(pred);
  r.abs_error = frobenius_distance(mean, pred);
  r.samples_used = draws * p;
  return r;
}

// ‖(W^{∘3})ᵀW − WᵀW^{∘3}‖_F; zero exactly at critical points of ‖W‖₄⁴ on O(n).
inline double critical_point_residual(const Matrix& w) {
  const Matrix w3 = hadamard_power(w, 3);
  return frobenius_distance(matmul_tn(w3, w), matmul_tn(w, w3));
}

// The MSP map on SO(2) in angle coordinates: φ ↦ arctan(tan³φ), φ ∈ [−π/2, π/2].
inline double tan_map(double phi) {
  constexpr double half_pi = std::numbers::pi / 2.0;
  if (!(phi >= -half_pi && phi <= half_pi))
    throw InvalidArgument("tan_map: angle outside [-pi/2, pi/2]");
  if (phi == half_pi || phi == -half_pi) return phi;
  const double t = std::tan(phi);
  return std::atan(t * t * t);
}

inline Matrix rotation2(double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  return Matrix{{c, -s}, {s, c}};
}

// Angle of a 2×2 rotation via atan2(W₁₀, W₀₀); reflections are rejected.
inline double rotation_angle(const Matrix& w) {
  if (w.rows() != 2 || w.cols() != 2) throw DimensionMismatch("rotation_angle: expects 2x2");
  const double det = w(0, 0) * w(1, 1) - w(0, 1) * w(1, 0);
  if (!(det > 0.0)) throw InvalidArgument("rotation_angle: matrix is a reflection");
  return std::atan2(w(1, 0), w(0, 0));
}

// |angle(msp_step_orth(R(φ), I)) − tan_map(φ)|
inline double verify_so2_equivalence(double phi) {
  const OrthogonalMatrix a(rotation2(phi));
  const OrthogonalMatrix next = msp_step_orth(a, OrthogonalMatrix::identity(2), 4);
  return std::abs(rotation_angle(next.matrix()) - tan_map(phi));
}

struct GapCheck {
  double eps;              // 1 − ‖W‖₄⁴/n
  double dist_sq_over_n;   // ‖W − P‖_F²/n to the nearest signed permutation
};

inline GapCheck lemma4_gap_check(const Matrix& w) {
  return {1.0 - normalized_l4(w), nearest_signed_permutation(w).dist_sq_over_n};
}

// exp(S) for a small skew-symmetric S by scaling and squaring a Taylor
// series, re-projected onto O(n) to remove rounding drift.
inline OrthogonalMatrix expm_skew(const Matrix& s) {
  const double nrm = frobenius(s);
  int squarings = 0;
  double scale = 1.0;
  while (nrm * scale > 0.25) {
    scale *= 0.5;
    ++squarings;
  }
  const Matrix x = s * scale;
  Matrix term = Matrix::identity(s.rows());
  Matrix sum = term;
  for (int k = 1; k <= 18; ++k) {
    term = matmul(term, x) * (1.0 / k);
    sum += term;
  }
  for (int k = 0; k < squarings; ++k) sum = matmul(sum, sum);
  return project_orthogonal(sum);
}

inline Matrix random_skew(std::size_t n, Rng& rng) {
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = rng.normal();
      s(i, j) = v;
      s(j, i) = -v;
    }
  return s;
}

// exp(t·S) for a random skew S with t chosen by bisection so that
// ‖exp(tS) − I‖_F² = eps. Valid for eps small enough that the map is
// monotone in t (every eps < 2 in practice).
inline OrthogonalMatrix perturb_identity(std::size_t n, double eps, Rng& rng) {
  if (!(eps > 0.0)) throw InvalidArgument("perturb_identity: eps must be positive");
  const Matrix s = random_skew(n, rng);
  const Matrix eye = Matrix::identity(n);
  auto dist_sq = [&](double t) {
    const double d = frobenius_distance(expm_skew(s * t).matrix(), eye);
    return d * d;
  };
  double lo = 0.0;
  double hi = std::sqrt(eps) / frobenius(s);
  while (dist_sq(hi) < eps) hi *= 2.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dist_sq(mid) < eps ? lo : hi) = mid;
  }
  return expm_skew(s * (0.5 * (lo + hi)));
}

struct ConcentrationRow {
  std::size_t p = 0;
  double mean_deviation = 0.0;
  double max_deviation = 0.0;
  double scaling = 0.0;  // θ·n²·ln(n)/p, reference curve only
  std::vector<double> deviations;  // per trial
};

// For each p, `trials` independent (W, X) draws; deviation is
// |‖W·X‖₄⁴ − E‖W·X‖₄⁴| / (np).
inline std::vector<ConcentrationRow> concentration_probe(std::size_t n, double theta,
                                                         const std::vector<std::size_t>& p_grid,
                                                         std::size_t trials, Rng& rng) {
  detail::require_theta(theta, "concentration_probe");
  if (!std::is_sorted(p_grid.begin(), p_grid.end()))
    throw InvalidArgument("concentration_probe: p_grid must be ascending");
  if (trials == 0) throw InvalidArgument("concentration_probe: trials must be >= 1");
  std::vector<ConcentrationRow> out;
  const auto eye = OrthogonalMatrix::identity(n);
  const double dn = static_cast<double>(n);
  for (std::size_t p : p_grid) {
    ConcentrationRow row;
    row.p = p;
    row.scaling = theta * dn * dn * std::log(dn) / static_cast<double>(p);
    for (std::size_t t = 0; t < trials; ++t) {
      const OrthogonalMatrix w = gen_haar_orthogonal(n, rng);
      const Matrix x = gen_bernoulli_gaussian(n, p, theta, rng);
      const double val = l4_norm_4th(matmul(w.matrix(), x));
      const double expct = expected_objective(w, eye, theta, static_cast<double>(p));
      row.deviations.push_back(std::abs(val - expct) / (dn * static_cast<double>(p)));
    }
    double sum = 0.0;
    for (double d : row.deviations) {
      sum += d;
      row.max_deviation = std::max(row.max_deviation, d);
    }
    row.mean_deviation = sum / static_cast<double>(trials);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace l4dict
