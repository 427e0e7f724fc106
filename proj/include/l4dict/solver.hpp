#pragma once

// Matching-stretching-projection (MSP) iterations for ℓ^{2k}-norm
// maximization over the orthogonal group, and projected gradient ascent
// (PGA) with a finite step size.
//
// Every update has the form A ← P_O(n)[G] where G is a gradient direction.
// The scalar 2k in front of the gradient is dropped because the polar
// factor of c·G equals that of G for every c > 0; for PGA it is kept,
// since it scales against the A term.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "l4dict/error.hpp"
#include "l4dict/linalg.hpp"
#include "l4dict/matrix.hpp"

namespace l4dict {

// Step size of projected gradient ascent; Infinite reduces PGA to MSP.
class StepSize {
 public:
  static StepSize infinite() noexcept { return StepSize(); }
  static StepSize finite(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw InvalidArgument("StepSize: alpha must be positive and finite");
    return StepSize(alpha);
  }
  // Accepts a decimal number or "inf".
  static StepSize parse(const std::string& s) {
    if (s == "inf" || s == "Inf" || s == "infinity" || s == "+inf") return infinite();
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw InvalidArgument("StepSize: cannot parse '" + s + "'");
    }
    if (pos != s.size()) throw InvalidArgument("StepSize: cannot parse '" + s + "'");
    if (std::isinf(v) && v > 0) return infinite();
    return finite(v);
  }

  bool is_infinite() const noexcept { return !alpha_.has_value(); }
  double value() const noexcept {
    return alpha_.value_or(std::numeric_limits<double>::infinity());
  }
  std::string to_string() const {
    if (is_infinite()) return "inf";
    std::ostringstream os;
    os.precision(17);
    os << *alpha_;
    return os.str();
  }

  friend bool operator==(const StepSize&, const StepSize&) = default;

 private:
  StepSize() = default;
  explicit StepSize(double a) : alpha_(a) {}
  std::optional<double> alpha_;
};

struct SolveConfig {
  int order_2k = 4;
  StepSize step_alpha = StepSize::infinite();
  std::size_t max_iters = 200;
  double stop_tol = 1e-10;
  double bias_beta = 0.0;

  void validate() const {
    std::ostringstream os;
    if (order_2k < 4 || order_2k % 2 != 0) os << "order_2k must be even and >= 4; ";
    if (!(stop_tol > 0.0)) os << "stop_tol must be positive; ";
    if (!(bias_beta >= 0.0)) os << "bias_beta must be >= 0; ";
    if (bias_beta > 0.0 && !step_alpha.is_infinite())
      os << "bias_beta requires an infinite step size; ";
    if (max_iters == 0) os << "max_iters must be >= 1; ";
    if (!os.str().empty()) throw InvalidArgument("SolveConfig: " + os.str());
  }
};

// Per-iteration record of a run. Index 0 of the objective series is the
// initial point; displacement[t] is ‖A_{t+1} − A_t‖_F/√n.
struct SolveTrace {
  std::vector<double> g_norm;     // ‖A_t D_o‖₄⁴/n, empty without ground truth
  std::vector<double> fhat_norm;  // ‖A_t Y‖₄⁴/(3npθ), empty without data
  std::vector<double> displacement;
  std::size_t iters_used = 0;
  bool converged = false;  // false means max_iters was hit
  OrthogonalMatrix final_iterate = OrthogonalMatrix::identity(2);
};

// ‖W‖₄⁴/n ∈ [1/n, 1] for orthogonal W.
inline double normalized_l4(const Matrix& w) {
  return l4_norm_4th(w) / static_cast<double>(w.rows());
}

// ‖A·D‖₄⁴/n
inline double g_norm(const Matrix& a, const Matrix& d) { return normalized_l4(matmul(a, d)); }

// ‖A·Y‖₄⁴/(3npθ)
inline double fhat_norm(const Matrix& a, const Matrix& y, double theta) {
  const double n = static_cast<double>(y.rows());
  const double p = static_cast<double>(y.cols());
  return l4_norm_4th(matmul(a, y)) / (3.0 * n * p * theta);
}

// Euclidean gradient of ‖A·Y‖_{2k}^{2k} in A: 2k·(AY)^{∘(2k−1)}·Yᵀ.
inline Matrix objective_gradient(const Matrix& a, const Matrix& y, int order_2k = 4) {
  Matrix g = matmul_nt(hadamard_power(matmul(a, y), order_2k - 1), y);
  g *= static_cast<double>(order_2k);
  return g;
}

inline double step_displacement(const Matrix& next, const Matrix& prev) {
  return frobenius_distance(next, prev) / std::sqrt(static_cast<double>(next.rows()));
}

namespace detail {

inline void require_order(int order_2k) {
  if (order_2k < 4 || order_2k % 2 != 0)
    throw InvalidArgument("order_2k must be even and >= 4");
}

}  // namespace detail

// A ← P[(A·D)^{∘(2k−1)}·Dᵀ]
inline OrthogonalMatrix msp_step_orth(const OrthogonalMatrix& a, const OrthogonalMatrix& d,
                                      int order_2k = 4) {
  detail::require_order(order_2k);
  if (a.n() != d.n()) throw DimensionMismatch("msp_step_orth: A and D differ in size");
  return project_orthogonal(matmul_nt(hadamard_power(matmul(a, d), order_2k - 1), d));
}

// A ← P[(A·Y)^{∘(2k−1)}·Yᵀ − (β/4)·A]
inline OrthogonalMatrix msp_step_dl(const OrthogonalMatrix& a, const Matrix& y, int order_2k = 4,
                                    double bias_beta = 0.0) {
  detail::require_order(order_2k);
  if (y.rows() != a.n()) throw DimensionMismatch("msp_step_dl: Y must have n rows");
  if (!(bias_beta >= 0.0)) throw InvalidArgument("msp_step_dl: bias_beta must be >= 0");
  Matrix g = matmul_nt(hadamard_power(matmul(a, y), order_2k - 1), y);
  if (bias_beta > 0.0) g -= (bias_beta / 4.0) * a.matrix();
  return project_orthogonal(g);
}

// Finite α: A ← P[A + 2k·α·A^{∘(2k−1)}]; infinite α: A ← P[A^{∘(2k−1)}].
inline OrthogonalMatrix pga_step(const OrthogonalMatrix& a, StepSize alpha, int order_2k = 4) {
  detail::require_order(order_2k);
  Matrix stretched = hadamard_power(a.matrix(), order_2k - 1);
  if (alpha.is_infinite()) return project_orthogonal(stretched);
  stretched *= static_cast<double>(order_2k) * alpha.value();
  stretched += a.matrix();
  return project_orthogonal(stretched);
}

// Finite-step ascent on the sample objective:
// A ← P[A + 2k·α·(A·Y)^{∘(2k−1)}·Yᵀ]; with Y = I this is pga_step.
inline OrthogonalMatrix pga_step_dl(const OrthogonalMatrix& a, const Matrix& y, StepSize alpha,
                                    int order_2k = 4) {
  detail::require_order(order_2k);
  if (y.rows() != a.n()) throw DimensionMismatch("pga_step_dl: Y must have n rows");
  if (alpha.is_infinite()) return msp_step_dl(a, y, order_2k);
  Matrix g = matmul_nt(hadamard_power(matmul(a, y), order_2k - 1), y);
  g *= static_cast<double>(order_2k) * alpha.value();
  g += a.matrix();
  return project_orthogonal(g);
}

namespace detail {

// Shared driver: iterate `step` until the displacement drops below
// stop_tol or max_iters is reached, recording `observe` at every iterate.
template <class Step, class Observe>
SolveTrace iterate(const OrthogonalMatrix& a0, const SolveConfig& cfg, Step step,
                   Observe observe) {
  cfg.validate();
  SolveTrace trace;
  OrthogonalMatrix a = a0;
  observe(a, trace);
  for (std::size_t t = 0; t < cfg.max_iters; ++t) {
    OrthogonalMatrix next = step(a);
    const double disp = step_displacement(next.matrix(), a.matrix());
    a = std::move(next);
    trace.displacement.push_back(disp);
    trace.iters_used = t + 1;
    observe(a, trace);
    if (disp < cfg.stop_tol) {
      trace.converged = true;
      break;
    }
  }
  trace.final_iterate = std::move(a);
  return trace;
}

}  // namespace detail

// Deterministic MSP: maximize ‖A·D‖_{2k}^{2k} over O(n).
inline SolveTrace msp_orth(const OrthogonalMatrix& a0, const OrthogonalMatrix& d,
                           const SolveConfig& cfg = {}) {
  if (a0.n() != d.n()) throw DimensionMismatch("msp_orth: A0 and D differ in size");
  return detail::iterate(
      a0, cfg, [&](const OrthogonalMatrix& a) { return msp_step_orth(a, d, cfg.order_2k); },
      [&](const OrthogonalMatrix& a, SolveTrace& tr) { tr.g_norm.push_back(g_norm(a, d)); });
}

// Dictionary-learning MSP on samples Y (finite cfg.step_alpha switches to
// pga_step_dl). Stopping never looks at the ground truth; when `truth` is
// supplied it only enriches the trace.
inline SolveTrace msp_dl(const OrthogonalMatrix& a0, const Matrix& y, double theta,
                         const SolveConfig& cfg = {},
                         const OrthogonalMatrix* truth = nullptr) {
  if (!(theta > 0.0 && theta < 1.0)) throw InvalidArgument("msp_dl: theta must lie in (0, 1)");
  if (y.rows() != a0.n()) throw DimensionMismatch("msp_dl: Y must have n rows");
  if (truth && truth->n() != a0.n()) throw DimensionMismatch("msp_dl: D_o differs in size");
  return detail::iterate(
      a0, cfg,
      [&](const OrthogonalMatrix& a) {
        if (!cfg.step_alpha.is_infinite()) return pga_step_dl(a, y, cfg.step_alpha, cfg.order_2k);
        return msp_step_dl(a, y, cfg.order_2k, cfg.bias_beta);
      },
      [&](const OrthogonalMatrix& a, SolveTrace& tr) {
        tr.fhat_norm.push_back(fhat_norm(a, y, theta));
        if (truth) tr.g_norm.push_back(g_norm(a, *truth));
      });
}

// PGA on ‖A‖_{2k}^{2k} (D = I) with step size cfg.step_alpha.
inline SolveTrace pga_run(const OrthogonalMatrix& a0, const SolveConfig& cfg = {}) {
  return detail::iterate(
      a0, cfg,
      [&](const OrthogonalMatrix& a) { return pga_step(a, cfg.step_alpha, cfg.order_2k); },
      [&](const OrthogonalMatrix& a, SolveTrace& tr) {
        tr.g_norm.push_back(normalized_l4(a.matrix()));
      });
}

// Index of the first iterate with g_norm >= 1 − tol, if any.
inline std::optional<std::size_t> first_reaching(const std::vector<double>& g, double tol) {
  for (std::size_t t = 0; t < g.size(); ++t)
    if (g[t] >= 1.0 - tol) return t;
  return std::nullopt;
}

}  // namespace l4dict
