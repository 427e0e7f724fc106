#pragma once

// Self-checks run by `l4dict verify`: fast closed-form and invariant checks
// against the library itself. Each check reports pass/fail plus the worst
// observed value so a failing table is actionable.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "l4dict/analysis.hpp"
#include "l4dict/experiments.hpp"
#include "l4dict/linalg.hpp"
#include "l4dict/model.hpp"
#include "l4dict/solver.hpp"

namespace l4dict {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

inline CheckResult bounded(std::string name, double worst, double limit) {
  return {std::move(name), worst <= limit, fmt("worst %.3g (limit %.3g)", worst, limit)};
}

inline CheckResult check_projection(Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    Matrix m(6, 6);
    for (double& v : m.data()) v = rng.normal();
    const OrthogonalMatrix q = gen_haar_orthogonal(6, rng);
    const Matrix base = project_orthogonal(m).matrix();
    worst = std::max(worst, max_abs_diff(project_orthogonal(m * 3.7).matrix(), base));
    worst = std::max(worst, max_abs_diff(project_orthogonal(matmul(m, q.matrix())).matrix(),
                                         matmul(base, q.matrix())));
    worst = std::max(worst, orthogonality_defect(base));
  }
  return bounded("projection scale/right equivariance", worst, 1e-10);
}

inline CheckResult check_signed_perm_equivariance(Rng& rng) {
  const auto eye = OrthogonalMatrix::identity(6);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const OrthogonalMatrix a = gen_haar_orthogonal(6, rng);
    const Matrix p1 = gen_signed_permutation(6, rng).to_matrix();
    const Matrix p2 = gen_signed_permutation(6, rng).to_matrix();
    const OrthogonalMatrix moved(matmul(matmul(p1, a.matrix()), p2));
    worst = std::max(worst, max_abs_diff(msp_step_orth(moved, eye).matrix(),
                                         matmul(matmul(p1, msp_step_orth(a, eye).matrix()), p2)));
  }
  return bounded("signed-permutation equivariance", worst, 1e-12);
}

inline CheckResult check_rotation_reduction(Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const OrthogonalMatrix a = gen_haar_orthogonal(7, rng);
    const OrthogonalMatrix d = gen_haar_orthogonal(7, rng);
    worst = std::max(worst,
                     max_abs_diff(matmul(msp_step_orth(a, d).matrix(), d.matrix()),
                                  msp_step_orth(a * d, OrthogonalMatrix::identity(7)).matrix()));
  }
  return bounded("rotation reduction A'D = step(AD)", worst, 1e-11);
}

inline CheckResult check_l4_bounds(Rng& rng) {
  bool ok = true;
  double lowest = 1e300;
  for (std::size_t n : {2u, 5u, 20u}) {
    for (int k = 0; k < 20; ++k) {
      const double v = l4_norm_4th(gen_haar_orthogonal(n, rng).matrix());
      lowest = std::min(lowest, v);
      ok = ok && v >= 1.0 - 1e-12 && v < static_cast<double>(n);
    }
    ok = ok && l4_norm_4th(gen_signed_permutation(n, rng).to_matrix()) == static_cast<double>(n);
  }
  return {"l4 bounds on O(n), max at SP(n)", ok, "min " + std::to_string(lowest) + " over draws"};
}

inline CheckResult check_gap_bound(Rng& rng) {
  double worst = -1e300;
  for (int k = 0; k < 50; ++k) {
    const OrthogonalMatrix w = perturb_identity(6, 0.05 * (k % 5 + 1), rng);
    const GapCheck g = lemma4_gap_check(w.matrix());
    worst = std::max(worst, g.dist_sq_over_n - 2.0 * g.eps);
  }
  return bounded("dist^2/n <= 2 eps near SP(n)", worst, 1e-9);
}

inline CheckResult check_fixed_points(Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const SolveTrace tr =
        msp_orth(gen_haar_orthogonal(8, rng), OrthogonalMatrix::identity(8), SolveConfig{});
    if (!tr.converged) return {"fixed points are critical points", false, "run did not converge"};
    worst = std::max(worst, critical_point_residual(tr.final_iterate.matrix()));
  }
  return bounded("fixed points are critical points", worst, 1e-8);
}

inline CheckResult check_hadamard_escape() {
  const double r = 1.0 / std::sqrt(2.0);
  const OrthogonalMatrix h(Matrix{{r, r}, {r, -r}});
  const auto eye = OrthogonalMatrix::identity(2);
  const double fixed = max_abs_diff(msp_step_orth(h, eye).matrix(), h.matrix());
  const SolveTrace tr = msp_orth(OrthogonalMatrix(matmul(rotation2(1e-3), h.matrix())), eye);
  const double dist = nearest_signed_permutation(tr.final_iterate.matrix()).dist_sq_over_n;
  return {"Hadamard fixed but unstable", fixed <= 1e-15 && dist <= 1e-12,
          fmt("fixed-point drift %.3g, escape distance %.3g", fixed, dist)};
}

inline CheckResult check_gradient(Rng& rng) {
  double worst = 0.0;
  const double h = 1e-5;
  for (int k = 0; k < 20; ++k) {
    Matrix a(4, 4), y(4, 7);
    for (double& v : a.data()) v = rng.normal();
    for (double& v : y.data()) v = rng.normal();
    const Matrix g = objective_gradient(a, y, 4);
    Matrix fd(4, 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
      Matrix ap = a, am = a;
      ap.data()[i] += h;
      am.data()[i] -= h;
      fd.data()[i] = (l4_norm_4th(matmul(ap, y)) - l4_norm_4th(matmul(am, y))) / (2 * h);
    }
    worst = std::max(worst, frobenius_distance(g, fd) / frobenius(g));
  }
  return bounded("gradient vs central differences", worst, 1e-5);
}

inline CheckResult check_so2(Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double phi = (rng.uniform() - 0.5) * (std::numbers::pi - 2e-6);
    worst = std::max(worst, verify_so2_equivalence(phi));
  }
  return bounded("SO(2) step equals arctan(tan^3)", worst, 1e-10);
}

inline CheckResult check_cubic_rate(Rng& rng) {
  double worst_ratio = 0.0;
  int contracted = 0;
  const auto eye = OrthogonalMatrix::identity(10);
  for (double eps : {0.01, 0.05, 0.1, 0.3, 0.5})
    for (int k = 0; k < 10; ++k) {
      const OrthogonalMatrix a = perturb_identity(10, eps, rng);
      const double d = frobenius_distance(msp_step_orth(a, eye).matrix(), eye.matrix());
      contracted += d * d < eps;
      worst_ratio = std::max(worst_ratio, d * d / (eps * eps * eps));
    }
  return {"cubic local rate", contracted == 50 && worst_ratio <= 10.0,
          fmt("max |A'-I|^2/eps^3 = %.3g, contracted %.0f of 50", worst_ratio, contracted)};
}

inline CheckResult check_expectation(Rng& rng) {
  const OrthogonalMatrix a = gen_haar_orthogonal(10, rng);
  const OrthogonalMatrix d = gen_haar_orthogonal(10, rng);
  const ExpectationReport r = monte_carlo_objective(a, d, 0.3, 100000, 4, rng);
  return bounded("E|ADX|_4^4 closed form (relative)", r.rel_error(), 0.02);
}

inline CheckResult check_replay(std::uint64_t seed) {
  ConvergenceSpec spec{{8, 1000, 0.3, seed}, {}, 3, false};
  spec.cfg.max_iters = 15;
  const bool same = run_convergence(spec, 1).to_csv().str() == run_convergence(spec, 2).to_csv().str();
  return {"replay is byte-identical across job counts", same, same ? "identical" : "differs"};
}

}  // namespace detail

// All checks, each drawing from its own stream derived from `seed`.
inline std::vector<CheckResult> run_verify_suite(std::uint64_t seed) {
  std::vector<std::function<CheckResult(Rng&)>> checks{
      detail::check_projection,
      detail::check_signed_perm_equivariance,
      detail::check_rotation_reduction,
      detail::check_l4_bounds,
      detail::check_gap_bound,
      detail::check_fixed_points,
      [](Rng&) { return detail::check_hadamard_escape(); },
      detail::check_gradient,
      detail::check_so2,
      detail::check_cubic_rate,
      detail::check_expectation,
      [seed](Rng&) { return detail::check_replay(seed); },
  };
  std::vector<CheckResult> out;
  for (std::size_t k = 0; k < checks.size(); ++k) {
    Rng rng(derive_seed(seed, 0x100 + k));
    try {
      out.push_back(checks[k](rng));
    } catch (const Error& e) {
      out.push_back({"check " + std::to_string(k), false, e.what()});
    }
  }
  return out;
}

}  // namespace l4dict
