// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "l4dict/analysis.hpp"
#include "l4dict/experiments.hpp"
#include "l4dict/imaging.hpp"
#include "l4dict/verify.hpp"
#include "test_support.hpp"

using namespace l4dict;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome printed_run_quartic() {
  const OrthogonalMatrix a0(Matrix{{-0.8249, 0.3820, -0.4168},
                                   {-0.5240, -0.2398, 0.8173},
                                   {-0.2122, -0.8925, -0.3979}},
                            1e-3);
  const std::vector<Matrix> printed{
      {{-0.9795, 0.0621, -0.1917}, {-0.1953, -0.0594, 0.9789}, {-0.0494, -0.9963, -0.0703}},
      {{-1.0000, 0.0002, -0.0077}, {-0.0077, -0.0003, 1.000}, {-0.0002, -1.0000, -0.0003}},
      {{-1, 0, 0}, {0, 0, 1}, {0, -1, 0}}};
  const auto eye = OrthogonalMatrix::identity(3);
  double worst = 0.0;
  OrthogonalMatrix a = a0;
  for (const Matrix& m : printed) {
    a = msp_step_orth(a, eye);
    worst = std::max(worst, max_abs_diff(a.matrix(), m));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const SolveTrace tr = msp_orth(a0, eye);
  const double secs = seconds_since(t0);
  const double end = max_abs_diff(tr.final_iterate.matrix(), printed.back());
  return {worst <= 5e-5 && tr.converged && end <= 5e-5 && secs < 1e-3,
          fmt("max entry error %.2g, final error %.2g, %.3g ms", worst, end, secs * 1e3)};
}

Outcome printed_run_tenth() {
  OrthogonalMatrix a(Matrix{{-0.6142, 0.3943, 0.6836},
                            {-0.2039, 0.7575, -0.6201},
                            {0.7623, 0.5203, 0.3849}},
                     1e-3);
  const auto eye = OrthogonalMatrix::identity(3);
  for (int t = 0; t < 2; ++t) a = msp_step_orth(a, eye, 10);
  const double err = max_abs_diff(a.matrix(), Matrix{{0, 0, 1}, {0, 1, 0}, {1, 0, 0}});
  return {err <= 5e-5, fmt("entry error after 2 rounds %.2g", err)};
}

Outcome orthogonal_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t worst_iter = 0, missed = 0;
  for (std::size_t n : {50u, 100u}) {
    ConvergenceSpec spec{{n, n, 0.3, 42}, {}, 100, true};
    spec.cfg.max_iters = 15;
    const ConvergenceResult res = run_convergence(spec);
    for (const auto& tr : res.trials) {
      const auto hit = first_reaching(tr.g_norm, 1e-6);
      if (!hit) {
        ++missed;
        continue;
      }
      worst_iter = std::max(worst_iter, *hit);
    }
  }
  const double secs = seconds_since(t0);
  return {missed == 0 && worst_iter <= 15 && secs < 10.0,
          fmt("missed %.0f of 200, slowest %.0f iterations, %.2f s", missed, worst_iter, secs)};
}

Outcome dictionary_learning() {
  const auto t0 = std::chrono::steady_clock::now();
  ConvergenceSpec spec{{50, 20000, 0.3, 42}, {}, 10, false};
  spec.cfg.max_iters = 30;
  const ConvergenceResult res = run_convergence(spec);
  double lowest = 1.0, mean_err = 0.0;
  for (std::size_t t = 0; t < res.trials.size(); ++t) {
    lowest = std::min(lowest, res.final_g(t));
    mean_err += std::abs(1.0 - res.final_g(t)) / static_cast<double>(res.trials.size());
  }
  const double secs = seconds_since(t0);
  return {lowest >= 0.99 && mean_err <= 0.01 && secs < 60.0,
          fmt("min g_norm %.5f, mean error %.3f%%, %.1f s", lowest, 100 * mean_err, secs)};
}

Outcome objective_expectation() {
  Rng rng(derive_seed(42, 5));
  double worst = 0.0;
  for (double theta : {0.1, 0.3, 0.7})
    for (int k = 0; k < 5; ++k) {
      const OrthogonalMatrix a = gen_haar_orthogonal(10, rng);
      const OrthogonalMatrix d = gen_haar_orthogonal(10, rng);
      worst = std::max(worst, monte_carlo_objective(a, d, theta, 100000, 4, rng).rel_error());
    }
  return {worst <= 0.02, fmt("worst relative error %.3f%% (4 draws of p=1e5)", 100 * worst)};
}

Outcome gradient_expectation() {
  Rng rng(derive_seed(42, 6));
  const OrthogonalMatrix a = gen_haar_orthogonal(8, rng);
  const OrthogonalMatrix d = gen_haar_orthogonal(8, rng);
  const double rel = monte_carlo_gradient(a, d, 0.3, 200000, 4, rng).rel_error();
  return {rel <= 0.03, fmt("relative Frobenius error %.3f%%", 100 * rel)};
}

Outcome so2_equivalence() {
  Rng rng(derive_seed(42, 7));
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    double phi = 0.0;
    while (phi == 0.0 || std::abs(phi) >= std::numbers::pi / 2) phi = (rng.uniform() - 0.5) * std::numbers::pi;
    worst = std::max(worst, verify_so2_equivalence(phi));
  }
  return {worst <= 1e-10, fmt("worst angle error %.2g over 1000 angles", worst)};
}

Outcome cubic_rate() {
  Rng rng(derive_seed(42, 8));
  const auto eye = OrthogonalMatrix::identity(10);
  int contracted = 0, within = 0, total = 0;
  double worst = 0.0;
  for (double eps : {0.01, 0.05, 0.1, 0.3, 0.5})
    for (int k = 0; k < 50; ++k) {
      const OrthogonalMatrix a = perturb_identity(10, eps, rng);
      const double d = frobenius_distance(msp_step_orth(a, eye).matrix(), eye.matrix());
      const double ratio = d * d / (eps * eps * eps);
      contracted += d * d < eps;
      within += ratio <= 10.0;
      worst = std::max(worst, ratio);
      ++total;
    }
  return {contracted == total && within >= 0.95 * total,
          fmt("contracted %.0f/250, ratio<=10 in %.0f/250, max ratio %.3g", contracted, within, worst)};
}

Outcome step_size_table() {
  const PgaTableResult res = run_pga_table({});
  const std::vector<StepSize> alphas{StepSize::finite(1), StepSize::finite(10), StepSize::finite(100),
                                     StepSize::infinite()};
  const std::vector<std::pair<std::size_t, long long>> printed{{5, 4}, {25, 5}, {50, 6}};
  bool ok = true;
  std::string counts;
  for (const auto& [n, ref] : printed) {
    long long prev = -1;
    counts += "n=" + std::to_string(n) + ":";
    for (const auto& a : alphas) {
      const long long it = res.at(n, a);
      counts += " " + std::to_string(it);
      ok = ok && it > 0 && (prev < 0 || it <= prev);
      prev = it;
    }
    ok = ok && prev <= 2 * ref;
    counts += "; ";
  }
  return {ok, counts + "alpha=inf reference 4, 5, 6"};
}

Outcome phase_transition() {
  const auto t0 = std::chrono::steady_clock::now();
  const GridSpec spec;
  const GridResult res = run_phase_transition(spec);
  const double secs = seconds_since(t0);
  bool ok = res.cells.size() == 15;
  double worst_success = 0.0;
  for (double theta : {0.1, 0.3, 0.5}) worst_success = std::max(worst_success, res.find(theta, 20000)->mean_error);
  const double fail = res.find(0.9, 500)->mean_error;
  const double e500 = res.find(0.5, 500)->mean_error, e2k = res.find(0.5, 2000)->mean_error,
               e20k = res.find(0.5, 20000)->mean_error;
  ok = ok && worst_success < 0.01 && fail > 0.10 && e500 >= e2k && e2k >= e20k && secs < 300.0;
  return {ok, fmt("worst success-region error %.4f, failure-region error %.3f, %.1f s", worst_success, fail, secs) +
                  fmt("; theta=0.5 errors %.4f >= %.4f >= %.4f", e500, e2k, e20k)};
}

Outcome property_suite() {
  std::vector<std::string> failed;
  for (const CheckResult& c : run_verify_suite(42))
    if (!c.passed) failed.push_back(c.name + " (" + c.detail + ")");

  // Independent oracles: schoolbook product, 2x2 nearest orthogonal matrix by scan.
  Rng rng(derive_seed(42, 11));
  const Matrix a = testing::random_matrix(7, 5, rng), b = testing::random_matrix(5, 9, rng);
  if (max_abs_diff(matmul(a, b), testing::naive_matmul(a, b)) > 1e-12) failed.push_back("matmul vs naive");
  const Matrix m = testing::random_matrix(2, 2, rng);
  if (max_abs_diff(project_orthogonal(m).matrix(), testing::brute_force_nearest_orthogonal2(m)) > 1e-4)
    failed.push_back("2x2 projection vs scan");

  GridSpec small;
  small.axis1.values = {0.3, 0.7};
  small.axis2.values = {500};
  small.trials = 3;
  if (run_phase_transition(small, 1).to_csv().str() != run_phase_transition(small, 3).to_csv().str())
    failed.push_back("grid replay across job counts");

  std::string detail = failed.empty() ? "12 self-checks and 3 oracle checks pass" : "failed:";
  for (const auto& f : failed) detail += " " + f + ";";
  return {failed.empty(), detail};
}

Outcome imaging_loop() {
  Rng rng(derive_seed(42, 12));
  const OrthogonalMatrix d = gen_haar_orthogonal(16, rng);
  const Matrix y = matmul(d.matrix(), gen_bernoulli_gaussian(16, 5000, 0.3, rng));
  const ImageSet images = ImageSet::from_matrix(y, 4, 4);
  const OrthogonalMatrix a = learn_image_dictionary(images, {}, 7);
  const double err = std::abs(1.0 - normalized_l4(matmul(a.matrix(), d.matrix())));

  bool monotone = true;
  const Matrix pca = pca_basis(y, 16).components;
  const Matrix learned = a.transpose().matrix();
  double prev_l = 1e300, prev_p = 1e300;
  for (std::size_t k = 1; k <= 16; ++k) {
    const double l = reconstruct_topk(y, learned, BasisRanking::Energy, k).mse;
    const double p = reconstruct_topk(y, pca, BasisRanking::AsGiven, k).mse;
    monotone = monotone && l <= prev_l + 1e-12 && p <= prev_p + 1e-12;
    prev_l = l;
    prev_p = p;
  }

  const std::vector<std::uint8_t> fixture{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2,
                                          0, 255, 128, 64, 1, 2, 3, 254};
  const bool round_trip = encode_idx_images(parse_idx_images(fixture)) == fixture;
  return {err < 0.01 && monotone && round_trip,
          fmt("recovery error %.3g%%, MSE monotone %.0f, IDX round trip %.0f", 100 * err, monotone, round_trip)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"printed 3x3 run, 2k=4", printed_run_quartic},
      {"printed 3x3 run, 2k=10", printed_run_tenth},
      {"orthogonal convergence n=50,100", orthogonal_convergence},
      {"dictionary learning n=50 p=20000", dictionary_learning},
      {"objective expectation oracle", objective_expectation},
      {"gradient expectation oracle", gradient_expectation},
      {"SO(2) angle map", so2_equivalence},
      {"cubic local rate", cubic_rate},
      {"step-size table", step_size_table},
      {"phase-transition structure", phase_transition},
      {"property suite", property_suite},
      {"imaging closed loop", imaging_loop},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.ok;
    std::printf("%s  %2zu  %-34s %s\n", o.ok ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
