#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "l4dict/analysis.hpp"
#include "l4dict/model.hpp"
#include "test_support.hpp"

using namespace l4dict;

namespace {

constexpr double kPi = std::numbers::pi;

// ⟨G, H⟩_F
double inner(const Matrix& g, const Matrix& h) {
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += g.data()[k] * h.data()[k];
  return s;
}

}  // namespace

TEST(ExpectedObjective, AlignedDictionaryGivesN) {
  Rng rng(1);
  const OrthogonalMatrix d = gen_haar_orthogonal(6, rng);
  for (double theta : {0.1, 0.5, 0.9}) {
    const double p = 1000;
    EXPECT_NEAR(expected_objective(d.transpose(), d, theta, p) / (3 * p * theta), 6.0, 1e-12);
  }
  const OrthogonalMatrix sp(gen_signed_permutation(6, rng).to_matrix());
  EXPECT_NEAR(expected_objective(sp, OrthogonalMatrix::identity(6), 0.37, 50) / (3 * 50 * 0.37), 6.0,
              1e-12);
  EXPECT_THROW(expected_objective(d, d, 1.0, 10), InvalidArgument);
}

TEST(ExpectedObjective, MatchesMonteCarlo) {
  Rng rng(2);
  for (int pair = 0; pair < 3; ++pair) {
    const OrthogonalMatrix a = gen_haar_orthogonal(10, rng);
    const OrthogonalMatrix d = gen_haar_orthogonal(10, rng);
    const ExpectationReport r = monte_carlo_objective(a, d, 0.3, 100000, 8, rng);
    EXPECT_EQ(r.samples_used, 800000u);
    EXPECT_LE(r.rel_error(), 0.02) << "pair " << pair;
  }
}

TEST(ExpectedGradient, AlignedDictionary) {
  Rng rng(3);
  const OrthogonalMatrix d = gen_haar_orthogonal(5, rng);
  const OrthogonalMatrix a = d.transpose();
  const double theta = 0.3, p = 700;
  Matrix expected = a.matrix();
  expected *= 12.0 * p * theta;
  EXPECT_LE(max_abs_diff(expected_gradient(a, d, theta, p), expected), 1e-9 * 12 * p);
}

TEST(ExpectedGradient, MatchesMonteCarlo) {
  Rng rng(4);
  for (int pair = 0; pair < 2; ++pair) {
    const OrthogonalMatrix a = gen_haar_orthogonal(8, rng);
    const OrthogonalMatrix d = gen_haar_orthogonal(8, rng);
    const ExpectationReport r = monte_carlo_gradient(a, d, 0.3, 200000, 8, rng);
    EXPECT_LE(r.rel_error(), 0.03) << "pair " << pair;
  }
}

TEST(ExpectedGradient, CoefficientPeaksAtHalf) {
  // With AD = I the gradient is 12pθ·A; the (1−θ) part alone peaks at θ=1/2.
  double best = 0.0, best_theta = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double theta = k / 100.0;
    const double c = 3.0 * theta * (1.0 - theta);
    if (c > best) {
      best = c;
      best_theta = theta;
    }
  }
  EXPECT_DOUBLE_EQ(best_theta, 0.5);
  EXPECT_DOUBLE_EQ(best, 0.75);
}

TEST(ExpectedGradient, ConsistentWithObjectiveAlongTangents) {
  Rng rng(5);
  const double theta = 0.3, p = 1000, h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const OrthogonalMatrix a = gen_haar_orthogonal(6, rng);
    const OrthogonalMatrix d = gen_haar_orthogonal(6, rng);
    const Matrix s = random_skew(6, rng);
    auto f = [&](double t) { return expected_objective(a * expm_skew(s * t), d, theta, p); };
    const double fd = (f(h) - f(-h)) / (2 * h);
    const double analytic = inner(expected_gradient(a, d, theta, p), matmul(a.matrix(), s));
    EXPECT_LE(std::abs(fd - analytic), 1e-4 * std::abs(analytic)) << "trial " << trial;
  }
}

TEST(CriticalPointResidual, KnownCriticalPoints) {
  Rng rng(6);
  EXPECT_EQ(critical_point_residual(gen_signed_permutation(7, rng).to_matrix()), 0.0);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_LE(critical_point_residual(Matrix{{r, r}, {r, -r}}), 1e-15);
}

TEST(CriticalPointResidual, GenericPointsAreNotCritical) {
  Rng rng(7);
  double smallest = 1e300;
  for (int k = 0; k < 100; ++k)
    smallest = std::min(smallest, critical_point_residual(gen_haar_orthogonal(5, rng).matrix()));
  EXPECT_GT(smallest, 1e-6);
}

TEST(TanMap, FixedPointsAndValues) {
  EXPECT_EQ(tan_map(0.0), 0.0);
  EXPECT_NEAR(tan_map(kPi / 4), kPi / 4, 1e-15);
  EXPECT_EQ(tan_map(kPi / 2), kPi / 2);
  EXPECT_EQ(tan_map(-kPi / 2), -kPi / 2);
  const double t = std::tan(kPi / 8);
  EXPECT_DOUBLE_EQ(tan_map(kPi / 8), std::atan(t * t * t));
  EXPECT_NEAR(tan_map(kPi / 8), 0.0709485273, 1e-10);
  EXPECT_DOUBLE_EQ(tan_map(-0.4), -tan_map(0.4));
  EXPECT_THROW(tan_map(2.0), InvalidArgument);
}

TEST(TanMap, IteratesReachSignedPermutationAngles) {
  Rng rng(8);
  for (int k = 0; k < 200; ++k) {
    double phi = (rng.uniform() - 0.5) * kPi;
    if (std::abs(std::abs(phi) - kPi / 4) < 1e-3) continue;
    for (int it = 0; it < 60; ++it) phi = tan_map(phi);
    const double to_target =
        std::min({std::abs(phi), std::abs(phi - kPi / 2), std::abs(phi + kPi / 2)});
    EXPECT_LE(to_target, 1e-9);
  }
}

TEST(So2Equivalence, MatchesRecurrence) {
  for (double phi : {0.3, kPi / 4, -0.7, 0.01, 1.2, -1.5})
    EXPECT_LE(verify_so2_equivalence(phi), 1e-10) << "phi " << phi;
}

TEST(So2Equivalence, RejectsReflections) {
  EXPECT_THROW(rotation_angle(Matrix{{1, 0}, {0, -1}}), InvalidArgument);
  EXPECT_NEAR(rotation_angle(rotation2(-2.0)), -2.0, 1e-15);
}

TEST(GapBound, ClosedFormCases) {
  Rng rng(9);
  const SignedPermutation p = gen_signed_permutation(4, rng);
  const GapCheck exact = lemma4_gap_check(p.to_matrix());
  EXPECT_EQ(exact.eps, 0.0);
  EXPECT_EQ(exact.dist_sq_over_n, 0.0);

  // Rotate two coordinates of the permutation by 0.05 rad.
  Matrix g = Matrix::identity(4);
  const double c = std::cos(0.05), s = std::sin(0.05);
  g(1, 1) = c;
  g(1, 2) = -s;
  g(2, 1) = s;
  g(2, 2) = c;
  const GapCheck near = lemma4_gap_check(matmul(p.to_matrix(), g));
  // Closed form: ε = (2 − 2(c⁴ + s⁴))/4, dist² = 2·2(1 − c) over n = 4.
  EXPECT_NEAR(near.eps, (2.0 - 2.0 * (std::pow(c, 4) + std::pow(s, 4))) / 4.0, 1e-15);
  EXPECT_NEAR(near.dist_sq_over_n, 4.0 * (1.0 - c) / 4.0, 1e-15);
  EXPECT_LE(near.dist_sq_over_n, 2.0 * near.eps + 1e-9);

  const double r = 1.0 / std::sqrt(2.0);
  const GapCheck had = lemma4_gap_check(Matrix{{r, r}, {r, -r}});
  EXPECT_NEAR(had.eps, 0.5, 1e-15);
  // Nearest signed permutation keeps one entry per column: 2·((1−r)² + r²)/2.
  EXPECT_NEAR(had.dist_sq_over_n, (1 - r) * (1 - r) + r * r, 1e-15);
  EXPECT_LE(had.dist_sq_over_n, 2.0 * had.eps + 1e-9);
}

TEST(GapBound, HoldsOnRandomNearPermutations) {
  Rng rng(10);
  for (int k = 0; k < 50; ++k) {
    const OrthogonalMatrix w = perturb_identity(6, 0.05 * (k % 5 + 1), rng);
    const GapCheck gap = lemma4_gap_check(w.matrix());
    ASSERT_GE(gap.eps, 0.0);
    EXPECT_LE(gap.dist_sq_over_n, 2.0 * gap.eps + 1e-9);
  }
}

TEST(Perturbation, HitsRequestedDistance) {
  Rng rng(11);
  for (double eps : {0.01, 0.5, 1.0}) {
    const OrthogonalMatrix w = perturb_identity(5, eps, rng);
    EXPECT_NEAR(std::pow(frobenius_distance(w.matrix(), Matrix::identity(5)), 2), eps, 1e-9);
    EXPECT_LE(orthogonality_defect(w.matrix()), 1e-12);
  }
  EXPECT_THROW(perturb_identity(5, 0.0, rng), InvalidArgument);
}

TEST(ConcentrationProbe, DeviationShrinksWithP) {
  Rng rng(12);
  const auto rows = concentration_probe(10, 0.3, {1000, 10000, 100000}, 20, rng);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_GT(rows[0].mean_deviation, rows[1].mean_deviation);
  EXPECT_GT(rows[1].mean_deviation, rows[2].mean_deviation);
  int ordered = 0;
  for (std::size_t t = 0; t < 20; ++t) ordered += rows[2].deviations[t] <= rows[0].deviations[t];
  EXPECT_GE(ordered, 18);
  EXPECT_NEAR(rows[0].scaling, 0.3 * 100 * std::log(10.0) / 1000, 1e-15);
  for (const auto& r : rows) EXPECT_GE(r.max_deviation, r.mean_deviation);
}

TEST(ConcentrationProbe, RejectsBadGrid) {
  Rng rng(13);
  EXPECT_THROW(concentration_probe(4, 0.3, {100, 50}, 2, rng), InvalidArgument);
  EXPECT_THROW(concentration_probe(4, 0.3, {100}, 0, rng), InvalidArgument);
}
