#include <gtest/gtest.h>

#include <cstdlib>

#include "l4dict/experiments.hpp"

using namespace l4dict;

namespace {

GridSpec small_grid() {
  GridSpec g;
  g.axis1 = {"theta", {0.5, 0.9}};
  g.axis2 = {"p", {500, 2000, 20000}};
  g.fixed = {20, 20000, 0.3, 0};
  g.trials = 4;
  return g;
}

}  // namespace

TEST(Seeding, TrialSeedsNest) {
  EXPECT_EQ(trial_seed(42, 3, 5), derive_seed(derive_seed(42, 3), 5));
  EXPECT_NE(trial_seed(42, 0, 1), trial_seed(42, 1, 0));
  EXPECT_EQ(initial_iterate(6, 9), initial_iterate(6, 9));
  EXPECT_NE(initial_iterate(6, 9), initial_iterate(6, 10));
}

TEST(DlTrial, RecordsFailureAsUnitError) {
  SolveConfig cfg;
  const TrialOutcome bad = dl_trial({4, 2, 0.3, 1}, cfg);
  EXPECT_TRUE(bad.failed);
  EXPECT_EQ(bad.error, 1.0);
  EXPECT_FALSE(bad.failure.empty());
}

TEST(Convergence, ReplayIsByteIdentical) {
  ConvergenceSpec spec{{8, 2000, 0.3, 17}, {}, 3, false};
  spec.cfg.max_iters = 20;
  const std::string a = run_convergence(spec, 1).to_csv().str();
  const std::string b = run_convergence(spec, 1).to_csv().str();
  const std::string c = run_convergence(spec, 3).to_csv().str();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_EQ(a.substr(0, a.find("\r\n")), "trial,iter,g_norm,fhat_norm");
}

TEST(Convergence, OrthogonalModeReachesMaximumQuickly) {
  ConvergenceSpec spec{{50, 50, 0.3, 42}, {}, 100, true};
  spec.cfg.max_iters = 50;
  const ConvergenceResult res = run_convergence(spec);
  std::size_t within10 = 0;
  for (std::size_t t = 0; t < res.trials.size(); ++t) {
    const auto loose = first_reaching(res.trials[t].g_norm, 1e-6);
    ASSERT_TRUE(loose.has_value()) << "trial " << t;
    EXPECT_LE(*loose, 15u) << "trial " << t;
    const auto tight = first_reaching(res.trials[t].g_norm, 1e-8);
    ASSERT_TRUE(tight.has_value()) << "trial " << t;
    within10 += *tight <= 10;
    EXPECT_TRUE(res.trials[t].fhat_norm.empty());
  }
  // A few starts sit near saddles and need one to three extra rounds.
  EXPECT_GE(within10, 95u);
}

TEST(Convergence, LearnsSmallDictionaries) {
  ConvergenceSpec spec{{20, 10000, 0.3, 5}, {}, 10, false};
  spec.cfg.max_iters = 40;
  const ConvergenceResult res = run_convergence(spec);
  for (std::size_t t = 0; t < res.trials.size(); ++t) {
    EXPECT_GE(res.final_g(t), 0.99) << "trial " << t;
    // f̂ normalized by 3npθ tracks g up to sampling noise.
    EXPECT_NEAR(res.trials[t].fhat_norm.back(), 1.0, 0.05);
  }
}

TEST(GridSpec, Validation) {
  GridSpec g;
  EXPECT_NO_THROW(g.validate());
  g.axis1.values.clear();
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = {};
  g.axis2.name = "theta";
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = {};
  g.axis2.name = "q";
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = {};
  g.trials = 0;
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = {};
  g.axis2.values = {5};  // p < n
  EXPECT_THROW(run_phase_transition(g, 1), InvalidArgument);
}

TEST(PhaseTransition, SuccessAndFailureRegions) {
  const GridSpec spec = small_grid();
  const GridResult res = run_phase_transition(spec);
  ASSERT_EQ(res.cells.size(), 6u);
  EXPECT_LT(res.find(0.5, 20000)->mean_error, 0.01);
  EXPECT_GT(res.find(0.9, 2000)->mean_error, 0.1);
  EXPECT_GE(res.find(0.5, 500)->mean_error, res.find(0.5, 2000)->mean_error);
  EXPECT_GE(res.find(0.5, 2000)->mean_error, res.find(0.5, 20000)->mean_error);
  for (const auto& c : res.cells) {
    EXPECT_GE(c.mean_error, 0.0);
    EXPECT_GE(c.success_rate, 0.0);
    EXPECT_LE(c.success_rate, 1.0);
  }
  EXPECT_EQ(res.at(1, 2).axis1, 0.9);
  EXPECT_EQ(res.at(1, 2).axis2, 20000);
  EXPECT_GE(res.wall_seconds, 0.0);

  // Distance to the nearest signed permutation is controlled by the
  // objective gap on every successful trial.
  for (const auto& c : res.cells)
    for (const auto& t : c.trials)
      if (t.error < spec.success_threshold) {
        EXPECT_LE(t.dist_sq_over_n, recovery_constant(c.params.theta) * (1.0 - t.g_norm) + 1e-6);
      }
}

TEST(PhaseTransition, TrialsIndependentOfScheduling) {
  GridSpec spec = small_grid();
  spec.axis2.values = {500, 2000};
  spec.trials = 3;
  const GridResult serial = run_phase_transition(spec, 1);
  const GridResult threaded = run_phase_transition(spec, 4);
  EXPECT_EQ(serial.to_csv().str(), threaded.to_csv().str());
  // Any single trial can be replayed on its own from its derived seed.
  const std::size_t cell = 3, trial = 2;
  ModelParams p = spec.cell_params(cell / 2, cell % 2);
  p.seed = trial_seed(spec.base_seed, cell, trial);
  const TrialOutcome alone = dl_trial(p, spec.cfg);
  EXPECT_EQ(alone.g_norm, serial.cells[cell].trials[trial].g_norm);
}

TEST(PhaseTransition, CsvLayout) {
  GridSpec spec;
  spec.axis1 = {"n", {4}};
  spec.axis2 = {"p", {100}};
  spec.trials = 1;
  const std::string csv = run_phase_transition(spec, 1).to_csv().str();
  EXPECT_EQ(csv.substr(0, csv.find("\r\n")), "n,p,mean_error,success_rate");
  EXPECT_EQ(csv.compare(csv.find("\r\n") + 2, 6, "4,100,"), 0);
}

TEST(Sweep, HigherOrdersTradeSamplesForSpeed) {
  SweepSpec spec;
  spec.trials = 3;
  const SweepResult res = run_2k_sweep(spec);
  EXPECT_LE(res.iterations_at(10), res.iterations_at(4));
  EXPECT_GT(res.iterations_at(4), 0);
  EXPECT_GT(res.error_at(8, 1000), res.error_at(4, 1000));
  EXPECT_LT(res.error_at(4, 20000), 0.01);
  EXPECT_EQ(res.cells.size(), 12u);
  EXPECT_THROW(res.error_at(12, 1000), InvalidArgument);
}

TEST(Sweep, RejectsOddOrder) {
  SweepSpec spec;
  spec.order_grid = {4, 5};
  EXPECT_THROW(run_2k_sweep(spec, 1), InvalidArgument);
}

TEST(PgaTable, StepSizeOrdering) {
  const PgaTableResult res = run_pga_table({});
  const auto one = StepSize::finite(1), ten = StepSize::finite(10), hundred = StepSize::finite(100);
  const auto inf = StepSize::infinite();
  EXPECT_LE(res.at(5, ten), res.at(5, one));
  EXPECT_LE(res.at(5, hundred), res.at(5, ten));
  EXPECT_LE(res.at(5, inf), res.at(5, hundred));
  for (std::size_t n : {5u, 25u, 50u}) {
    EXPECT_GT(res.at(n, inf), 0) << n;
    EXPECT_LE(res.at(n, inf), res.at(n, hundred)) << n;
  }
  EXPECT_LE(res.at(25, inf), 10);
  const std::string csv = res.to_csv().str();
  EXPECT_NE(csv.find("5,inf,"), std::string::npos);
}

TEST(PgaTable, SentinelWhenBudgetTooSmall) {
  PgaTableSpec spec;
  spec.n_grid = {25};
  spec.alpha_grid = {StepSize::finite(1)};
  spec.max_iters = 2;
  EXPECT_EQ(run_pga_table(spec, 1).at(25, StepSize::finite(1)), -1);
}

TEST(Manifests, CaptureSpecs) {
  const auto g = to_json(GridSpec{});
  EXPECT_EQ(g["experiment"], "phase_transition");
  EXPECT_EQ(g["base_seed"], 42);
  EXPECT_EQ(g["axis1"]["values"].size(), 5u);
  EXPECT_EQ(g["cfg"]["alpha"], "inf");
  const auto p = to_json(PgaTableSpec{});
  EXPECT_EQ(p["alpha_grid"].back(), "inf");
  EXPECT_EQ(to_json(SweepSpec{})["order_grid"].size(), 4u);
}

TEST(Csv, NumbersRoundTripShortest) {
  EXPECT_EQ(csv::number(0.3), "0.3");
  EXPECT_EQ(csv::number(20000.0), "20000");
  for (double v : {0.1 + 0.2, 1e-300, -123.456789012345678, 5e-324})
    EXPECT_EQ(std::strtod(csv::number(v).c_str(), nullptr), v);
}

TEST(Csv, QuotesPerRfc4180) {
  EXPECT_EQ(csv::quote("plain"), "plain");
  EXPECT_EQ(csv::quote("a,b"), "\"a,b\"");
  EXPECT_EQ(csv::quote("say \"hi\""), "\"say \"\"hi\"\"\"");
  csv::Table t({"x", "y"});
  t.add_row({"1", "two, three"});
  EXPECT_EQ(t.str(), "x,y\r\n1,\"two, three\"\r\n");
  EXPECT_THROW(t.add_row({"only one"}), Error);
}

TEST(PhaseTransition, OverlayCoversGridThetas) {
  GridSpec spec;
  spec.fixed.n = 20;
  const std::string csv = recovery_overlay(spec).str();
  EXPECT_EQ(csv.substr(0, csv.find("\r\n")), "theta,n,constant,sample_scale");
  // θ = 0.5: C = 16/3, scale = C·0.5·400·ln 20.
  const double c = 16.0 / 3.0;
  const std::string row = "0.5,20," + csv::number(c) + "," + csv::number(c * 0.5 * 400 * std::log(20.0));
  EXPECT_NE(csv.find(row), std::string::npos);
  std::size_t rows = 0;
  for (std::size_t at = csv.find("\r\n"); at != std::string::npos; at = csv.find("\r\n", at + 2)) ++rows;
  EXPECT_EQ(rows, 1u + 5u);

  spec.axis1 = {"n", {10, 30}};
  spec.fixed.theta = 0.25;
  const std::string by_n = recovery_overlay(spec).str();
  EXPECT_NE(by_n.find("0.25,10,"), std::string::npos);
  EXPECT_NE(by_n.find("0.25,30,"), std::string::npos);
}
