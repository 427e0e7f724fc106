#pragma once

// Batch harness for the synthetic studies: convergence traces,
// phase-transition grids, ℓ^{2k} sweeps and the PGA step-size table.
//
// Seeding: every trial owns a stream. Cell c, trial t of an experiment with
// base seed s uses seed derive_seed(derive_seed(s, c), t). Within a trial the
// data are drawn by synthesize() from that seed and the initial iterate
// from derive_seed(trial_seed, kInitStream). Results are assembled by
// (cell, trial) index, so output is identical for any worker count.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "l4dict/csv.hpp"
#include "l4dict/error.hpp"
#include "l4dict/linalg.hpp"
#include "l4dict/model.hpp"
#include "l4dict/parallel.hpp"
#include "l4dict/random.hpp"
#include "l4dict/solver.hpp"

namespace l4dict {

inline constexpr std::uint64_t kInitStream = 0xA0;

inline std::uint64_t trial_seed(std::uint64_t base, std::size_t cell, std::size_t trial) {
  return derive_seed(derive_seed(base, cell), trial);
}

inline OrthogonalMatrix initial_iterate(std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kInitStream));
  return gen_haar_orthogonal(n, rng);
}

inline nlohmann::json to_json(const SolveConfig& c) {
  return {{"order_2k", c.order_2k},
          {"alpha", c.step_alpha.to_string()},
          {"max_iters", c.max_iters},
          {"stop_tol", c.stop_tol},
          {"bias_beta", c.bias_beta}};
}

inline nlohmann::json to_json(const ModelParams& m) {
  return {{"n", m.n}, {"p", m.p}, {"theta", m.theta}, {"seed", m.seed}};
}

// One dictionary-learning trial.
struct TrialOutcome {
  double error = 1.0;   // |1 − ‖A D_o‖₄⁴/n|, 1 when the solver failed
  double g_norm = 0.0;
  double dist_sq_over_n = 0.0;  // A·D_o to its nearest signed permutation
  std::size_t iters = 0;
  bool converged = false;
  bool failed = false;
  std::string failure;
};

inline TrialOutcome dl_trial(const ModelParams& params, const SolveConfig& cfg) {
  TrialOutcome out;
  try {
    const DatasetBundle data = synthesize(params);
    const SolveTrace tr = msp_dl(initial_iterate(params.n, params.seed), data.observations,
                                 params.theta, cfg, &data.dictionary);
    const Matrix ad = matmul(tr.final_iterate.matrix(), data.dictionary.matrix());
    out.g_norm = normalized_l4(ad);
    out.error = std::abs(1.0 - out.g_norm);
    out.dist_sq_over_n = nearest_signed_permutation(ad).dist_sq_over_n;
    out.iters = tr.iters_used;
    out.converged = tr.converged;
  } catch (const Error& e) {
    out.failed = true;
    out.failure = e.what();
    out.error = 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convergence traces

struct ConvergenceSpec {
  ModelParams params;      // params.seed is the base seed
  SolveConfig cfg;
  std::size_t trials = 10;
  bool orthogonal_only = false;  // D_o = I, no samples: iterate on A·D only
};

struct ConvergenceTrial {
  std::vector<double> g_norm;
  std::vector<double> fhat_norm;
  std::vector<double> displacement;
  std::size_t iters = 0;
  bool converged = false;
  std::string failure;
};

struct ConvergenceResult {
  std::vector<ConvergenceTrial> trials;

  double final_g(std::size_t t) const {
    const auto& g = trials[t].g_norm;
    return g.empty() ? 0.0 : g.back();
  }

  csv::Table to_csv() const {
    csv::Table tab({"trial", "iter", "g_norm", "fhat_norm"});
    for (std::size_t t = 0; t < trials.size(); ++t) {
      const auto& tr = trials[t];
      for (std::size_t i = 0; i < tr.g_norm.size(); ++i)
        tab.add_row({csv::number(t), csv::number(i), csv::number(tr.g_norm[i]),
                     i < tr.fhat_norm.size() ? csv::number(tr.fhat_norm[i]) : std::string()});
    }
    return tab;
  }
};

inline ConvergenceResult run_convergence(const ConvergenceSpec& spec,
                                         std::size_t jobs = default_jobs()) {
  spec.cfg.validate();
  if (spec.trials == 0) throw InvalidArgument("run_convergence: trials must be >= 1");
  if (!spec.orthogonal_only) spec.params.validate();
  if (spec.params.n < 2) throw InvalidArgument("run_convergence: n must be >= 2");
  ConvergenceResult res;
  res.trials = parallel_map(spec.trials, jobs, [&](std::size_t t) {
    ConvergenceTrial out;
    ModelParams p = spec.params;
    p.seed = trial_seed(spec.params.seed, 0, t);
    try {
      SolveTrace tr;
      if (spec.orthogonal_only) {
        tr = msp_orth(initial_iterate(p.n, p.seed), OrthogonalMatrix::identity(p.n), spec.cfg);
      } else {
        const DatasetBundle data = synthesize(p);
        tr = msp_dl(initial_iterate(p.n, p.seed), data.observations, p.theta, spec.cfg,
                    &data.dictionary);
      }
      out.g_norm = std::move(tr.g_norm);
      out.fhat_norm = std::move(tr.fhat_norm);
      out.displacement = std::move(tr.displacement);
      out.iters = tr.iters_used;
      out.converged = tr.converged;
    } catch (const Error& e) {
      out.failure = e.what();
    }
    return out;
  });
  return res;
}

inline nlohmann::json to_json(const ConvergenceSpec& s) {
  return {{"experiment", "convergence"},
          {"params", to_json(s.params)},
          {"cfg", to_json(s.cfg)},
          {"trials", s.trials},
          {"orthogonal_only", s.orthogonal_only}};
}

// ---------------------------------------------------------------------------
// Phase transitions

struct GridAxis {
  std::string name;  // "n", "p" or "theta"
  std::vector<double> values;
};

struct GridSpec {
  GridAxis axis1{"theta", {0.1, 0.3, 0.5, 0.7, 0.9}};
  GridAxis axis2{"p", {500, 2000, 20000}};
  ModelParams fixed{20, 20000, 0.3, 42};  // fields not on an axis
  std::size_t trials = 10;
  SolveConfig cfg{4, StepSize::infinite(), 100, 1e-10, 0.0};
  std::uint64_t base_seed = 42;
  double success_threshold = 0.01;

  void validate() const {
    auto check_axis = [](const GridAxis& a) {
      if (a.values.empty()) throw InvalidArgument("GridSpec: axis '" + a.name + "' is empty");
      if (a.name != "n" && a.name != "p" && a.name != "theta")
        throw InvalidArgument("GridSpec: unknown axis '" + a.name + "'");
    };
    check_axis(axis1);
    check_axis(axis2);
    if (axis1.name == axis2.name) throw InvalidArgument("GridSpec: axes must differ");
    if (trials == 0) throw InvalidArgument("GridSpec: trials must be >= 1");
    cfg.validate();
  }

  ModelParams cell_params(std::size_t i1, std::size_t i2) const {
    ModelParams p = fixed;
    auto assign = [&p](const std::string& name, double v) {
      if (name == "n") p.n = static_cast<std::size_t>(std::llround(v));
      else if (name == "p") p.p = static_cast<std::size_t>(std::llround(v));
      else p.theta = v;
    };
    assign(axis1.name, axis1.values[i1]);
    assign(axis2.name, axis2.values[i2]);
    return p;
  }
};

struct GridCell {
  double axis1 = 0.0;
  double axis2 = 0.0;
  ModelParams params;
  double mean_error = 0.0;
  double success_rate = 0.0;
  std::vector<TrialOutcome> trials;
};

struct GridResult {
  GridAxis axis1;
  GridAxis axis2;
  std::vector<GridCell> cells;  // axis1-major order
  double wall_seconds = 0.0;

  const GridCell& at(std::size_t i1, std::size_t i2) const {
    return cells.at(i1 * axis2.values.size() + i2);
  }

  const GridCell* find(double v1, double v2) const {
    for (const auto& c : cells)
      if (std::abs(c.axis1 - v1) < 1e-12 && std::abs(c.axis2 - v2) < 1e-12) return &c;
    return nullptr;
  }

  csv::Table to_csv() const {
    csv::Table tab({axis1.name, axis2.name, "mean_error", "success_rate"});
    for (const auto& c : cells)
      tab.add_row({csv::number(c.axis1), csv::number(c.axis2), csv::number(c.mean_error),
                   csv::number(c.success_rate)});
    return tab;
  }
};

inline GridResult run_phase_transition(const GridSpec& spec, std::size_t jobs = default_jobs()) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n1 = spec.axis1.values.size();
  const std::size_t n2 = spec.axis2.values.size();
  const std::size_t ncells = n1 * n2;
  for (std::size_t c = 0; c < ncells; ++c) spec.cell_params(c / n2, c % n2).validate();

  auto outcomes = parallel_map(ncells * spec.trials, jobs, [&](std::size_t k) {
    const std::size_t c = k / spec.trials;
    const std::size_t t = k % spec.trials;
    ModelParams p = spec.cell_params(c / n2, c % n2);
    p.seed = trial_seed(spec.base_seed, c, t);
    return dl_trial(p, spec.cfg);
  });

  GridResult res{spec.axis1, spec.axis2, {}, 0.0};
  for (std::size_t c = 0; c < ncells; ++c) {
    GridCell cell;
    cell.axis1 = spec.axis1.values[c / n2];
    cell.axis2 = spec.axis2.values[c % n2];
    cell.params = spec.cell_params(c / n2, c % n2);
    double err = 0.0;
    std::size_t ok = 0;
    for (std::size_t t = 0; t < spec.trials; ++t) {
      auto& o = outcomes[c * spec.trials + t];
      err += o.error;
      if (o.error < spec.success_threshold) ++ok;
      cell.trials.push_back(std::move(o));
    }
    cell.mean_error = err / static_cast<double>(spec.trials);
    cell.success_rate = static_cast<double>(ok) / static_cast<double>(spec.trials);
    res.cells.push_back(std::move(cell));
  }
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

inline nlohmann::json to_json(const GridSpec& s) {
  return {{"experiment", "phase_transition"},
          {"axis1", {{"name", s.axis1.name}, {"values", s.axis1.values}}},
          {"axis2", {{"name", s.axis2.name}, {"values", s.axis2.values}}},
          {"fixed", to_json(s.fixed)},
          {"trials", s.trials},
          {"cfg", to_json(s.cfg)},
          {"base_seed", s.base_seed},
          {"success_threshold", s.success_threshold}};
}

// C(θ) = 4/(3θ(1−θ)), the constant linking the objective gap to the
// distance from a signed permutation.
inline double recovery_constant(double theta) { return 4.0 / (3.0 * theta * (1.0 - theta)); }

// C(θ) and the sample-size scale C(θ)·θ·n²·ln n for every (θ, n) the grid
// touches; meant to be drawn over the phase-transition heat map.
inline csv::Table recovery_overlay(const GridSpec& spec) {
  spec.validate();
  auto values = [&spec](const std::string& name, double fixed) {
    if (spec.axis1.name == name) return spec.axis1.values;
    if (spec.axis2.name == name) return spec.axis2.values;
    return std::vector<double>{fixed};
  };
  csv::Table tab({"theta", "n", "constant", "sample_scale"});
  for (double theta : values("theta", spec.fixed.theta))
    for (double n : values("n", static_cast<double>(spec.fixed.n))) {
      const double c = recovery_constant(theta);
      tab.add_row({csv::number(theta), csv::number(n), csv::number(c),
                   csv::number(c * theta * n * n * std::log(n))});
    }
  return tab;
}

// ---------------------------------------------------------------------------
// ℓ^{2k} sweep

struct SweepSpec {
  std::size_t n = 10;
  double theta = 0.3;
  std::vector<std::size_t> p_grid{1000, 5000, 20000};
  std::vector<int> order_grid{4, 6, 8, 10};
  std::size_t trials = 5;
  std::size_t max_iters = 100;
  double reach_tol = 1e-8;  // deterministic iteration count threshold on g_norm
  std::uint64_t base_seed = 42;
};

struct SweepResult {
  struct Cell {
    int order_2k;
    std::size_t p;
    double mean_error;
  };
  struct Deterministic {
    int order_2k;
    long long iterations;  // −1 when the threshold was never reached
  };
  std::vector<Cell> cells;
  std::vector<Deterministic> deterministic;

  double error_at(int order, std::size_t p) const {
    for (const auto& c : cells)
      if (c.order_2k == order && c.p == p) return c.mean_error;
    throw InvalidArgument("SweepResult: no such cell");
  }
  long long iterations_at(int order) const {
    for (const auto& d : deterministic)
      if (d.order_2k == order) return d.iterations;
    throw InvalidArgument("SweepResult: no such order");
  }

  csv::Table to_csv() const {
    csv::Table tab({"order_2k", "p", "mean_error"});
    for (const auto& c : cells)
      tab.add_row({csv::number(c.order_2k), csv::number(c.p), csv::number(c.mean_error)});
    return tab;
  }
  csv::Table iterations_csv() const {
    csv::Table tab({"order_2k", "iterations"});
    for (const auto& d : deterministic)
      tab.add_row({csv::number(d.order_2k), csv::number(d.iterations)});
    return tab;
  }
};

inline SweepResult run_2k_sweep(const SweepSpec& spec, std::size_t jobs = default_jobs()) {
  if (spec.p_grid.empty() || spec.order_grid.empty())
    throw InvalidArgument("run_2k_sweep: empty grid");
  if (spec.trials == 0) throw InvalidArgument("run_2k_sweep: trials must be >= 1");
  for (int k : spec.order_grid) detail::require_order(k);
  const std::size_t np = spec.p_grid.size();
  const std::size_t ncells = spec.order_grid.size() * np;

  // Trials share data across orders (seeded by p index and trial) so the
  // orders are compared on identical samples.
  auto outcomes = parallel_map(ncells * spec.trials, jobs, [&](std::size_t k) {
    const std::size_t c = k / spec.trials;
    const std::size_t t = k % spec.trials;
    ModelParams p{spec.n, spec.p_grid[c % np], spec.theta, trial_seed(spec.base_seed, c % np, t)};
    SolveConfig cfg;
    cfg.order_2k = spec.order_grid[c / np];
    cfg.max_iters = spec.max_iters;
    return dl_trial(p, cfg);
  });

  SweepResult res;
  for (std::size_t c = 0; c < ncells; ++c) {
    double err = 0.0;
    for (std::size_t t = 0; t < spec.trials; ++t) err += outcomes[c * spec.trials + t].error;
    res.cells.push_back(
        {spec.order_grid[c / np], spec.p_grid[c % np], err / static_cast<double>(spec.trials)});
  }

  const OrthogonalMatrix a0 = initial_iterate(spec.n, derive_seed(spec.base_seed, 0xD0));
  for (int order : spec.order_grid) {
    SolveConfig cfg;
    cfg.order_2k = order;
    cfg.max_iters = spec.max_iters;
    long long iters = -1;
    try {
      const SolveTrace tr = msp_orth(a0, OrthogonalMatrix::identity(spec.n), cfg);
      if (auto t = first_reaching(tr.g_norm, spec.reach_tol)) iters = static_cast<long long>(*t);
    } catch (const Error&) {
    }
    res.deterministic.push_back({order, iters});
  }
  return res;
}

inline nlohmann::json to_json(const SweepSpec& s) {
  return {{"experiment", "sweep_2k"},   {"n", s.n},
          {"theta", s.theta},           {"p_grid", s.p_grid},
          {"order_grid", s.order_grid}, {"trials", s.trials},
          {"max_iters", s.max_iters},   {"reach_tol", s.reach_tol},
          {"base_seed", s.base_seed}};
}

// ---------------------------------------------------------------------------
// PGA step-size table

struct PgaTableSpec {
  std::vector<std::size_t> n_grid{5, 25, 50};
  std::vector<StepSize> alpha_grid{StepSize::finite(1), StepSize::finite(10),
                                   StepSize::finite(100), StepSize::infinite()};
  double tol = 1e-8;  // count iterations until g_norm >= 1 − tol
  std::size_t max_iters = 1000;
  std::uint64_t base_seed = 42;
};

struct PgaTableResult {
  struct Row {
    std::size_t n;
    StepSize alpha;
    long long iterations;  // −1 sentinel: threshold not reached within max_iters
  };
  std::vector<Row> rows;

  long long at(std::size_t n, const StepSize& alpha) const {
    for (const auto& r : rows)
      if (r.n == n && r.alpha == alpha) return r.iterations;
    throw InvalidArgument("PgaTableResult: no such entry");
  }

  csv::Table to_csv() const {
    csv::Table tab({"n", "alpha", "iterations"});
    for (const auto& r : rows)
      tab.add_row({csv::number(r.n), r.alpha.to_string(), csv::number(r.iterations)});
    return tab;
  }
};

// Every α for a given n starts from the same initial iterate.
inline PgaTableResult run_pga_table(const PgaTableSpec& spec, std::size_t jobs = default_jobs()) {
  if (spec.n_grid.empty() || spec.alpha_grid.empty())
    throw InvalidArgument("run_pga_table: empty grid");
  if (!(spec.tol > 0.0)) throw InvalidArgument("run_pga_table: tol must be positive");
  const std::size_t na = spec.alpha_grid.size();
  auto counts = parallel_map(spec.n_grid.size() * na, jobs, [&](std::size_t k) {
    const std::size_t n = spec.n_grid[k / na];
    const OrthogonalMatrix a0 = initial_iterate(n, derive_seed(spec.base_seed, n));
    SolveConfig cfg;
    cfg.step_alpha = spec.alpha_grid[k % na];
    cfg.max_iters = spec.max_iters;
    try {
      const SolveTrace tr = pga_run(a0, cfg);
      if (auto t = first_reaching(tr.g_norm, spec.tol)) return static_cast<long long>(*t);
    } catch (const Error&) {
    }
    return -1LL;
  });
  PgaTableResult res;
  for (std::size_t k = 0; k < counts.size(); ++k)
    res.rows.push_back({spec.n_grid[k / na], spec.alpha_grid[k % na], counts[k]});
  return res;
}

inline nlohmann::json to_json(const PgaTableSpec& s) {
  std::vector<std::string> alphas;
  for (const auto& a : s.alpha_grid) alphas.push_back(a.to_string());
  return {{"experiment", "pga_table"}, {"n_grid", s.n_grid},       {"alpha_grid", alphas},
          {"tol", s.tol},              {"max_iters", s.max_iters}, {"base_seed", s.base_seed}};
}

}  // namespace l4dict
