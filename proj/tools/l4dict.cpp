// l4dict: command-line front end for the l4dict library.
//
// Every subcommand resolves its settings as defaults < --config JSON <
// explicit flags, and records the resolved settings in <out>/manifest.json.
// Exit codes: 0 success, 1 numerical/domain failure, 2 usage error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "l4dict/analysis.hpp"
#include "l4dict/csv.hpp"
#include "l4dict/experiments.hpp"
#include "l4dict/imaging.hpp"
#include "l4dict/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace l4dict;

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Settings of one subcommand. Each setting is a flag `--some-name` and a
// JSON key `some_name`; resolve() layers defaults, the config file and the
// flags that were actually given.
class Settings {
 public:
  explicit Settings(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON file with settings; flags override it");
    app_->add_option("--out", out_, "output directory")->capture_default_str();
    app_->add_option("--jobs", jobs_, "worker threads")->capture_default_str();
    app_->add_flag("-q,--quiet", quiet_, "print nothing on success; results still go to --out");
    add<std::uint64_t>("seed", kDefaultSeed, "base seed (fallback: $L4DICT_SEED, then 42)");
  }

  template <class T>
  void add(const std::string& flag, T def, const std::string& help) {
    auto holder = std::make_shared<std::optional<T>>();
    auto* opt = app_->add_option("--" + flag, *holder, help);
    if constexpr (std::is_same_v<T, std::vector<double>> ||
                  std::is_same_v<T, std::vector<std::string>> ||
                  std::is_same_v<T, std::vector<int>>)
      opt->delimiter(',');
    const std::string key = to_key(flag);
    defaults_[key] = def;
    apply_.push_back([holder, key](json& j) {
      if (*holder) j[key] = **holder;
    });
  }

  void add_switch(const std::string& flag, const std::string& help) {
    auto holder = std::make_shared<bool>(false);
    app_->add_flag("--" + flag, *holder, help);
    const std::string key = to_key(flag);
    defaults_[key] = false;
    apply_.push_back([holder, key](json& j) {
      if (*holder) j[key] = true;
    });
  }

  // `layer`, if given, maps a first resolution to extra defaults that sit
  // between the built-in defaults and the config file (used by presets).
  json resolve(const std::function<json(const json&)>& layer = {}) const {
    json eff = defaults_;
    if (layer) {
      const json extra = layer(resolve());
      for (const auto& [k, v] : extra.items()) eff[k] = v;
    }
    if (const char* env = std::getenv("L4DICT_SEED")) {
      try {
        eff["seed"] = std::stoull(env);
      } catch (const std::exception&) {
        throw UsageError(std::string("L4DICT_SEED is not an unsigned integer: ") + env);
      }
    }
    if (!config_path_.empty()) {
      std::ifstream is(config_path_);
      if (!is) throw UsageError("cannot open config " + config_path_);
      json file;
      try {
        file = json::parse(is);
      } catch (const json::parse_error& e) {
        throw UsageError("config " + config_path_ + ": " + e.what());
      }
      // A manifest from an earlier run replays its recorded settings.
      if (file.contains("settings") && file.contains("command")) file = file["settings"];
      if (!file.is_object()) throw UsageError("config must be a JSON object");
      for (const auto& [k, v] : file.items()) {
        if (!defaults_.contains(k)) throw UsageError("config: unknown key '" + k + "'");
        eff[k] = v;
      }
    }
    for (const auto& f : apply_) f(eff);
    return eff;
  }

  const std::string& out() const { return out_; }
  std::size_t jobs() const { return jobs_ == 0 ? default_jobs() : jobs_; }
  std::ostream& log() const {
    static std::ostream null(nullptr);
    return quiet_ ? null : std::cout;
  }

 private:
  static std::string to_key(std::string flag) {
    for (char& c : flag)
      if (c == '-') c = '_';
    return flag;
  }

  CLI::App* app_;
  std::string config_path_;
  std::string out_ = ".";
  std::size_t jobs_ = 0;
  bool quiet_ = false;
  json defaults_ = json::object();
  std::vector<std::function<void(json&)>> apply_;
};

StepSize step_from(const json& v) {
  try {
    if (v.is_string()) return StepSize::parse(v.get<std::string>());
    return StepSize::finite(v.get<double>());
  } catch (const InvalidArgument& e) {
    throw UsageError(std::string("--alpha: ") + e.what());
  }
}

SolveConfig solve_config(const json& s) {
  SolveConfig c;
  c.order_2k = s.at("order").get<int>();
  c.step_alpha = step_from(s.at("alpha"));
  c.max_iters = s.at("max_iters").get<std::size_t>();
  c.stop_tol = s.at("tol").get<double>();
  c.bias_beta = s.at("bias").get<double>();
  return c;
}

ModelParams model_params(const json& s) {
  return {s.at("n").get<std::size_t>(), s.at("p").get<std::size_t>(), s.at("theta").get<double>(),
          s.at("seed").get<std::uint64_t>()};
}

void add_model(Settings& st, std::size_t n, std::size_t p, double theta) {
  st.add<std::size_t>("n", n, "dimension n");
  st.add<std::size_t>("p", p, "sample count p");
  st.add<double>("theta", theta, "Bernoulli-Gaussian sparsity level");
}

void add_solver(Settings& st, std::size_t max_iters) {
  st.add<int>("order", 4, "even objective order 2k (>= 4)");
  st.add<std::string>("alpha", "inf", "step size: positive number or 'inf' (MSP)");
  st.add<std::size_t>("max-iters", max_iters, "iteration budget");
  st.add<double>("tol", 1e-10, "stop when |A_{t+1}-A_t|_F/sqrt(n) < tol");
  st.add<double>("bias", 0.0, "bias term beta (infinite step only)");
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

void write_manifest(const fs::path& dir, const std::string& command, const json& settings,
                    json extra = json::object()) {
  json m{{"command", command}, {"settings", settings}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_json(dir / "manifest.json", m);
}

// ---------------------------------------------------------------------------

int cmd_generate(const Settings& st) {
  const json s = st.resolve();
  const ModelParams params = model_params(s);
  const DatasetBundle d = synthesize(params);
  const fs::path out = prepare_out(st.out());
  save_matrix((out / "dictionary.txt").string(), d.dictionary.matrix());
  save_matrix((out / "codes.txt").string(), d.codes);
  save_matrix((out / "observations.txt").string(), d.observations);
  write_json(out / "params.json", to_json(params));
  write_manifest(out, "generate", s, {{"params", to_json(params)}});
  st.log() << "wrote " << params.n << "x" << params.p << " dataset to " << out.string() << '\n';
  return 0;
}

int cmd_solve(const Settings& st) {
  const json s = st.resolve();
  const SolveConfig cfg = solve_config(s);
  const std::uint64_t seed = s.at("seed").get<std::uint64_t>();
  const double theta = s.at("theta").get<double>();

  Matrix y;
  std::optional<OrthogonalMatrix> truth;
  const std::string y_path = s.at("y").get<std::string>();
  if (y_path.empty()) {
    const DatasetBundle d = synthesize(model_params(s));
    y = d.observations;
    truth = d.dictionary;
  } else {
    y = load_matrix(y_path);
    const std::string d_path = s.at("dictionary").get<std::string>();
    if (!d_path.empty()) truth = OrthogonalMatrix(load_matrix(d_path));
  }
  if (s.at("precondition").get<bool>()) y = precondition(y, theta);

  const SolveTrace tr = msp_dl(initial_iterate(y.rows(), seed), y, theta, cfg,
                               truth ? &*truth : nullptr);

  const fs::path out = prepare_out(st.out());
  save_matrix((out / "A.txt").string(), tr.final_iterate.matrix());
  csv::Table trace({"iter", "g_norm", "fhat_norm", "displacement"});
  for (std::size_t i = 0; i < tr.fhat_norm.size(); ++i)
    trace.add_row({csv::number(i), i < tr.g_norm.size() ? csv::number(tr.g_norm[i]) : "",
                   csv::number(tr.fhat_norm[i]),
                   i == 0 ? "" : csv::number(tr.displacement[i - 1])});
  trace.save((out / "trace.csv").string());
  write_manifest(out, "solve", s,
                 {{"iters_used", tr.iters_used}, {"converged", tr.converged}});

  st.log() << "iterations " << tr.iters_used << (tr.converged ? " (converged)" : " (budget hit)")
           << ", fhat_norm " << tr.fhat_norm.back();
  if (!tr.g_norm.empty()) st.log() << ", g_norm " << tr.g_norm.back();
  st.log() << '\n';
  return 0;
}

int cmd_verify(const Settings& st) {
  const json s = st.resolve();
  const auto results = run_verify_suite(s.at("seed").get<std::uint64_t>());
  bool all = true;
  csv::Table tab({"check", "result", "detail"});
  for (const auto& r : results) {
    char line[512];
    std::snprintf(line, sizeof line, "%-4s  %-45s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                  r.detail.c_str());
    st.log() << line;
    tab.add_row({r.name, r.passed ? "pass" : "fail", r.detail});
    all = all && r.passed;
  }
  if (st.out() != ".") {
    const fs::path out = prepare_out(st.out());
    tab.save((out / "verify.csv").string());
    write_manifest(out, "verify", s, {{"all_passed", all}});
  }
  return all ? 0 : 1;
}

int cmd_trace(const Settings& st) {
  const json s = st.resolve();
  ConvergenceSpec spec{model_params(s), solve_config(s), s.at("trials").get<std::size_t>(),
                       s.at("orthogonal").get<bool>()};
  const ConvergenceResult res = run_convergence(spec, st.jobs());
  const fs::path out = prepare_out(st.out());
  res.to_csv().save((out / "convergence.csv").string());
  write_manifest(out, "trace", s, {{"spec", to_json(spec)}});
  double worst = 1.0;
  for (std::size_t t = 0; t < res.trials.size(); ++t)
    worst = std::min(worst, res.final_g(t));
  st.log() << res.trials.size() << " trials, lowest final g_norm " << worst << '\n';
  return 0;
}

// Paper-scale grids. Each preset only supplies defaults, so explicit flags
// and config keys still win.
json phase_preset(const json& first) {
  auto range = [](double from, double step, int count) {
    std::vector<double> v;
    for (int k = 0; k < count; ++k) v.push_back(from + step * k);
    return v;
  };
  const std::string name = first.at("preset").get<std::string>();
  if (name == "desk") return json::object();
  if (name == "theta-p")
    return {{"n", 50}, {"axis1", "theta"}, {"axis1_values", range(0.1, 0.1, 9)},
            {"axis2", "p"}, {"axis2_values", {500, 1000, 2000, 5000, 10000, 20000, 50000}}};
  if (name == "n-p-small")
    return {{"theta", 0.5}, {"axis1", "n"}, {"axis1_values", range(10, 10, 10)},
            {"axis2", "p"}, {"axis2_values", range(1000, 1000, 10)}};
  if (name == "n-p-large")
    return {{"theta", 0.5}, {"axis1", "n"}, {"axis1_values", range(100, 100, 10)},
            {"axis2", "p"}, {"axis2_values", range(10000, 10000, 10)}};
  throw UsageError("--preset must be desk, theta-p, n-p-small or n-p-large");
}

int cmd_phase_transition(const Settings& st) {
  const json s = st.resolve(phase_preset);
  GridSpec spec;
  spec.axis1 = {s.at("axis1").get<std::string>(), s.at("axis1_values").get<std::vector<double>>()};
  spec.axis2 = {s.at("axis2").get<std::string>(), s.at("axis2_values").get<std::vector<double>>()};
  spec.fixed = model_params(s);
  spec.trials = s.at("trials").get<std::size_t>();
  spec.cfg = solve_config(s);
  spec.base_seed = s.at("seed").get<std::uint64_t>();
  spec.success_threshold = s.at("threshold").get<double>();
  const GridResult res = run_phase_transition(spec, st.jobs());
  const fs::path out = prepare_out(st.out());
  res.to_csv().save((out / "phase_transition.csv").string());
  recovery_overlay(spec).save((out / "phase_transition_overlay.csv").string());
  write_manifest(out, "phase-transition", s,
                 {{"spec", to_json(spec)}, {"wall_seconds", res.wall_seconds}});
  res.to_csv().write(st.log());
  return 0;
}

int cmd_sweep(const Settings& st) {
  const json s = st.resolve();
  SweepSpec spec;
  spec.n = s.at("n").get<std::size_t>();
  spec.theta = s.at("theta").get<double>();
  spec.p_grid = s.at("p_grid").get<std::vector<std::size_t>>();
  spec.order_grid = s.at("orders").get<std::vector<int>>();
  spec.trials = s.at("trials").get<std::size_t>();
  spec.max_iters = s.at("max_iters").get<std::size_t>();
  spec.base_seed = s.at("seed").get<std::uint64_t>();
  const SweepResult res = run_2k_sweep(spec, st.jobs());
  const fs::path out = prepare_out(st.out());
  res.to_csv().save((out / "sweep_2k.csv").string());
  res.iterations_csv().save((out / "sweep_2k_iterations.csv").string());
  write_manifest(out, "sweep-2k", s, {{"spec", to_json(spec)}});
  res.to_csv().write(st.log());
  return 0;
}

int cmd_pga_table(const Settings& st) {
  const json s = st.resolve();
  PgaTableSpec spec;
  spec.n_grid = s.at("n_grid").get<std::vector<std::size_t>>();
  spec.alpha_grid.clear();
  for (const auto& a : s.at("alphas")) spec.alpha_grid.push_back(step_from(a));
  spec.tol = s.at("reach_tol").get<double>();
  spec.max_iters = s.at("max_iters").get<std::size_t>();
  spec.base_seed = s.at("seed").get<std::uint64_t>();
  const PgaTableResult res = run_pga_table(spec, st.jobs());
  const fs::path out = prepare_out(st.out());
  res.to_csv().save((out / "pga_table.csv").string());
  write_manifest(out, "pga-table", s, {{"spec", to_json(spec)}});
  res.to_csv().write(st.log());
  return 0;
}

int cmd_probe(const Settings& st) {
  const json s = st.resolve();
  Rng rng(s.at("seed").get<std::uint64_t>());
  const auto rows = concentration_probe(s.at("n").get<std::size_t>(), s.at("theta").get<double>(),
                                        s.at("p_grid").get<std::vector<std::size_t>>(),
                                        s.at("trials").get<std::size_t>(), rng);
  csv::Table tab({"p", "mean_deviation", "max_deviation", "scaling"});
  for (const auto& r : rows)
    tab.add_row({csv::number(r.p), csv::number(r.mean_deviation), csv::number(r.max_deviation),
                 csv::number(r.scaling)});
  const fs::path out = prepare_out(st.out());
  tab.save((out / "concentration.csv").string());
  write_manifest(out, "probe-concentration", s);
  tab.write(st.log());
  return 0;
}

int cmd_image_dict(const Settings& st) {
  const json s = st.resolve();
  const std::string path = s.at("images").get<std::string>();
  if (path.empty()) throw UsageError("image-dict: --images is required");
  const ImageSet images = load_idx_images(path);
  const std::size_t n = images.dim();
  const std::size_t topk = s.at("topk").get<std::size_t>();
  if (topk == 0 || topk > n) throw UsageError("image-dict: --topk must lie in [1, height*width]");

  const SolveTrace tr = learn_image_dictionary_trace(
      images, solve_config(s), s.at("seed").get<std::uint64_t>(), s.at("theta").get<double>());
  const Matrix y = images.data_matrix();
  const Matrix learned = tr.final_iterate.transpose().matrix();
  const PcaBasis pca = pca_basis(y, n);

  const fs::path out = prepare_out(st.out());
  save_matrix((out / "basis_msp.txt").string(), learned);
  save_matrix((out / "basis_pca.txt").string(), pca.components);
  csv::Table tab({"k", "msp_mse", "pca_mse"});
  for (std::size_t k = 1; k <= topk; ++k)
    tab.add_row({csv::number(k),
                 csv::number(reconstruct_topk(y, learned, BasisRanking::Energy, k).mse),
                 csv::number(reconstruct_topk(y, pca.components, BasisRanking::AsGiven, k).mse)});
  tab.save((out / "reconstruction.csv").string());
  write_manifest(out, "image-dict", s,
                 {{"images", images.count}, {"iters_used", tr.iters_used}, {"converged", tr.converged}});
  tab.write(st.log());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complete dictionary learning by l4-norm maximization (MSP)"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Settings>> owned;
  std::vector<std::pair<CLI::App*, std::function<int(const Settings&)>>> routes;
  auto sub = [&](const char* name, const char* help, std::function<int(const Settings&)> run) {
    CLI::App* a = app.add_subcommand(name, help);
    owned.push_back(std::make_unique<Settings>(a));
    routes.emplace_back(a, std::move(run));
    return owned.back().get();
  };

  Settings* gen = sub("generate", "draw D_o, X_o ~ BG(theta) and Y = D_o X_o", cmd_generate);
  add_model(*gen, 10, 1000, 0.3);

  Settings* solve = sub("solve", "learn an orthogonal dictionary from Y", cmd_solve);
  add_model(*solve, 10, 1000, 0.3);
  add_solver(*solve, 200);
  solve->add<std::string>("y", "", "observations Y (matrix text file); synthesized if omitted");
  solve->add<std::string>("dictionary", "", "ground-truth D_o for trace enrichment");
  solve->add_switch("precondition", "whiten Y before solving");

  sub("verify", "run the built-in invariant checks", cmd_verify);

  Settings* trace = sub("trace", "convergence traces over seeded trials", cmd_trace);
  add_model(*trace, 50, 20000, 0.3);
  add_solver(*trace, 30);
  trace->add<std::size_t>("trials", 10, "number of trials");
  trace->add_switch("orthogonal", "D_o = I without samples (deterministic objective)");

  Settings* pt = sub("phase-transition", "average error over a two-axis grid", cmd_phase_transition);
  add_model(*pt, 20, 20000, 0.3);
  add_solver(*pt, 100);
  pt->add<std::string>("axis1", "theta", "first axis: n, p or theta");
  pt->add<std::vector<double>>("axis1-values", {0.1, 0.3, 0.5, 0.7, 0.9}, "comma-separated");
  pt->add<std::string>("axis2", "p", "second axis: n, p or theta");
  pt->add<std::vector<double>>("axis2-values", {500, 2000, 20000}, "comma-separated");
  pt->add<std::size_t>("trials", 10, "trials per cell");
  pt->add<double>("threshold", 0.01, "success when error is below this");
  pt->add<std::string>("preset", "desk",
                       "desk, or a full-scale grid: theta-p (n=50), n-p-small, n-p-large");

  Settings* sw = sub("sweep-2k", "error and speed across objective orders 2k", cmd_sweep);
  sw->add<std::size_t>("n", 10, "dimension n");
  sw->add<double>("theta", 0.3, "sparsity level");
  sw->add<std::vector<double>>("p-grid", {1000, 5000, 20000}, "comma-separated sample sizes");
  sw->add<std::vector<int>>("orders", {4, 6, 8, 10}, "comma-separated even orders");
  sw->add<std::size_t>("trials", 5, "trials per cell");
  sw->add<std::size_t>("max-iters", 100, "iteration budget");

  Settings* pga = sub("pga-table", "iterations to converge per dimension and step size",
                      cmd_pga_table);
  pga->add<std::vector<double>>("n-grid", {5, 25, 50}, "comma-separated dimensions");
  pga->add<std::vector<std::string>>("alphas", {"1", "10", "100", "inf"}, "comma-separated steps");
  pga->add<double>("reach-tol", 1e-8, "count iterations until g_norm >= 1 - reach_tol");
  pga->add<std::size_t>("max-iters", 1000, "iteration budget");

  Settings* probe = sub("probe-concentration", "deviation of |WX|_4^4 from its mean", cmd_probe);
  probe->add<std::size_t>("n", 10, "dimension n");
  probe->add<double>("theta", 0.3, "sparsity level");
  probe->add<std::vector<double>>("p-grid", {1000, 10000, 100000}, "ascending sample sizes");
  probe->add<std::size_t>("trials", 20, "draws per p");

  Settings* img = sub("image-dict", "learn a dictionary from an IDX image file", cmd_image_dict);
  img->add<std::string>("images", "", "IDX image file (magic 0x803)");
  img->add<std::size_t>("topk", 5, "report reconstruction for k = 1..topk");
  img->add<double>("theta", 0.5, "sparsity used only to normalize the trace");
  add_solver(*img, 100);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (std::size_t k = 0; k < routes.size(); ++k)
      if (routes[k].first->parsed()) return routes[k].second(*owned[k]);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "usage error: bad setting type: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
