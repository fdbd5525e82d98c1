// Command-line front end. Talks to the library only through mmlin.h.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mmlin/mmlin.h"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kInput = 2, kSolver = 3, kConfig = 4 };

struct Failure {
  int exit_code;
  std::string message;
};

int ExitFor(mmlin_status s) {
  switch (s) {
    case MMLIN_OK: return kOk;
    case MMLIN_INVALID_ARGUMENT:
    case MMLIN_DATA_ERROR:
    case MMLIN_MISSING_ARM:
    case MMLIN_IO_ERROR: return kInput;
    case MMLIN_CONFIG_ERROR:
    case MMLIN_INVALID_DELTA:
    case MMLIN_INVALID_RULE:
    case MMLIN_INVALID_PRUNING:
    case MMLIN_INVALID_VARIANCE: return kConfig;
    default: return kSolver;
  }
}

void Check(mmlin_status s) {
  if (s != MMLIN_OK)
    throw Failure{ExitFor(s), std::string(mmlin_status_name(s)) + ": " + mmlin_last_error()};
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() { Free(p); }
};

std::string Take(char* s) {
  std::string out(s ? s : "");
  mmlin_string_free(s);
  return out;
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Failure{kInput, "cannot write " + path.string()};
  f << text;
  if (!f) throw Failure{kInput, "write failed for " + path.string()};
}

fs::path OutDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kInput, "cannot create output directory " + dir + ": " + ec.message()};
  return fs::path(dir);
}

std::vector<double> ParseList(const std::string& text, const char* flag) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Failure{kConfig, std::string(flag) + ": cannot parse '" + item + "'"};
    }
  }
  if (v.empty()) throw Failure{kConfig, std::string(flag) + " is empty"};
  return v;
}

std::vector<double> Grid(const std::string& spec) {
  double* values = nullptr;
  std::size_t count = 0;
  Check(mmlin_parse_grid(spec.c_str(), &values, &count));
  std::vector<double> g(values, values + count);
  mmlin_array_free(values);
  return g;
}

// Options shared by the data-driven subcommands.
struct DataOptions {
  std::string data;
  std::string target = "att";
  double lipschitz_c = 1.0;
  std::string a_diag;
  std::string delta_rule = "rmse";
  double delta = 2.0;
  double alpha = 0.05;
  double beta = 0.99;
  double sigma_bar = 0.0;
  std::string ci_style = "folded";
  std::string fit = "lc";
  int fit_k = 1;
  int max_iterations = 100000;

  std::vector<double> a_values;

  void add_to(CLI::App* app, bool full) {
    app->add_option("--data", data, "Input CSV (y[,d],x1..xp)")->required();
    app->add_option("--target", target, "Estimand")->check(CLI::IsMember({"ate", "att"}));
    app->add_option("--lipschitz-c", lipschitz_c, "Lipschitz constant C");
    app->add_option("--a-diag", a_diag, "Diagonal metric weights v1,v2,...");
    app->add_option("--max-iterations", max_iterations, "Interior-point iteration budget");
    if (!full) return;
    app->add_option("--delta-rule", delta_rule, "How delta is chosen")
        ->check(CLI::IsMember({"fixed", "quantile", "rmse"}));
    app->add_option("--delta", delta, "Delta for the fixed rule");
    app->add_option("--alpha", alpha, "CI level is 1 - alpha");
    app->add_option("--beta", beta, "Quantile for the quantile rule");
    app->add_option("--sigma-bar", sigma_bar, "Noise scale for the delta rules (default: from the preliminary fit)");
    app->add_option("--ci-style", ci_style, "Bias-aware interval")->check(CLI::IsMember({"folded", "additive"}));
    app->add_option("--fit", fit, "Preliminary regression: lc (local constant, LSCV) or nn")
        ->check(CLI::IsMember({"lc", "nn"}));
    app->add_option("--fit-k", fit_k, "Neighbours for --fit nn");
  }

  mmlin_estimate_options options(int threads) {
    mmlin_estimate_options o;
    mmlin_estimate_options_init(&o);
    o.target = target == "ate" ? MMLIN_TARGET_ATE : MMLIN_TARGET_ATT;
    o.lipschitz_c = lipschitz_c;
    if (!a_diag.empty()) {
      a_values = ParseList(a_diag, "--a-diag");
      o.a_diag = a_values.data();
      o.a_diag_len = a_values.size();
    }
    o.delta_rule = delta_rule == "fixed" ? MMLIN_DELTA_FIXED
                   : delta_rule == "quantile" ? MMLIN_DELTA_QUANTILE
                                              : MMLIN_DELTA_RMSE;
    o.delta = delta;
    o.alpha = alpha;
    o.beta = beta;
    o.sigma_bar = sigma_bar > 0.0 ? sigma_bar : std::nan("");
    if (sigma_bar < 0.0) throw Failure{kConfig, "--sigma-bar must be positive"};
    o.ci_style = ci_style == "additive" ? MMLIN_CI_ADDITIVE : MMLIN_CI_FOLDED_NORMAL;
    o.fit_method = fit == "nn" ? MMLIN_FIT_NEAREST_NEIGHBOR : MMLIN_FIT_LOCAL_CONSTANT;
    o.fit_k = fit_k;
    o.threads = threads;
    o.max_iterations = max_iterations;
    return o;
  }
};

Handle<mmlin_sample, mmlin_sample_free> LoadSample(const std::string& path) {
  if (!fs::exists(path)) throw Failure{kInput, "data file not found: " + path};
  Handle<mmlin_sample, mmlin_sample_free> s;
  Check(mmlin_sample_read_csv(path.c_str(), &s.p));
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimax linear estimation with worst-case bias and bias-aware confidence intervals"};
  app.set_config("--config", "", "Key = value config file; command-line flags take precedence");
  app.require_subcommand(1);

  std::string out_dir = ".";
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool svg = false;
  bool weights_csv = false;
  std::string c_grid;
  std::string delta_grid = "0.05:5:40";
  std::vector<int> cases{1};
  std::vector<std::int64_t> ns{100};
  std::vector<double> sim_cs{2.0};
  int reps = 500;
  std::uint64_t seed = 1;
  double noise_sd = 0.5;
  double delta_star = 2.0;
  bool no_augmented = false;
  bool no_coverage = false;

  DataOptions est, sweep, curve;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--threads", threads, "Worker threads (1 = serial)")->check(CLI::PositiveNumber);
  };

  CLI::App* c_est = app.add_subcommand("estimate", "Point estimate, standard error, maxbias and intervals");
  est.add_to(c_est, true);
  add_common(c_est);
  c_est->add_flag("--weights-csv", weights_csv, "Also write weights.csv (unit,d,k)");

  CLI::App* c_sweep = app.add_subcommand("sweep-c", "Estimates and intervals over a grid of C");
  sweep.add_to(c_sweep, true);
  add_common(c_sweep);
  c_sweep->add_option("--c-grid", c_grid, "lo:hi:steps")->required();
  c_sweep->add_flag("--svg", svg, "Also write sweep_c.svg");

  CLI::App* c_sim = app.add_subcommand("simulate", "Monte Carlo study on the built-in designs");
  add_common(c_sim);
  c_sim->add_option("--case", cases, "Design number(s), 1..5")->delimiter(',')->check(CLI::Range(1, 5));
  c_sim->add_option("--n", ns, "Sample size(s)")->delimiter(',');
  c_sim->add_option("--lipschitz-c", sim_cs, "Lipschitz constant(s)")->delimiter(',');
  c_sim->add_option("--c-grid", c_grid, "lo:hi:steps, replaces --lipschitz-c");
  c_sim->add_option("--reps", reps, "Replications per cell")->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", seed, "Base seed");
  c_sim->add_option("--noise-sd", noise_sd, "Outcome noise sd (also the sigma-bar of the RMSE rule)");
  c_sim->add_option("--delta-star", delta_star, "Fixed delta column");
  c_sim->add_flag("--no-augmented", no_augmented, "Skip the augmented estimator");
  c_sim->add_flag("--no-coverage", no_coverage, "Skip standard errors and coverage");

  CLI::App* c_curve = app.add_subcommand("modulus-curve", "omega(delta) and its derivative on a delta grid");
  curve.add_to(c_curve, false);
  add_common(c_curve);
  c_curve->add_option("--delta-grid", delta_grid, "lo:hi:steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kConfig;
  }

  try {
    if (c_est->parsed()) {
      auto s = LoadSample(est.data);
      mmlin_estimate_options o = est.options(threads);
      Handle<mmlin_estimate, mmlin_estimate_free> e;
      Check(mmlin_estimate_run(s.p, &o, &e.p));
      char* json = nullptr;
      Check(mmlin_estimate_report_json(e.p, &json));
      std::string report = Take(json);
      fs::path dir = OutDir(out_dir);
      WriteFile(dir / "report.json", report);
      if (weights_csv) {
        char* csv = nullptr;
        Check(mmlin_estimate_weights_csv(e.p, &csv));
        WriteFile(dir / "weights.csv", Take(csv));
      }
      std::cout << report;
    } else if (c_sweep->parsed()) {
      auto s = LoadSample(sweep.data);
      mmlin_estimate_options o = sweep.options(threads);
      std::vector<double> grid = Grid(c_grid);
      Handle<mmlin_sweep, mmlin_sweep_free> w;
      Check(mmlin_sweep_c(s.p, &o, grid.data(), grid.size(), &w.p));
      char* csv = nullptr;
      Check(mmlin_sweep_csv(w.p, &csv));
      fs::path dir = OutDir(out_dir);
      WriteFile(dir / "sweep_c.csv", Take(csv));
      if (svg) {
        char* text = nullptr;
        Check(mmlin_sweep_svg(w.p, &text));
        WriteFile(dir / "sweep_c.svg", Take(text));
      }
      if (std::size_t bad = mmlin_sweep_failed_rows(w.p))
        std::cerr << "warning: " << bad << " C value(s) failed; see the error column\n";
    } else if (c_sim->parsed()) {
      if (!c_grid.empty()) sim_cs = Grid(c_grid);
      for (auto n : ns)
        if (n < 2) throw Failure{kConfig, "--n must be >= 2"};
      mmlin_sim_options o;
      mmlin_sim_options_init(&o);
      o.cases = cases.data();
      o.n_cases = cases.size();
      o.n_grid = ns.data();
      o.n_n = ns.size();
      o.c_grid = sim_cs.data();
      o.n_c = sim_cs.size();
      o.reps = reps;
      o.seed = seed;
      o.threads = threads;
      o.noise_sd = noise_sd;
      o.delta_star = delta_star;
      o.augmented = no_augmented ? 0 : 1;
      o.coverage = no_coverage ? 0 : 1;
      auto t0 = std::chrono::steady_clock::now();
      Handle<mmlin_sim, mmlin_sim_free> r;
      Check(mmlin_simulate(&o, &r.p));
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      fs::path dir = OutDir(out_dir);
      char* text = nullptr;
      Check(mmlin_sim_panel_csv(r.p, &text));
      std::string panel = Take(text);
      WriteFile(dir / "panel.csv", panel);
      Check(mmlin_sim_augmented_csv(r.p, &text));
      WriteFile(dir / "augmented.csv", Take(text));
      Check(mmlin_sim_reps_csv(r.p, &text));
      WriteFile(dir / "reps.csv", Take(text));
      // Wall clock goes to stderr so the written files stay reproducible.
      std::cerr << "simulate: " << reps << " reps per cell, " << threads << " thread(s), " << secs << " s\n";
      std::cout << panel;
    } else if (c_curve->parsed()) {
      auto s = LoadSample(curve.data);
      mmlin_estimate_options o = curve.options(threads);
      std::vector<double> grid = Grid(delta_grid);
      Handle<mmlin_curve, mmlin_curve_free> c;
      Check(mmlin_modulus_curve(s.p, &o, grid.data(), grid.size(), &c.p));
      char* csv = nullptr;
      Check(mmlin_curve_csv(c.p, &csv));
      WriteFile(OutDir(out_dir) / "modulus_curve.csv", Take(csv));
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.exit_code;
  }
  return kOk;
}
