#include "mmlin/mmlin.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "mmlin/pipeline.hpp"
#include "mmlin/simlab.hpp"

struct mmlin_sample {
  mmlin::Sample sample;
};

struct mmlin_estimate {
  mmlin::Sample sample;
  mmlin::EstimateConfig config;
  mmlin::EstimateOutput out;
};

struct mmlin_sweep {
  std::vector<mmlin::SweepRow> rows;
};

struct mmlin_curve {
  std::vector<mmlin::CurvePoint> points;
};

struct mmlin_sim {
  mmlin::SimResult result;
};

namespace {

thread_local std::string g_last_error;

template <class F>
mmlin_status Guard(F&& f) {
  try {
    g_last_error.clear();
    f();
    return MMLIN_OK;
  } catch (const mmlin::Error& e) {
    g_last_error = e.what();
    return static_cast<mmlin_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return MMLIN_INTERNAL_ERROR;
}

void Require(bool ok, const char* what) {
  if (!ok) mmlin::Fail(mmlin::ErrorCode::kInvalidArgument, what);
}

char* Dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

mmlin::EstimateConfig ToConfig(const mmlin_estimate_options* o) {
  mmlin::EstimateConfig c;
  switch (o->target) {
    case MMLIN_TARGET_ATE: c.target = mmlin::TargetKind::kAte; break;
    case MMLIN_TARGET_ATT: c.target = mmlin::TargetKind::kAtt; break;
    default: mmlin::Fail(mmlin::ErrorCode::kConfigError, "unknown target");
  }
  c.lipschitz_c = o->lipschitz_c;
  if (o->a_diag && o->a_diag_len)
    c.a_diag = Eigen::Map<const Eigen::VectorXd>(o->a_diag, static_cast<Eigen::Index>(o->a_diag_len));
  switch (o->delta_rule) {
    case MMLIN_DELTA_FIXED: c.delta_rule = mmlin::DeltaMode::kFixed; break;
    case MMLIN_DELTA_QUANTILE: c.delta_rule = mmlin::DeltaMode::kQuantile; break;
    case MMLIN_DELTA_RMSE: c.delta_rule = mmlin::DeltaMode::kRmse; break;
    default: mmlin::Fail(mmlin::ErrorCode::kConfigError, "unknown delta rule");
  }
  c.delta = o->delta;
  c.alpha = o->alpha;
  c.beta = o->beta;
  c.sigma_bar = o->sigma_bar > 0.0 ? o->sigma_bar : std::nan("");
  c.style = o->ci_style == MMLIN_CI_ADDITIVE ? mmlin::CiStyle::kAdditive : mmlin::CiStyle::kFoldedNormal;
  c.fit.method = o->fit_method == MMLIN_FIT_NEAREST_NEIGHBOR ? mmlin::FitMethod::kNearestNeighbor
                                                             : mmlin::FitMethod::kLocalConstant;
  c.fit.k = o->fit_k;
  if (c.fit.k < 1) mmlin::Fail(mmlin::ErrorCode::kConfigError, "nearest-neighbour k must be >= 1");
  c.threads = o->threads;
  c.max_iterations = o->max_iterations;
  return c;
}

}  // namespace

extern "C" {

const char* mmlin_last_error(void) { return g_last_error.c_str(); }

const char* mmlin_status_name(mmlin_status status) {
  if (status == MMLIN_OK) return "ok";
  if (status == MMLIN_INTERNAL_ERROR) return "internal_error";
  return mmlin::ErrorCodeName(static_cast<mmlin::ErrorCode>(status));
}

const char* mmlin_version(void) { return "1.0.0"; }

void mmlin_string_free(char* s) { std::free(s); }
void mmlin_array_free(double* a) { std::free(a); }

mmlin_status mmlin_sample_read_csv(const char* path, mmlin_sample** out) {
  return Guard([&] {
    Require(path && out, "null argument");
    *out = new mmlin_sample{mmlin::ReadSampleCsv(path)};
  });
}

mmlin_status mmlin_sample_from_arrays(size_t n, size_t p, const double* y, const int* d, const double* x,
                                      mmlin_sample** out) {
  return Guard([&] {
    Require(y && out && (x || p == 0), "null argument");
    const auto ni = static_cast<Eigen::Index>(n), pi = static_cast<Eigen::Index>(p);
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y, ni);
    Eigen::MatrixXd xm(ni, pi);
    for (Eigen::Index i = 0; i < ni; ++i)
      for (Eigen::Index j = 0; j < pi; ++j) xm(i, j) = x[i * pi + j];
    std::optional<std::vector<int>> dv;
    if (d) dv = std::vector<int>(d, d + n);
    *out = new mmlin_sample{mmlin::Sample(std::move(yv), std::move(dv), std::move(xm))};
  });
}

void mmlin_sample_free(mmlin_sample* s) { delete s; }
size_t mmlin_sample_n(const mmlin_sample* s) { return s ? static_cast<size_t>(s->sample.n()) : 0; }
size_t mmlin_sample_p(const mmlin_sample* s) { return s ? static_cast<size_t>(s->sample.p()) : 0; }

void mmlin_estimate_options_init(mmlin_estimate_options* o) {
  if (!o) return;
  o->target = MMLIN_TARGET_ATT;
  o->lipschitz_c = 1.0;
  o->a_diag = nullptr;
  o->a_diag_len = 0;
  o->delta_rule = MMLIN_DELTA_RMSE;
  o->delta = 2.0;
  o->alpha = 0.05;
  o->beta = 0.99;
  o->sigma_bar = std::nan("");
  o->ci_style = MMLIN_CI_FOLDED_NORMAL;
  o->fit_method = MMLIN_FIT_LOCAL_CONSTANT;
  o->fit_k = 1;
  o->threads = 1;
  o->max_iterations = 100000;
}

mmlin_status mmlin_estimate_run(const mmlin_sample* s, const mmlin_estimate_options* opts, mmlin_estimate** out) {
  return Guard([&] {
    Require(s && opts && out, "null argument");
    auto e = std::make_unique<mmlin_estimate>(mmlin_estimate{s->sample, ToConfig(opts), {}});
    e->out = mmlin::Estimate(e->sample, e->config);
    *out = e.release();
  });
}

void mmlin_estimate_free(mmlin_estimate* e) { delete e; }
double mmlin_estimate_psi_hat(const mmlin_estimate* e) { return e ? e->out.report.psi_hat : std::nan(""); }
double mmlin_estimate_se(const mmlin_estimate* e) { return e ? e->out.report.se : std::nan(""); }
double mmlin_estimate_maxbias(const mmlin_estimate* e) { return e ? e->out.report.maxbias : std::nan(""); }
double mmlin_estimate_delta(const mmlin_estimate* e) { return e ? e->out.report.delta : std::nan(""); }

size_t mmlin_estimate_weights(const mmlin_estimate* e, double* k, size_t len) {
  if (!e || !k) return 0;
  size_t m = std::min(len, static_cast<size_t>(e->out.weights.k.size()));
  for (size_t i = 0; i < m; ++i) k[i] = e->out.weights.k[static_cast<Eigen::Index>(i)];
  return m;
}

mmlin_status mmlin_estimate_report_json(const mmlin_estimate* e, char** out) {
  return Guard([&] {
    Require(e && out, "null argument");
    *out = Dup(mmlin::ReportJson(e->out, e->config));
  });
}

mmlin_status mmlin_estimate_weights_csv(const mmlin_estimate* e, char** out) {
  return Guard([&] {
    Require(e && out, "null argument");
    *out = Dup(mmlin::WeightsCsv(e->sample, e->out.weights));
  });
}

mmlin_status mmlin_parse_grid(const char* spec, double** values, size_t* count) {
  return Guard([&] {
    Require(spec && values && count, "null argument");
    std::vector<double> g = mmlin::ParseGridSpec(spec);
    auto* a = static_cast<double*>(std::malloc(g.size() * sizeof(double)));
    if (!a) throw std::bad_alloc();
    std::copy(g.begin(), g.end(), a);
    *values = a;
    *count = g.size();
  });
}

mmlin_status mmlin_sweep_c(const mmlin_sample* s, const mmlin_estimate_options* opts, const double* c_grid,
                           size_t count, mmlin_sweep** out) {
  return Guard([&] {
    Require(s && opts && out && (c_grid || count == 0), "null argument");
    std::vector<double> grid(c_grid, c_grid + count);
    *out = new mmlin_sweep{mmlin::SweepC(s->sample, ToConfig(opts), grid)};
  });
}

void mmlin_sweep_free(mmlin_sweep* w) { delete w; }

size_t mmlin_sweep_failed_rows(const mmlin_sweep* w) {
  if (!w) return 0;
  size_t bad = 0;
  for (const auto& r : w->rows) bad += r.ok ? 0 : 1;
  return bad;
}

mmlin_status mmlin_sweep_csv(const mmlin_sweep* w, char** out) {
  return Guard([&] {
    Require(w && out, "null argument");
    *out = Dup(mmlin::SweepCsv(w->rows));
  });
}

mmlin_status mmlin_sweep_svg(const mmlin_sweep* w, char** out) {
  return Guard([&] {
    Require(w && out, "null argument");
    *out = Dup(mmlin::SweepSvg(w->rows));
  });
}

mmlin_status mmlin_modulus_curve(const mmlin_sample* s, const mmlin_estimate_options* opts, const double* deltas,
                                 size_t count, mmlin_curve** out) {
  return Guard([&] {
    Require(s && opts && out && (deltas || count == 0), "null argument");
    std::vector<double> grid(deltas, deltas + count);
    *out = new mmlin_curve{mmlin::ModulusCurve(s->sample, ToConfig(opts), grid)};
  });
}

void mmlin_curve_free(mmlin_curve* c) { delete c; }

mmlin_status mmlin_curve_csv(const mmlin_curve* c, char** out) {
  return Guard([&] {
    Require(c && out, "null argument");
    *out = Dup(mmlin::CurveCsv(c->points));
  });
}

void mmlin_sim_options_init(mmlin_sim_options* o) {
  if (!o) return;
  static const int kCases[] = {1};
  static const int64_t kN[] = {100};
  static const double kC[] = {2.0};
  o->cases = kCases;
  o->n_cases = 1;
  o->n_grid = kN;
  o->n_n = 1;
  o->c_grid = kC;
  o->n_c = 1;
  o->reps = 500;
  o->seed = 1;
  o->threads = 1;
  o->noise_sd = 0.5;
  o->delta_star = 2.0;
  o->alpha = 0.05;
  o->augmented = 1;
  o->coverage = 1;
  o->fit_method = MMLIN_FIT_LOCAL_CONSTANT;
}

mmlin_status mmlin_simulate(const mmlin_sim_options* o, mmlin_sim** out) {
  return Guard([&] {
    Require(o && out && o->cases && o->n_grid && o->c_grid, "null argument");
    mmlin::SimConfig c;
    c.cases.assign(o->cases, o->cases + o->n_cases);
    c.n_grid.assign(o->n_grid, o->n_grid + o->n_n);
    c.c_grid.assign(o->c_grid, o->c_grid + o->n_c);
    c.reps = o->reps;
    c.base_seed = o->seed;
    c.threads = o->threads;
    c.noise_sd = o->noise_sd;
    c.delta_star = o->delta_star;
    c.alpha = o->alpha;
    c.augmented = o->augmented != 0;
    c.coverage = o->coverage != 0;
    c.fit.method = o->fit_method == MMLIN_FIT_NEAREST_NEIGHBOR ? mmlin::FitMethod::kNearestNeighbor
                                                               : mmlin::FitMethod::kLocalConstant;
    *out = new mmlin_sim{mmlin::RunMonteCarlo(c)};
  });
}

void mmlin_sim_free(mmlin_sim* r) { delete r; }

mmlin_status mmlin_sim_panel_csv(const mmlin_sim* r, char** out) {
  return Guard([&] {
    Require(r && out, "null argument");
    *out = Dup(mmlin::PanelCsv(r->result));
  });
}

mmlin_status mmlin_sim_augmented_csv(const mmlin_sim* r, char** out) {
  return Guard([&] {
    Require(r && out, "null argument");
    *out = Dup(mmlin::AugmentedCsv(r->result));
  });
}

mmlin_status mmlin_sim_reps_csv(const mmlin_sim* r, char** out) {
  return Guard([&] {
    Require(r && out, "null argument");
    *out = Dup(mmlin::RepsCsv(r->result));
  });
}

}  // extern "C"
