#include "mmlin/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace mmlin {

namespace {

std::string Num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

FunctionalTarget MakeTarget(const Sample& s, TargetKind kind) {
  switch (kind) {
    case TargetKind::kAte: return FunctionalTarget::Ate(s);
    case TargetKind::kAtt: return FunctionalTarget::Att(s);
    default: Fail(ErrorCode::kConfigError, "target must be ate or att");
  }
}

LipschitzClass MakeClass(const EstimateConfig& cfg, Index p) {
  if (cfg.a_diag.size() == 0) return LipschitzClass::Identity(cfg.lipschitz_c, p);
  return LipschitzClass(cfg.lipschitz_c, cfg.a_diag);
}

DeltaRule MakeRule(const EstimateConfig& cfg, double sigma_bar) {
  switch (cfg.delta_rule) {
    case DeltaMode::kFixed: return DeltaRule::Fixed(cfg.delta);
    case DeltaMode::kQuantile: return DeltaRule::Quantile(cfg.alpha, cfg.beta, sigma_bar);
    case DeltaMode::kRmse: return DeltaRule::Rmse(sigma_bar);
  }
  return DeltaRule::Fixed(cfg.delta);
}

}  // namespace

void ValidateConfig(const EstimateConfig& cfg, const Sample& sample) {
  if (!(cfg.lipschitz_c >= 0.0) || !std::isfinite(cfg.lipschitz_c))
    Fail(ErrorCode::kConfigError, "--lipschitz-c must be a finite value >= 0");
  if (cfg.a_diag.size() && cfg.a_diag.size() != sample.p())
    Fail(ErrorCode::kConfigError, "--a-diag has " + std::to_string(cfg.a_diag.size()) + " entries but the data has " +
                                      std::to_string(sample.p()) + " covariates");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) Fail(ErrorCode::kConfigError, "--alpha must lie in (0,1)");
  if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) Fail(ErrorCode::kConfigError, "--beta must lie in (0,1)");
  if (cfg.delta_rule == DeltaMode::kFixed && !(cfg.delta > 0.0 && std::isfinite(cfg.delta)))
    Fail(ErrorCode::kConfigError, "--delta must be positive");
  if (!std::isnan(cfg.sigma_bar) && !(cfg.sigma_bar > 0.0 && std::isfinite(cfg.sigma_bar)))
    Fail(ErrorCode::kConfigError, "--sigma-bar must be positive");
  if (cfg.target != TargetKind::kAte && cfg.target != TargetKind::kAtt)
    Fail(ErrorCode::kConfigError, "target must be ate or att");
  if (cfg.max_iterations < 1) Fail(ErrorCode::kConfigError, "--max-iterations must be >= 1");
  if (!sample.has_arms()) Fail(ErrorCode::kDataError, "the data needs a 0/1 column d for treatment effect targets");
}

EstimateOutput Estimate(const Sample& sample, const EstimateConfig& cfg) {
  ValidateConfig(cfg, sample);
  PreliminaryFit fit = FitRegression(sample, cfg.fit);
  return EstimateWithFit(sample, cfg, fit);
}

EstimateOutput EstimateWithFit(const Sample& sample, const EstimateConfig& cfg, const PreliminaryFit& fit) {
  ValidateConfig(cfg, sample);
  EstimateOutput out;
  out.n = sample.n();
  out.n1 = sample.count_arm(1);
  FunctionalTarget target = MakeTarget(sample, cfg.target);
  std::vector<std::string> flags;

  double sigma_bar = cfg.sigma_bar;
  if (std::isnan(sigma_bar)) {
    sigma_bar = std::sqrt(fit.residuals.squaredNorm() / static_cast<double>(sample.n()));
    if (!(sigma_bar > 0.0)) {
      sigma_bar = 1.0;
      flags.emplace_back("sigma_bar_defaulted_to_1");
    }
  }
  out.sigma_bar = sigma_bar;

  ModulusProblem problem =
      MakeModulusProblem(sample, target, MakeClass(cfg, sample.p()), 1.0, cfg.prune_1d && sample.p() == 1);
  ToleranceSpec tol;
  tol.max_iterations = cfg.max_iterations;
  ModulusSolver solver(problem, tol);
  DeltaResolution res = ResolveDelta(MakeRule(cfg, sigma_bar), solver);
  out.weights = res.weights;
  if (res.weights.ball_inactive) flags.emplace_back("ball_inactive");

  EstimateReport& r = out.report;
  r.psi_hat = PointEstimate(out.weights, sample.y());
  VarianceResult v = VarianceEstimate(out.weights, fit, target, sample, r.psi_hat);
  if (v.marginal_clamped) flags.emplace_back("marginal_variance_clamped");
  r.se = v.se;
  r.maxbias = std::max(out.weights.maxbias, 0.0);
  r.delta = res.delta;
  r.lipschitz_c = cfg.lipschitz_c;
  r.rule = DeltaModeName(cfg.delta_rule);
  r.flags = flags;
  ConfidenceIntervals(r, cfg.alpha, cfg.style);
  return out;
}

std::string ReportJson(const EstimateOutput& out, const EstimateConfig& cfg) {
  const EstimateReport& r = out.report;
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["target"] = TargetKindName(cfg.target);
  j["n"] = out.n;
  j["n1"] = out.n1;
  j["psi_hat"] = r.psi_hat;
  j["se"] = r.se;
  j["maxbias"] = r.maxbias;
  j["delta"] = r.delta;
  j["C"] = r.lipschitz_c;
  j["alpha"] = r.alpha;
  j["delta_rule"] = r.rule;
  j["sigma_bar"] = out.sigma_bar;
  j["ci_style"] = CiStyleName(r.style);
  j["ci_naive"] = {r.ci_naive.lo, r.ci_naive.hi};
  j["ci_biasaware"] = {r.ci_biasaware.lo, r.ci_biasaware.hi};
  j["ci_onesided_lower"] = r.ci_onesided_lower;
  j["omega"] = out.weights.omega;
  j["omega_prime"] = out.weights.omega_prime;
  j["flags"] = r.flags;
  return j.dump(2) + "\n";
}

std::string WeightsCsv(const Sample& sample, const WeightSet& w) {
  std::ostringstream os;
  os << "unit,d,k\n";
  for (Index i = 0; i < sample.n(); ++i) os << i + 1 << ',' << sample.arm(i) << ',' << Num(w.k[i]) << '\n';
  return os.str();
}

std::vector<double> ParseGridSpec(const std::string& spec) {
  double lo = 0.0, hi = 0.0;
  long steps = 0;
  char tail = 0;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%ld%c", &lo, &hi, &steps, &tail) != 3)
    Fail(ErrorCode::kConfigError, "grid must look like lo:hi:steps, got '" + spec + "'");
  if (steps < 1 || !std::isfinite(lo) || !std::isfinite(hi))
    Fail(ErrorCode::kConfigError, "grid '" + spec + "' needs finite ends and steps >= 1");
  if (steps > 1 && !(hi > lo)) Fail(ErrorCode::kConfigError, "grid '" + spec + "' must be increasing");
  std::vector<double> g(static_cast<std::size_t>(steps));
  for (long i = 0; i < steps; ++i)
    g[static_cast<std::size_t>(i)] = steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (steps - 1);
  return g;
}

std::vector<SweepRow> SweepC(const Sample& sample, const EstimateConfig& cfg, const std::vector<double>& c_grid) {
  if (c_grid.empty()) Fail(ErrorCode::kConfigError, "empty C grid");
  for (std::size_t i = 0; i < c_grid.size(); ++i) {
    if (!(c_grid[i] >= 0.0)) Fail(ErrorCode::kConfigError, "C grid values must be >= 0");
    if (i > 0 && !(c_grid[i] > c_grid[i - 1])) Fail(ErrorCode::kConfigError, "C grid must be increasing");
  }
  ValidateConfig(cfg, sample);
  PreliminaryFit fit = FitRegression(sample, cfg.fit);
  std::vector<SweepRow> rows(c_grid.size());
  auto run = [&](std::size_t i) {
    EstimateConfig c = cfg;
    c.lipschitz_c = c_grid[i];
    rows[i].C = c_grid[i];
    try {
      rows[i].report = EstimateWithFit(sample, c, fit).report;
      rows[i].ok = true;
    } catch (const Error& e) {
      rows[i].error = ErrorCodeName(e.code());
    }
  };
  const std::size_t threads = static_cast<std::size_t>(std::max(1, cfg.threads));
  if (threads == 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t]() {
        for (std::size_t i = t; i < rows.size(); i += threads) run(i);
      });
    for (auto& th : pool) th.join();
  }
  return rows;
}

std::string SweepCsv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "C,psi_hat,naive_lo,naive_hi,biasaware_lo,biasaware_hi,maxbias,se,delta,error\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : rows) {
    const EstimateReport& r = row.report;
    auto v = [&](double x) { return Num(row.ok ? x : nan); };
    os << Num(row.C) << ',' << v(r.psi_hat) << ',' << v(r.ci_naive.lo) << ',' << v(r.ci_naive.hi) << ','
       << v(r.ci_biasaware.lo) << ',' << v(r.ci_biasaware.hi) << ',' << v(r.maxbias) << ',' << v(r.se) << ','
       << v(r.delta) << ',' << row.error << '\n';
  }
  return os.str();
}

std::string SweepSvg(const std::vector<SweepRow>& rows) {
  constexpr double kW = 640, kH = 400, kL = 60, kR = 20, kT = 20, kB = 40;
  std::vector<const SweepRow*> ok;
  for (const auto& r : rows)
    if (r.ok) ok.push_back(&r);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  if (ok.empty()) {
    os << "</svg>\n";
    return os.str();
  }
  double x0 = ok.front()->C, x1 = ok.back()->C;
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (const auto* r : ok) {
    y0 = std::min({y0, r->report.ci_biasaware.lo, r->report.ci_naive.lo});
    y1 = std::max({y1, r->report.ci_biasaware.hi, r->report.ci_naive.hi});
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); };
  auto py = [&](double y) { return kH - kB - (y - y0) / (y1 - y0) * (kH - kT - kB); };
  auto band = [&](auto lo, auto hi, const char* fill) {
    os << "<polygon fill=\"" << fill << "\" stroke=\"none\" points=\"";
    for (const auto* r : ok) os << Num(px(r->C)) << ',' << Num(py(hi(r))) << ' ';
    for (auto it = ok.rbegin(); it != ok.rend(); ++it) os << Num(px((*it)->C)) << ',' << Num(py(lo(*it))) << ' ';
    os << "\"/>\n";
  };
  band([](const SweepRow* r) { return r->report.ci_biasaware.lo; },
       [](const SweepRow* r) { return r->report.ci_biasaware.hi; }, "#c6dbef");
  band([](const SweepRow* r) { return r->report.ci_naive.lo; },
       [](const SweepRow* r) { return r->report.ci_naive.hi; }, "#6baed6");
  os << "<polyline fill=\"none\" stroke=\"#08306b\" stroke-width=\"2\" points=\"";
  for (const auto* r : ok) os << Num(px(r->C)) << ',' << Num(py(r->report.psi_hat)) << ' ';
  os << "\"/>\n";
  // Axes with end labels.
  os << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\"" << kH - kB
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kL << "\" y=\"" << kH - kB + 16 << "\" font-size=\"11\">" << Num(x0) << "</text>\n";
  os << "<text x=\"" << kW - kR << "\" y=\"" << kH - kB + 16 << "\" font-size=\"11\" text-anchor=\"end\">" << Num(x1)
     << "</text>\n";
  os << "<text x=\"" << (kW + kL) / 2 << "\" y=\"" << kH - 6 << "\" font-size=\"12\" text-anchor=\"middle\">C</text>\n";
  os << "<text x=\"" << kL - 4 << "\" y=\"" << kH - kB << "\" font-size=\"11\" text-anchor=\"end\">" << Num(y0)
     << "</text>\n";
  os << "<text x=\"" << kL - 4 << "\" y=\"" << kT + 10 << "\" font-size=\"11\" text-anchor=\"end\">" << Num(y1)
     << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::vector<CurvePoint> ModulusCurve(const Sample& sample, const EstimateConfig& cfg, const std::vector<double>& deltas) {
  ValidateConfig(cfg, sample);
  FunctionalTarget target = MakeTarget(sample, cfg.target);
  ModulusProblem problem =
      MakeModulusProblem(sample, target, MakeClass(cfg, sample.p()), 1.0, cfg.prune_1d && sample.p() == 1);
  ToleranceSpec tol;
  tol.max_iterations = cfg.max_iterations;
  return OmegaCurve(problem, deltas, tol);
}

std::string CurveCsv(const std::vector<CurvePoint>& pts) {
  std::ostringstream os;
  os << "delta,omega,omega_prime,mu,kkt_primal,kkt_stationarity\n";
  for (const auto& p : pts)
    os << Num(p.delta) << ',' << Num(p.omega) << ',' << Num(p.omega_prime) << ',' << Num(p.mu) << ','
       << Num(p.kkt_primal) << ',' << Num(p.kkt_stationarity) << '\n';
  return os.str();
}

}  // namespace mmlin
