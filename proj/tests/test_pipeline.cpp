#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "mmlin/pipeline.hpp"
#include "support.hpp"

using namespace mmlin;
using mmlin::testing::RandomSample;

namespace {

Sample Synthetic(std::uint64_t seed, Index n, Index p) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 0.5);
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  std::vector<int> d(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Index j = 0; j < p; ++j) {
      x(i, j) = u(rng);
      s += x(i, j);
    }
    d[static_cast<std::size_t>(i)] = u(rng) < 1.0 / (1.0 + std::exp(-(x(i, 0) - 0.5))) ? 1 : 0;
    y[i] = std::sin(s) + 0.5 * d[static_cast<std::size_t>(i)] + z(rng);
  }
  return Sample(y, d, x);
}

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("grid specs") {
  auto g = ParseGridSpec("0:2:5");
  REQUIRE(g.size() == 5);
  CHECK(g[1] == doctest::Approx(0.5));
  CHECK(g.back() == 2.0);
  CHECK(ParseGridSpec("1.5:9:1") == std::vector<double>{1.5});
  for (const char* bad : {"", "1:2", "2:1:3", "a:b:c", "0:1:0", "0:1:2:3"})
    CHECK(CodeOf([&] { ParseGridSpec(bad); }) == ErrorCode::kConfigError);
}

TEST_CASE("two-unit toy at C = 0") {
  Sample s = ParseSampleCsv("y,d,x1\n3.25,1,0.1\n1.0,0,0.8\n");
  EstimateConfig cfg;
  cfg.lipschitz_c = 0.0;
  EstimateOutput out = Estimate(s, cfg);
  CHECK(out.report.psi_hat == doctest::Approx(2.25).epsilon(1e-9));
  CHECK(std::abs(out.report.maxbias) < 1e-9);
  CHECK(out.n1 == 1);
  CHECK(std::find(out.report.flags.begin(), out.report.flags.end(), "sigma_bar_defaulted_to_1") !=
        out.report.flags.end());
}

TEST_CASE("config validation") {
  Sample s = Synthetic(1, 30, 2);
  auto code = [&](auto mutate) {
    EstimateConfig cfg;
    mutate(cfg);
    return CodeOf([&] { ValidateConfig(cfg, s); });
  };
  CHECK(code([](EstimateConfig& c) { c.alpha = 1.5; }) == ErrorCode::kConfigError);
  CHECK(code([](EstimateConfig& c) { c.lipschitz_c = -1; }) == ErrorCode::kConfigError);
  CHECK(code([](EstimateConfig& c) { c.a_diag = Eigen::VectorXd::Ones(3); }) == ErrorCode::kConfigError);
  CHECK(code([](EstimateConfig& c) { c.sigma_bar = -2; }) == ErrorCode::kConfigError);
  Sample nod = ParseSampleCsv("y,x1\n1,0\n2,1\n");
  CHECK(CodeOf([&] { ValidateConfig(EstimateConfig{}, nod); }) == ErrorCode::kDataError);
}

TEST_CASE("report json") {
  Sample s = Synthetic(2, 60, 1);
  EstimateConfig cfg;
  cfg.lipschitz_c = 1.0;
  EstimateOutput out = Estimate(s, cfg);
  auto j = nlohmann::json::parse(ReportJson(out, cfg));
  CHECK(j["schema_version"] == kReportSchemaVersion);
  CHECK(j["target"] == "att");
  CHECK(j["n"] == 60);
  CHECK(j["psi_hat"].get<double>() == doctest::Approx(out.report.psi_hat));
  CHECK(j["ci_biasaware"].size() == 2);
  CHECK(j.contains("flags"));
  std::string w = WeightsCsv(s, out.weights);
  CHECK(w.rfind("unit,d,k\n", 0) == 0);
  CHECK(std::count(w.begin(), w.end(), '\n') == 61);
}

TEST_CASE("C sweep") {
  Sample s = Synthetic(3, 80, 1);
  EstimateConfig cfg;
  cfg.threads = 2;
  std::vector<double> grid{0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
  auto rows = SweepC(s, cfg, grid);
  REQUIRE(rows.size() == grid.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(rows[i].ok);
    if (i) CHECK(rows[i].report.maxbias >= rows[i - 1].report.maxbias - 1e-7);
  }
  double m1 = 0.0, m0 = 0.0;
  for (Index i = 0; i < s.n(); ++i) (s.arm(i) ? m1 : m0) += s.y()[i];
  CHECK(rows[0].report.psi_hat == doctest::Approx(m1 / s.count_arm(1) - m0 / s.count_arm(0)).epsilon(1e-9));

  EstimateConfig c0 = cfg;
  c0.lipschitz_c = 0.0;
  CHECK(Estimate(s, c0).report.psi_hat == doctest::Approx(rows[0].report.psi_hat).epsilon(1e-12));

  std::string csv = SweepCsv(rows);
  CHECK(csv.rfind("C,psi_hat,naive_lo,naive_hi,biasaware_lo,biasaware_hi,maxbias", 0) == 0);
  std::string svg = SweepSvg(rows);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("<polygon") != std::string::npos);

  // Per-C solver failures are recorded in their rows.
  cfg.max_iterations = 1;
  auto broken = SweepC(s, cfg, {1.0, 2.0});
  for (const auto& r : broken) {
    CHECK_FALSE(r.ok);
    CHECK(r.error == "SolverStalled");
  }
  CHECK(SweepCsv(broken).find("SolverStalled") != std::string::npos);
  cfg.max_iterations = 100000;
  cfg.a_diag = Eigen::VectorXd::Ones(2);
  CHECK(CodeOf([&] { SweepC(s, cfg, {1.0}); }) == ErrorCode::kConfigError);
}

TEST_CASE("multi-covariate sweep is sensitive to C") {
  // With several continuous covariates the worst-case bias grows about
  // linearly in C; 1% slack covers the delta re-selection at each C.
  Sample s = Synthetic(4, 150, 4);
  auto rows = SweepC(s, EstimateConfig{}, {1.0, 2.0});
  REQUIRE(rows[0].ok);
  REQUIRE(rows[1].ok);
  CHECK(rows[1].report.maxbias > 0.99 * 2.0 * rows[0].report.maxbias);
}

TEST_CASE("negligible bias leaves intervals unchanged") {
  Sample s = Synthetic(5, 400, 1);
  auto rows = SweepC(s, EstimateConfig{}, {0.0, 0.01, 0.02, 0.05});
  int checked = 0;
  for (const auto& r : rows) {
    REQUIRE(r.ok);
    if (r.report.maxbias / r.report.se >= 0.05) continue;
    ++checked;
    const double hn = (r.report.ci_naive.hi - r.report.ci_naive.lo) / 2;
    const double hb = (r.report.ci_biasaware.hi - r.report.ci_biasaware.lo) / 2;
    CHECK(std::abs(hb - hn) < 0.05 * hn);
  }
  CHECK(checked >= 2);
}

TEST_CASE("modulus curve rows") {
  Sample s = Synthetic(6, 25, 1);
  EstimateConfig cfg;
  cfg.lipschitz_c = 0.0;
  auto pts = ModulusCurve(s, cfg, ParseGridSpec("0.5:2:4"));
  REQUIRE(pts.size() == 4);
  const double r = std::sqrt(1.0 / s.count_arm(1) + 1.0 / s.count_arm(0));
  for (const auto& p : pts) CHECK(p.omega_prime == doctest::Approx(r).epsilon(1e-6));
  CHECK(CurveCsv(pts).rfind("delta,omega,omega_prime,mu,kkt_primal,kkt_stationarity", 0) == 0);
}
