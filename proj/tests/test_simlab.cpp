#include <cmath>
#include <random>

#include "doctest.h"
#include "mmlin/simlab.hpp"

using namespace mmlin;

namespace {

DgpSpec Dgp(int c, Index n, double sd = 0.5) {
  DgpSpec d;
  d.case_id = c;
  d.n = n;
  d.noise_sd = sd;
  return d;
}

// int_0^1 x sin(a x) dx
double XSin(double a) { return std::sin(a) / (a * a) - std::cos(a) / a; }

}  // namespace

TEST_CASE("treated share and population ATT") {
  const double ed1 = std::log((1.0 + std::exp(1.0)) / 2.0);
  CHECK(TreatedShare(Dgp(1, 100)) == doctest::Approx(ed1).epsilon(1e-12));
  CHECK(TreatedShare(Dgp(2, 100)) == doctest::Approx(ed1).epsilon(1e-12));
  CHECK(TreatedShare(Dgp(4, 100)) == doctest::Approx(0.75 - 0.25 * 2.0 / 3.0).epsilon(1e-12));
  CHECK(TreatedShare(Dgp(5, 100)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(PopulationAtt(Dgp(5, 100)) == doctest::Approx(2.0 * (XSin(2.0) - XSin(1.0))).epsilon(1e-10));

  // Composite Simpson with 20000 panels as an independent check on case 1.
  auto g = [](double x) { return (std::sin(2 * x) - std::sin(x)) / (1.0 + std::exp(-x)); };
  const int m = 20000;
  double acc = g(0.0) + g(1.0);
  for (int i = 1; i < m; ++i) acc += (i % 2 ? 4.0 : 2.0) * g(static_cast<double>(i) / m);
  CHECK(PopulationAtt(Dgp(1, 100)) == doctest::Approx(acc / (3.0 * m) / ed1).epsilon(1e-10));
}

TEST_CASE("treated share against Monte Carlo") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int draws = 10000000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    double v = 1.0 / (1.0 + std::exp(-u(rng)));
    s += v;
    s2 += v * v;
  }
  const double mean = s / draws;
  const double se = std::sqrt((s2 / draws - mean * mean) / draws);
  CHECK(std::abs(TreatedShare(Dgp(1, 100)) - mean) <= 3.0 * se);
}

TEST_CASE("regression and propensity functions") {
  DgpSpec d1 = Dgp(1, 10);
  Eigen::RowVectorXd x(1);
  x << 0.3;
  CHECK(d1.f(1, x) == doctest::Approx(std::sin(0.6)));
  CHECK(d1.f(0, x) == doctest::Approx(std::sin(0.3)));
  CHECK(d1.propensity(x) == doctest::Approx(1.0 / (1.0 + std::exp(-0.3))));
  CHECK(Dgp(5, 10).propensity(x) == 0.3);
  CHECK(Dgp(2, 10).p() == 3);
  CHECK_THROWS_AS(Dgp(6, 10).validate(), Error);
}

TEST_CASE("noise-free draws and redraw accounting") {
  DgpSpec d = Dgp(1, 50, 0.0);
  SimSample s = GenerateSample(d, 99);
  double att = 0.0;
  for (Index i = 0; i < s.sample.n(); ++i) {
    const int a = s.sample.arm(i);
    CHECK(s.sample.y()[i] == (a ? s.f1[i] : s.f0[i]));
    if (a) att += s.f1[i] - s.f0[i];
  }
  CHECK(s.sample_att == doctest::Approx(att / s.sample.count_arm(1)));

  // Tiny case 5 samples hit an empty arm often; every draw must have both.
  int redraws = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    SimSample t = GenerateSample(Dgp(5, 2), seed);
    CHECK(t.sample.count_arm(1) == 1);
    redraws += t.redraws;
  }
  CHECK(redraws > 0);
}

TEST_CASE("oracle representer") {
  DgpSpec d = Dgp(5, 4);
  Eigen::MatrixXd x(4, 1);
  x << 0.0, 0.5, 0.25, 1.0;
  Sample s(Eigen::VectorXd::Zero(4), std::vector<int>{0, 0, 1, 1}, x);
  Eigen::VectorXd g = OracleRieszAtt(d, s, 0.5);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == doctest::Approx(-2.0));
  CHECK(g[2] == 2.0);
  CHECK(g[3] == 2.0);

  Sample bad(Eigen::VectorXd::Zero(2), std::vector<int>{1, 0}, Eigen::Vector2d(0.5, 1.0));
  CHECK_THROWS_AS(OracleRieszAtt(d, bad, 0.5), Error);

  WeightSet w;
  w.k = g / 4.0;
  CHECK(Discrepancy(w, g) == 0.0);
}

TEST_CASE("augmented estimate") {
  DgpSpec d = Dgp(1, 40, 0.0);
  SimSample draw = GenerateSample(d, 5);
  const Sample& s = draw.sample;
  FunctionalTarget t = FunctionalTarget::Att(s);
  ModulusProblem prob = MakeModulusProblem(s, t, LipschitzClass::Identity(2.0, 1), 1.0, true);
  WeightSet w = WeightsFromModulus(SolveModulus(prob), prob, 0.5);

  PreliminaryFit truth;
  truth.fhat.resize(s.n(), 2);
  truth.fhat.col(0) = draw.f0;
  truth.fhat.col(1) = draw.f1;
  truth.residuals = Eigen::VectorXd::Zero(s.n());
  CHECK(AugmentedEstimate(w, s, truth, t) == doctest::Approx(draw.sample_att).epsilon(1e-12));

  PreliminaryFit zero;
  zero.fhat = Eigen::MatrixXd::Zero(s.n(), 2);
  zero.residuals = s.y();
  CHECK(AugmentedEstimate(w, s, zero, t) == doctest::Approx(PointEstimate(w, s.y())).epsilon(1e-12));
}

TEST_CASE("monte carlo determinism and layout") {
  SimConfig cfg;
  cfg.cases = {1, 5};
  cfg.n_grid = {40};
  cfg.reps = 3;
  cfg.base_seed = 7;
  SimResult a = RunMonteCarlo(cfg);
  cfg.threads = 3;
  SimResult b = RunMonteCarlo(cfg);
  CHECK(PanelCsv(a) == PanelCsv(b));
  CHECK(RepsCsv(a) == RepsCsv(b));
  CHECK(AugmentedCsv(a) == AugmentedCsv(b));
  REQUIRE(a.cells.size() == 2);
  CHECK(a.reps.size() == 6);
  CHECK(a.cells[0].case_id == 1);
  CHECK(PanelCsv(a).rfind("n,Dis_dn,Dis_dstar,bias_dn,maxbias_dn,rmse_dn,bias_dstar,maxbias_dstar,rmse_dstar", 0) == 0);
  for (const auto& c : a.cells) CHECK(c.rmse_dn == doctest::Approx(std::sqrt(c.mse_dn)));

  cfg.reps = 1;
  SimResult one = RunMonteCarlo(cfg);
  SimResult two = RunMonteCarlo(cfg);
  CHECK(RepsCsv(one) == RepsCsv(two));
}
