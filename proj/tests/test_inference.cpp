#include <cmath>
#include <random>

#include "doctest.h"
#include "mmlin/simlab.hpp"
#include "support.hpp"

using namespace mmlin;
using mmlin::testing::RandomSample;

namespace {

WeightSet Solve(const Sample& s, const FunctionalTarget& t, double C, double delta) {
  ModulusProblem prob = MakeModulusProblem(s, t, LipschitzClass::Identity(C, s.p()), delta, s.p() == 1);
  return WeightsFromModulus(SolveModulus(prob), prob, 1.0);
}

}  // namespace

TEST_CASE("preliminary fits") {
  Eigen::MatrixXd x(2, 1);
  x << 0.2, 0.9;
  Sample two(Eigen::Vector2d(3.0, -1.0), std::vector<int>{1, 0}, x);
  FitSpec nn;
  nn.method = FitMethod::kNearestNeighbor;
  PreliminaryFit f = FitRegression(two, nn);
  CHECK(f.fhat(0, 1) == 3.0);
  CHECK(f.fhat(1, 1) == 3.0);
  CHECK(f.fhat(0, 0) == -1.0);
  CHECK(f.residuals.lpNorm<Eigen::Infinity>() == 0.0);

  std::mt19937_64 rng(3);
  Sample s = RandomSample(rng, 10, 12, 2);
  Eigen::VectorXd y(s.n());
  for (Index i = 0; i < s.n(); ++i) y[i] = s.arm(i) ? 4.0 : -2.0;
  PreliminaryFit lc = FitRegression(s.with_outcome(y), FitSpec{});
  CHECK((lc.fhat.col(1).array() - 4.0).abs().maxCoeff() < 1e-12);
  CHECK((lc.fhat.col(0).array() + 2.0).abs().maxCoeff() < 1e-12);

  Eigen::MatrixXd x3(3, 1);
  x3 << 0, 0.5, 1;
  Sample treated(Eigen::Vector3d(1, 2, 3), std::vector<int>{1, 1, 1}, x3);
  try {
    FitRegression(treated, FitSpec{});
    FAIL("empty arm accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingArm);
  }
}

TEST_CASE("cross-validated bandwidth stays inside the grid") {
  DgpSpec dgp;
  dgp.case_id = 1;
  dgp.n = 200;
  int inside = 0;
  for (int rep = 0; rep < 100; ++rep) {
    SimSample draw = GenerateSample(dgp, SplitMix64(900 + rep));
    PreliminaryFit fit = FitRegression(draw.sample, FitSpec{});
    if (!fit.bandwidth_on_edge[0] && !fit.bandwidth_on_edge[1]) ++inside;
  }
  CHECK(inside >= 90);
}

TEST_CASE("critical values") {
  CHECK(CriticalValue(0.05, 0.0) == doctest::Approx(1.959964).epsilon(1e-6));
  const double c10 = CriticalValue(0.05, 10.0);
  CHECK(c10 >= 11.64);
  CHECK(c10 <= 11.65);
  CHECK(CriticalValue(0.05, 0.5) > CriticalValue(0.05, 0.0));
  CHECK_THROWS_AS(CriticalValue(1.0, 0.0), Error);
}

TEST_CASE("interval styles") {
  for (double b : {0.0, 0.03, 0.4}) {
    EstimateReport fold, add;
    fold.psi_hat = add.psi_hat = 1.0;
    fold.se = add.se = 0.2;
    fold.maxbias = add.maxbias = b;
    ConfidenceIntervals(fold, 0.05, CiStyle::kFoldedNormal);
    ConfidenceIntervals(add, 0.05, CiStyle::kAdditive);
    const double naive = fold.ci_naive.hi - fold.ci_naive.lo;
    CHECK(naive == doctest::Approx(2 * 1.959964 * 0.2).epsilon(1e-6));
    const double wf = fold.ci_biasaware.hi - fold.ci_biasaware.lo;
    const double wa = add.ci_biasaware.hi - add.ci_biasaware.lo;
    CHECK(wf >= naive - 1e-12);
    CHECK(wf <= wa + 1e-12);
    if (b == 0.0) {
      CHECK(fold.ci_biasaware.lo == fold.ci_naive.lo);
      CHECK(add.ci_biasaware.hi == add.ci_naive.hi);
    }
    CHECK(fold.ci_onesided_lower == doctest::Approx(1.0 - b - 1.644854 * 0.2).epsilon(1e-6));
  }
  EstimateReport degenerate;
  degenerate.psi_hat = 0.0;
  degenerate.se = 0.0;
  degenerate.maxbias = 0.1;
  ConfidenceIntervals(degenerate, 0.05, CiStyle::kFoldedNormal);
  CHECK(degenerate.style == CiStyle::kAdditive);
  CHECK(degenerate.ci_biasaware.hi == doctest::Approx(0.1));
}

TEST_CASE("ATT split variance against the generic form") {
  std::mt19937_64 rng(44);
  for (int rep = 0; rep < 5; ++rep) {
    Sample base = RandomSample(rng, 8 + rep, 14, 1);
    Eigen::VectorXd y(base.n());
    std::normal_distribution<double> z(0.0, 0.3);
    for (Index i = 0; i < base.n(); ++i) y[i] = (base.arm(i) ? 3.0 * base.x()(i, 0) : 0.0) + z(rng);
    Sample s = base.with_outcome(y);
    FunctionalTarget t = FunctionalTarget::Att(s);
    WeightSet w = Solve(s, t, 2.0, 1.0);
    PreliminaryFit fit = FitRegression(s, FitSpec{});
    const double psi = PointEstimate(w, s.y());
    VarianceResult g = VarianceGeneric(w, fit, t, psi);
    VarianceResult a = VarianceAttSplit(w, fit, s, psi);
    REQUIRE_FALSE(g.marginal_clamped);
    REQUIRE_FALSE(a.marginal_clamped);
    CHECK(a.conditional == g.conditional);
    // The two marginal terms share the first moment and differ in the
    // centring: psi^2/n1 against psi^2/n.
    const double n = static_cast<double>(s.n()), n1 = static_cast<double>(s.count_arm(1));
    CHECK(g.marginal - a.marginal == doctest::Approx(psi * psi * (1.0 / n1 - 1.0 / n)).epsilon(1e-10));
    CHECK(VarianceEstimate(w, fit, t, s, psi).se == a.se);
  }
}

TEST_CASE("zero-noise, zero-effect variance") {
  std::mt19937_64 rng(5);
  Sample base = RandomSample(rng, 10, 10, 1);
  Sample s = base.with_outcome(Eigen::VectorXd::Constant(base.n(), 0.7));
  FunctionalTarget t = FunctionalTarget::Att(s);
  WeightSet w = Solve(s, t, 1.0, 1.0);
  PreliminaryFit fit = FitRegression(s, FitSpec{});
  VarianceResult v = VarianceEstimate(w, fit, t, s, PointEstimate(w, s.y()));
  CHECK(v.se <= 1e-6);
}

TEST_CASE("ATT as a ratio") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 4; ++rep) {
    Sample s = RandomSample(rng, 7 + rep, 13, 1);
    PreliminaryFit fit = FitRegression(s, FitSpec{});
    WeightSet direct = Solve(s, FunctionalTarget::Att(s), 1.0, 1.0);
    // The numerator functional is the ATT functional times n1/n, so at the
    // same delta its weights are the direct ones times n1/n.
    WeightSet num = Solve(s, FunctionalTarget::AttNumerator(s), 1.0, 1.0);
    CompositeResult r = AttRatio(s, num, fit);
    CHECK(r.value == doctest::Approx(PointEstimate(direct, s.y())).epsilon(1e-10));
    CHECK(r.se > 0.0);
  }
  Sample s = RandomSample(rng, 3, 3, 1);
  PreliminaryFit fit = FitRegression(s, FitSpec{});
  Eigen::VectorXd zero_d = Eigen::VectorXd::Zero(s.n());
  WeightSet w = Solve(s, FunctionalTarget::Ate(s), 1.0, 1.0);
  try {
    LateRatio(w, s.y(), zero_d, fit, FitRegression(s.with_outcome(zero_d), FitSpec{}), FunctionalTarget::Ate(s));
    FAIL("zero first stage accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateDenominator);
  }
}

TEST_CASE("LATE zero-noise toy") {
  // Perfect compliance: the first stage is exactly one and the ratio returns
  // the constant effect.
  std::mt19937_64 rng(10);
  Sample base = RandomSample(rng, 12, 12, 1);
  Eigen::VectorXd d(base.n()), y(base.n());
  for (Index i = 0; i < base.n(); ++i) {
    d[i] = base.arm(i);
    y[i] = 1.75 * d[i] - 0.4;
  }
  Sample sy = base.with_outcome(y), sd = base.with_outcome(d);
  FunctionalTarget t = FunctionalTarget::Ate(base);
  WeightSet w = Solve(base, t, 1.0, 1.0);
  CompositeResult r = LateRatio(w, y, d, FitRegression(sy, FitSpec{}), FitRegression(sd, FitSpec{}), t);
  CHECK(r.value == doctest::Approx(1.75).epsilon(1e-8));
}

TEST_CASE("delta method with one component") {
  Eigen::VectorXd v(5);
  v << 1, 2, 4, 8, 16;
  CompositeResult r = DeltaMethod({MeanComponent(v)}, v.mean(), Eigen::VectorXd::Ones(1));
  const double var = (v.array() - v.mean()).square().mean();
  CHECK(r.value == doctest::Approx(6.2));
  CHECK(r.se == doctest::Approx(std::sqrt(var / 5.0)));
  CHECK_THROWS_AS(DeltaMethod({MeanComponent(v)}, 0.0, Eigen::VectorXd::Ones(2)), Error);
}
