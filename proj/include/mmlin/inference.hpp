#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mmlin/weights.hpp"

namespace mmlin {

double PointEstimate(const WeightSet& weights, const Eigen::VectorXd& y);

enum class FitMethod { kNearestNeighbor, kLocalConstant };

struct FitSpec {
  FitMethod method = FitMethod::kLocalConstant;
  int k = 1;                // nearest neighbours
  Eigen::VectorXd a_diag;   // metric weights for nearest neighbours; empty = ones
  int bandwidth_points = 20;
  double bandwidth_lo = 0.01;
  double bandwidth_hi = 3.0;
};

const char* FitMethodName(FitMethod m);

// Arm-wise regression evaluated at every unit's covariates for both arms.
struct PreliminaryFit {
  FitMethod method = FitMethod::kLocalConstant;
  Eigen::MatrixXd fhat;        // n x 2: column a is fhat(a, X_i); NaN for an arm the sample lacks
  Eigen::VectorXd residuals;   // Y_i - fhat(D_i, X_i)
  double bandwidth[2] = {0.0, 0.0};  // selected LSCV scale per arm (local constant only)
  bool bandwidth_on_edge[2] = {false, false};

  double at(int arm, Index unit) const { return fhat(unit, arm); }
};

PreliminaryFit FitRegression(const Sample& sample, const FitSpec& spec);

// h(Z_i, fhat) for every unit.
Eigen::VectorXd EvaluateTarget(const FunctionalTarget& target, const PreliminaryFit& fit);

struct VarianceResult {
  double se = 0.0;
  double conditional = 0.0;  // sum k^2 eps^2
  double marginal = 0.0;     // after clamping
  bool marginal_clamped = false;
};

// Generic form: sum k^2 eps^2 + (1/n^2) sum h(Z_i, fhat)^2 - psi^2 / n.
VarianceResult VarianceGeneric(const WeightSet& w, const PreliminaryFit& fit, const FunctionalTarget& target,
                               double psi_hat);
// Feasible-ATT split: sum k^2 eps^2 + (1/n1^2) sum_D (fhat(1,X)-fhat(0,X))^2 - tau^2 / n1.
VarianceResult VarianceAttSplit(const WeightSet& w, const PreliminaryFit& fit, const Sample& sample, double tau_hat);
// Dispatches on the target kind.
VarianceResult VarianceEstimate(const WeightSet& w, const PreliminaryFit& fit, const FunctionalTarget& target,
                                const Sample& sample, double psi_hat);

enum class CiStyle { kFoldedNormal, kAdditive };

const char* CiStyleName(CiStyle s);

// c solving P(|N(t,1)| <= c) = 1 - alpha.
double CriticalValue(double alpha, double t);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

struct EstimateReport {
  double psi_hat = 0.0;
  double se = 0.0;
  double maxbias = 0.0;
  double delta = 0.0;
  double lipschitz_c = 0.0;
  double alpha = 0.05;
  std::string rule;
  CiStyle style = CiStyle::kFoldedNormal;
  Interval ci_naive;
  Interval ci_biasaware;
  double ci_onesided_lower = 0.0;
  std::vector<std::string> flags;
};

// Fills the interval fields of `report` from psi_hat, se and maxbias.
void ConfidenceIntervals(EstimateReport& report, double alpha, CiStyle style);

// One component of a composite: its estimate and per-unit influence values.
struct Component {
  double psi_hat = 0.0;
  Eigen::VectorXd influence;
};

// zeta_i = n k_i (Y_i - fhat(Z_i)) + h(Z_i, fhat) - psi_hat.
Component LinearComponent(const WeightSet& w, const Eigen::VectorXd& y, const PreliminaryFit& fit,
                          const FunctionalTarget& target);
// Sample mean of v: psi = mean, zeta_i = v_i - mean.
Component MeanComponent(const Eigen::VectorXd& v);

struct CompositeResult {
  double value = 0.0;
  double se = 0.0;
  Eigen::MatrixXd sigma;  // covariance of the influence values
};

// value = g(psi), gradient supplied at psi; se = sqrt(grad' Sigma grad / n).
CompositeResult DeltaMethod(const std::vector<Component>& components, double value, const Eigen::VectorXd& gradient);

// psi / p with p = n1/n; numerator weights must come from the ATT numerator target.
CompositeResult AttRatio(const Sample& sample, const WeightSet& numerator_weights, const PreliminaryFit& fit);

// (sum k Y) / (sum k D) with shared instrument-arm weights.
CompositeResult LateRatio(const WeightSet& w, const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                          const PreliminaryFit& fit_y, const PreliminaryFit& fit_d, const FunctionalTarget& target);

}  // namespace mmlin
