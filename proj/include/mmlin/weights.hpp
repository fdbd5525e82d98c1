#pragma once

#include <vector>

#include "mmlin/modulus.hpp"

namespace mmlin {

struct WeightSet {
  Eigen::VectorXd k;  // one weight per unit
  double delta = 0.0;
  double maxbias = 0.0;
  double var_proxy = 0.0;  // sigma_bar^2 * sum k^2
  double sigma_bar = 0.0;
  double omega = 0.0;
  double omega_prime = 0.0;
  bool ball_inactive = false;

  double sum_sq() const { return k.squaredNorm(); }
};

// k_i = mu * f*(observed node of i), divided by the node scale when the
// problem carries one (the known-variance path).
WeightSet WeightsFromModulus(const ModulusSolution& sol, const ModulusProblem& problem, double sigma_bar);

enum class DeltaMode { kFixed, kQuantile, kRmse };

struct DeltaRule {
  DeltaMode mode = DeltaMode::kRmse;
  double delta = 2.0;       // kFixed
  double alpha = 0.05;      // kQuantile
  double beta = 0.99;       // kQuantile
  double sigma_bar = 1.0;   // kQuantile, kRmse
  std::vector<double> grid; // kRmse; empty means the default grid

  static DeltaRule Fixed(double d);
  static DeltaRule Quantile(double alpha, double beta, double sigma_bar);
  static DeltaRule Rmse(double sigma_bar, std::vector<double> grid = {});
};

const char* DeltaModeName(DeltaMode mode);

// 30 log-spaced points on [0.05, 50] * sigma_bar.
std::vector<double> DefaultDeltaGrid(double sigma_bar);

struct DeltaResolution {
  double delta = 0.0;
  WeightSet weights;
  ModulusSolution solution;
  int solves = 0;
};

// The solver's working set is reused across the grid.
DeltaResolution ResolveDelta(const DeltaRule& rule, ModulusSolver& solver);

// Closed-form part of the rule; kRmse needs a solver.
double QuantileDelta(double alpha, double beta, double sigma_bar);

struct KnownVarianceProblem {
  ModulusProblem problem;
  Eigen::VectorXd y_scaled;  // Y / sigma
};

// Divides the regression by sigma: the ball acts on f/sigma at observed nodes
// while Lipschitz rows still bind f. Weights from the returned problem apply
// to the original Y.
KnownVarianceProblem MakeKnownVarianceProblem(const Sample& sample, const Eigen::VectorXd& sigma,
                                              const LipschitzClass& cls, const FunctionalTarget& target, double delta,
                                              bool prune_1d);

}  // namespace mmlin
