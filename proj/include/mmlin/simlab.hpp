#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmlin/inference.hpp"

namespace mmlin {

struct DgpSpec {
  int case_id = 1;  // 1..5
  Index n = 100;
  double noise_sd = 0.5;

  Index p() const;
  void validate() const;
  // Regression f(d, x) and treatment probability f_D(x).
  double f(int d, const Eigen::RowVectorXd& x) const;
  double propensity(const Eigen::RowVectorXd& x) const;
};

struct SimSample {
  Sample sample;
  Eigen::VectorXd f0;  // f(0, X_i)
  Eigen::VectorXd f1;  // f(1, X_i)
  double sample_att = 0.0;
  int redraws = 0;
};

std::uint64_t SplitMix64(std::uint64_t x);

// Draws X ~ U[0,1]^p, D ~ Bernoulli(f_D(X)), eps_d ~ N(0, noise_sd^2); a draw
// with an empty arm is redrawn from the next sub-seed.
SimSample GenerateSample(const DgpSpec& dgp, std::uint64_t seed);

// E[D] and the population ATT, by adaptive Gauss-Kronrod quadrature.
double TreatedShare(const DgpSpec& dgp);
double PopulationAtt(const DgpSpec& dgp);

// gamma*(d,x) = d/E[D] - (1-d)/E[D] * e(x)/(1-e(x)).
Eigen::VectorXd OracleRieszAtt(const DgpSpec& dgp, const Sample& sample, double treated_share);

// (1/n) sum (n k_i - gamma_i)^2.
double Discrepancy(const WeightSet& w, const Eigen::VectorXd& gamma);

// (1/n) sum h(Z_i, fhat) + sum k_i (Y_i - fhat(Z_i)).
double AugmentedEstimate(const WeightSet& w, const Sample& sample, const PreliminaryFit& fit,
                         const FunctionalTarget& target);

struct SimConfig {
  std::vector<int> cases{1};
  std::vector<Index> n_grid{100};
  std::vector<double> c_grid{2.0};
  int reps = 500;
  std::uint64_t base_seed = 1;
  int threads = 1;
  double noise_sd = 0.5;
  double delta_star = 2.0;
  double alpha = 0.05;
  bool augmented = true;
  bool coverage = true;
  FitSpec fit;
};

struct RepResult {
  int case_id = 0;
  double C = 0.0;
  Index n = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  Index n1 = 0;
  int redraws = 0;
  double delta_n = 0.0;
  double psi_dn = 0.0, psi_dstar = 0.0;
  double maxbias_dn = 0.0, maxbias_dstar = 0.0;
  double dis_dn = 0.0, dis_dstar = 0.0;
  double aug_dn = 0.0, aug_dstar = 0.0;
  double se_dn = 0.0;
  bool cover_naive = false, cover_biasaware = false;
  double sample_att = 0.0;
  double balance_error = 0.0;  // max over arms and both deltas of |sum k - (+/-1)|
};

struct CellSummary {
  int case_id = 0;
  double C = 0.0;
  Index n = 0;
  int reps = 0;
  double psi_true = 0.0;
  double dis_dn = 0.0, dis_dstar = 0.0;
  double bias_dn = 0.0, maxbias_dn = 0.0, mse_dn = 0.0, rmse_dn = 0.0;
  double bias_dstar = 0.0, maxbias_dstar = 0.0, mse_dstar = 0.0, rmse_dstar = 0.0;
  double aug_bias_dn = 0.0, aug_mse_dn = 0.0, aug_rmse_dn = 0.0;
  double aug_bias_dstar = 0.0, aug_mse_dstar = 0.0, aug_rmse_dstar = 0.0;
  double cover_naive = 0.0, cover_biasaware = 0.0;
  double mean_se_dn = 0.0, mean_delta_n = 0.0;
  int redraws = 0;
};

struct SimResult {
  std::vector<CellSummary> cells;
  std::vector<RepResult> reps;  // ordered by (case, C, n, rep)
};

// Replications run on `threads` workers; every rep owns its RNG stream
// SplitMix64(base_seed ^ rep), so output does not depend on scheduling.
SimResult RunMonteCarlo(const SimConfig& config);

std::string PanelCsv(const SimResult& r);
std::string AugmentedCsv(const SimResult& r);
std::string RepsCsv(const SimResult& r);

}  // namespace mmlin
