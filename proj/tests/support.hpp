#pragma once

#include <random>
#include <vector>

#include "mmlin/modulus.hpp"

namespace mmlin::testing {

// Units with the first n1 treated; covariates uniform on [0,1]^p.
inline Sample RandomSample(std::mt19937_64& rng, Index n1, Index n0, Index p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const Index n = n1 + n0;
  Eigen::VectorXd y(n);
  Eigen::MatrixXd x(n, p);
  std::vector<int> d(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    y[i] = z(rng);
    for (Index j = 0; j < p; ++j) x(i, j) = u(rng);
    d[static_cast<std::size_t>(i)] = i < n1 ? 1 : 0;
  }
  return Sample(std::move(y), std::move(d), std::move(x));
}

struct OracleInstance {
  Sample sample;
  ModulusProblem problem;
};

// Small ATE/ATT instance with at most max_nodes nodes.
inline OracleInstance RandomOracleInstance(std::mt19937_64& rng, double C, double delta, Index max_nodes) {
  std::uniform_int_distribution<int> coin(0, 1);
  for (;;) {
    const bool ate = coin(rng) == 1;
    const Index p = 1 + coin(rng);
    const Index n1 = 1 + std::uniform_int_distribution<int>(0, 3)(rng);
    const Index n0 = 1 + std::uniform_int_distribution<int>(0, 3)(rng);
    const Index nodes = ate ? 2 * (n1 + n0) : n1 + n0 + n1;
    if (nodes > max_nodes) continue;
    Sample s = RandomSample(rng, n1, n0, p);
    FunctionalTarget t = ate ? FunctionalTarget::Ate(s) : FunctionalTarget::Att(s);
    ModulusProblem prob = MakeModulusProblem(s, t, LipschitzClass::Identity(C, p), delta, false);
    return {std::move(s), std::move(prob)};
  }
}

}  // namespace mmlin::testing
