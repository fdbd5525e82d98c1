#include "mmlin/weights.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>

namespace mmlin {

WeightSet WeightsFromModulus(const ModulusSolution& sol, const ModulusProblem& problem, double sigma_bar) {
  const NodeSet& nodes = problem.nodes;
  WeightSet w;
  w.delta = sol.delta;
  w.sigma_bar = sigma_bar;
  w.omega = sol.omega;
  w.omega_prime = sol.omega_prime;
  w.ball_inactive = sol.ball_inactive;
  w.k.resize(nodes.n_units);
  for (Index i = 0; i < nodes.n_units; ++i) {
    Index v = nodes.unit_node[static_cast<std::size_t>(i)];
    double s = problem.node_scale.size() ? problem.node_scale[v] : 1.0;
    w.k[i] = sol.mu * sol.f_star[v] / s;
  }
  w.maxbias = (sol.omega - sol.delta * sol.omega_prime) / 2.0;
  w.var_proxy = sigma_bar * sigma_bar * w.k.squaredNorm();
  return w;
}

DeltaRule DeltaRule::Fixed(double d) {
  DeltaRule r;
  r.mode = DeltaMode::kFixed;
  r.delta = d;
  return r;
}

DeltaRule DeltaRule::Quantile(double alpha, double beta, double sigma_bar) {
  DeltaRule r;
  r.mode = DeltaMode::kQuantile;
  r.alpha = alpha;
  r.beta = beta;
  r.sigma_bar = sigma_bar;
  return r;
}

DeltaRule DeltaRule::Rmse(double sigma_bar, std::vector<double> grid) {
  DeltaRule r;
  r.mode = DeltaMode::kRmse;
  r.sigma_bar = sigma_bar;
  r.grid = std::move(grid);
  return r;
}

const char* DeltaModeName(DeltaMode mode) {
  switch (mode) {
    case DeltaMode::kFixed: return "fixed";
    case DeltaMode::kQuantile: return "quantile";
    case DeltaMode::kRmse: return "rmse";
  }
  return "?";
}

std::vector<double> DefaultDeltaGrid(double sigma_bar) {
  constexpr int kPoints = 30;
  const double lo = std::log(0.05 * sigma_bar);
  const double hi = std::log(50.0 * sigma_bar);
  std::vector<double> g(kPoints);
  for (int i = 0; i < kPoints; ++i) g[static_cast<std::size_t>(i)] = std::exp(lo + (hi - lo) * i / (kPoints - 1));
  return g;
}

double QuantileDelta(double alpha, double beta, double sigma_bar) {
  if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0))
    Fail(ErrorCode::kInvalidRule, "quantile rule needs alpha, beta in (0,1)");
  if (!(sigma_bar > 0.0)) Fail(ErrorCode::kInvalidRule, "quantile rule needs sigma_bar > 0");
  boost::math::normal z;
  double d = sigma_bar * (boost::math::quantile(z, 1.0 - alpha) + boost::math::quantile(z, beta)) / 2.0;
  if (!(d > 0.0)) Fail(ErrorCode::kInvalidRule, "quantile rule gives nonpositive delta");
  return d;
}

namespace {

struct Evaluated {
  double delta = 0.0;
  double risk = 0.0;
  WeightSet weights;
  ModulusSolution solution;
};

Evaluated Evaluate(ModulusSolver& solver, double delta, double sigma_bar) {
  Evaluated e;
  e.delta = delta;
  e.solution = solver.solve(delta);
  e.weights = WeightsFromModulus(e.solution, solver.problem(), sigma_bar);
  e.risk = e.weights.maxbias * e.weights.maxbias + e.weights.var_proxy;
  return e;
}

// Strict improvement beyond rounding noise; keeps ties on the smaller delta.
bool Better(double candidate, double incumbent) {
  return candidate < incumbent - 1e-9 * std::abs(incumbent);
}

}  // namespace

DeltaResolution ResolveDelta(const DeltaRule& rule, ModulusSolver& solver) {
  DeltaResolution out;
  if (rule.mode != DeltaMode::kRmse) {
    double d = rule.mode == DeltaMode::kFixed ? rule.delta : QuantileDelta(rule.alpha, rule.beta, rule.sigma_bar);
    if (!(d > 0.0) || !std::isfinite(d)) Fail(ErrorCode::kInvalidDelta, "delta must be positive and finite");
    Evaluated e = Evaluate(solver, d, rule.sigma_bar);
    out.delta = d;
    out.weights = std::move(e.weights);
    out.solution = std::move(e.solution);
    out.solves = 1;
    return out;
  }

  if (!(rule.sigma_bar > 0.0)) Fail(ErrorCode::kInvalidRule, "rmse rule needs sigma_bar > 0");
  std::vector<double> grid = rule.grid.empty() ? DefaultDeltaGrid(rule.sigma_bar) : rule.grid;
  if (grid.empty()) Fail(ErrorCode::kInvalidRule, "empty delta grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) Fail(ErrorCode::kInvalidRule, "delta grid must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1])) Fail(ErrorCode::kInvalidRule, "delta grid must be strictly increasing");
  }

  std::vector<double> risk(grid.size());
  std::size_t best_i = 0;
  Evaluated best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Evaluated e = Evaluate(solver, grid[i], rule.sigma_bar);
    ++out.solves;
    risk[i] = e.risk;
    if (i == 0 || Better(e.risk, best.risk)) {
      best_i = i;
      best = std::move(e);
    }
  }

  // Golden-section search in log(delta) between the grid neighbours.
  if (grid.size() >= 2) {
    double lo = std::log(grid[best_i == 0 ? 0 : best_i - 1]);
    double hi = std::log(grid[std::min(best_i + 1, grid.size() - 1)]);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    const double tol = std::log1p(1e-3);
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    Evaluated e1 = Evaluate(solver, std::exp(x1), rule.sigma_bar);
    Evaluated e2 = Evaluate(solver, std::exp(x2), rule.sigma_bar);
    out.solves += 2;
    while (hi - lo > tol) {
      if (e1.risk <= e2.risk) {
        hi = x2;
        x2 = x1;
        e2 = std::move(e1);
        x1 = hi - inv_phi * (hi - lo);
        e1 = Evaluate(solver, std::exp(x1), rule.sigma_bar);
      } else {
        lo = x1;
        x1 = x2;
        e1 = std::move(e2);
        x2 = lo + inv_phi * (hi - lo);
        e2 = Evaluate(solver, std::exp(x2), rule.sigma_bar);
      }
      ++out.solves;
    }
    Evaluated& cand = e1.risk <= e2.risk ? e1 : e2;
    if (Better(cand.risk, best.risk)) best = std::move(cand);
  }
  out.delta = best.delta;
  out.weights = std::move(best.weights);
  out.solution = std::move(best.solution);
  return out;
}

KnownVarianceProblem MakeKnownVarianceProblem(const Sample& sample, const Eigen::VectorXd& sigma,
                                              const LipschitzClass& cls, const FunctionalTarget& target, double delta,
                                              bool prune_1d) {
  if (sigma.size() != sample.n()) Fail(ErrorCode::kInvalidVariance, "sigma length does not match sample");
  for (Index i = 0; i < sigma.size(); ++i)
    if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i]))
      Fail(ErrorCode::kInvalidVariance, "sigma must be positive and finite (unit " + std::to_string(i + 1) + ")");
  KnownVarianceProblem out;
  out.problem = MakeModulusProblem(sample, target, cls, delta, prune_1d);
  ModulusProblem& p = out.problem;
  const Index m = p.nodes.size();
  // Solver variable g = f / s with s = sigma at observed nodes and 1 at
  // counterfactual ones; the objective picks up the same factor.
  p.node_scale = Eigen::VectorXd::Ones(m);
  for (Index i = 0; i < sample.n(); ++i) p.node_scale[p.nodes.unit_node[static_cast<std::size_t>(i)]] = sigma[i];
  p.H = p.H * p.node_scale.asDiagonal();
  out.y_scaled = sample.y().cwiseQuotient(sigma);
  return out;
}

}  // namespace mmlin
