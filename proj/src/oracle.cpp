// Independent small-instance solver for the modulus program.
//
// At an optimum, a maximal linearly independent subset of the active edge
// constraints is a signed spanning forest of the edge graph. Fixing such a
// forest leaves one free value per tree, and the ball-constrained linear
// program over those values has a closed form. Enumerating every signed
// forest and keeping the best feasible candidate gives the global optimum.

#include <cmath>
#include <limits>

#include "mmlin/modulus.hpp"

namespace mmlin {

namespace {

constexpr long long kMaxCandidates = 50'000'000;

struct Enumerator {
  const ModulusProblem& p;
  Eigen::VectorXd c;
  std::vector<char> observed;
  std::vector<double> scale;
  double radius;
  Index m;

  // Current forest: chosen edge index and sign (+1/-1).
  std::vector<std::pair<std::size_t, int>> chosen;
  std::vector<Index> comp;  // component label per node, maintained by relabelling

  long long candidates = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_f;
  double best_mu = 0.0;
  bool best_inactive = false;

  Enumerator(const ModulusProblem& prob, double r)
      : p(prob), c(prob.objective()), radius(r), m(prob.nodes.size()) {
    observed.resize(static_cast<std::size_t>(m));
    scale.resize(static_cast<std::size_t>(m));
    comp.resize(static_cast<std::size_t>(m));
    for (Index k = 0; k < m; ++k) {
      observed[static_cast<std::size_t>(k)] = p.nodes.nodes[static_cast<std::size_t>(k)].observed;
      scale[static_cast<std::size_t>(k)] = p.node_scale.size() ? p.node_scale[k] : 1.0;
      comp[static_cast<std::size_t>(k)] = k;
    }
  }

  void evaluate() {
    if (++candidates > kMaxCandidates) Fail(ErrorCode::kOracleTooLarge, "oracle candidate budget exceeded");
    // f_v = base_v + slope_v * theta_root(v); propagate from roots along the forest.
    std::vector<double> base(static_cast<std::size_t>(m), 0.0);
    std::vector<double> slope(static_cast<std::size_t>(m), 0.0);
    std::vector<char> known(static_cast<std::size_t>(m), 0);
    std::vector<Index> root(static_cast<std::size_t>(m), -1);
    for (Index k = 0; k < m; ++k)
      if (comp[static_cast<std::size_t>(k)] == k) {
        known[static_cast<std::size_t>(k)] = 1;
        slope[static_cast<std::size_t>(k)] = 1.0;
        root[static_cast<std::size_t>(k)] = k;
      }
    bool progress = true;
    while (progress) {
      progress = false;
      for (const auto& [e, sign] : chosen) {
        const Edge& ed = p.graph.edges[e];
        auto a = static_cast<std::size_t>(ed.a);
        auto b = static_cast<std::size_t>(ed.b);
        // scale_a f_a - scale_b f_b = sign * bound
        if (known[a] && !known[b]) {
          base[b] = (scale[a] * base[a] - sign * ed.bound) / scale[b];
          slope[b] = scale[a] * slope[a] / scale[b];
          root[b] = root[a];
          known[b] = 1;
          progress = true;
        } else if (known[b] && !known[a]) {
          base[a] = (scale[b] * base[b] + sign * ed.bound) / scale[a];
          slope[a] = scale[b] * slope[b] / scale[a];
          root[a] = root[b];
          known[a] = 1;
          progress = true;
        }
      }
    }
    // Per-tree aggregates.
    std::vector<double> g(static_cast<std::size_t>(m), 0.0), nk(static_cast<std::size_t>(m), 0.0),
        bk(static_cast<std::size_t>(m), 0.0), rk(static_cast<std::size_t>(m), 0.0);
    std::vector<char> has_obs(static_cast<std::size_t>(m), 0);
    double const_obj = 0.0;
    for (Index v = 0; v < m; ++v) {
      auto vi = static_cast<std::size_t>(v);
      auto r = static_cast<std::size_t>(root[vi]);
      g[r] += c[v] * slope[vi];
      const_obj += c[v] * base[vi];
      if (observed[vi]) {
        has_obs[r] = 1;
        nk[r] += slope[vi] * slope[vi];
        bk[r] += slope[vi] * base[vi];
        rk[r] += base[vi] * base[vi];
      }
    }
    const double cscale = c.lpNorm<Eigen::Infinity>();
    double resid = 0.0;
    double G = 0.0;
    for (Index k = 0; k < m; ++k) {
      auto ki = static_cast<std::size_t>(k);
      if (root[ki] != k) continue;
      if (!has_obs[ki]) {
        if (std::abs(g[ki]) > 1e-12 * cscale) return;  // unbounded along this tree
        continue;
      }
      resid += rk[ki] - bk[ki] * bk[ki] / nk[ki];
      G += g[ki] * g[ki] / nk[ki];
    }
    const double rho = radius * radius - resid;
    if (rho < -1e-12 * radius * radius) return;
    const double rho_c = std::max(rho, 0.0);
    const double scale_phi = G > 0.0 ? std::sqrt(rho_c / G) : 0.0;
    std::vector<double> theta(static_cast<std::size_t>(m), 0.0);
    for (Index k = 0; k < m; ++k) {
      auto ki = static_cast<std::size_t>(k);
      if (root[ki] != k || !has_obs[ki]) continue;
      double phi = scale_phi * g[ki] / nk[ki];
      theta[ki] = phi - bk[ki] / nk[ki];
    }
    Eigen::VectorXd f(m);
    for (Index v = 0; v < m; ++v) {
      auto vi = static_cast<std::size_t>(v);
      f[v] = base[vi] + slope[vi] * theta[static_cast<std::size_t>(root[vi])];
    }
    // Feasibility against every edge and the ball.
    for (const Edge& ed : p.graph.edges) {
      double t = scale[static_cast<std::size_t>(ed.a)] * f[ed.a] - scale[static_cast<std::size_t>(ed.b)] * f[ed.b];
      if (std::abs(t) > ed.bound + 1e-9 * (radius + ed.bound)) return;
    }
    double value = c.dot(f);
    if (value > best_value + 1e-13 * std::max(1.0, std::abs(value))) {
      best_value = value;
      best_f = f;
      best_inactive = !(G > 0.0);
      best_mu = (G > 0.0 && rho_c > 0.0) ? std::sqrt(G) / (2.0 * std::sqrt(rho_c)) : 0.0;
    }
  }

  void recurse(std::size_t e) {
    if (e == p.graph.edges.size()) {
      evaluate();
      return;
    }
    recurse(e + 1);
    const Edge& ed = p.graph.edges[e];
    Index ca = comp[static_cast<std::size_t>(ed.a)];
    Index cb = comp[static_cast<std::size_t>(ed.b)];
    if (ca == cb) return;
    // Merge the two trees under the smaller label.
    Index lead = std::min(ca, cb);
    Index other = std::max(ca, cb);
    std::vector<Index> relabelled;
    for (Index k = 0; k < m; ++k)
      if (comp[static_cast<std::size_t>(k)] == other) {
        comp[static_cast<std::size_t>(k)] = lead;
        relabelled.push_back(k);
      }
    const int signs = ed.bound == 0.0 ? 1 : 2;
    for (int s = 0; s < signs; ++s) {
      chosen.emplace_back(e, s == 0 ? 1 : -1);
      recurse(e + 1);
      chosen.pop_back();
    }
    for (Index k : relabelled) comp[static_cast<std::size_t>(k)] = other;
  }
};

}  // namespace

ModulusSolution BruteForceModulus(const ModulusProblem& problem) {
  const Index m = problem.nodes.size();
  if (m > kOracleMaxNodes) Fail(ErrorCode::kOracleTooLarge, "oracle limited to " + std::to_string(kOracleMaxNodes) + " nodes");
  if (!(problem.delta > 0.0)) Fail(ErrorCode::kInvalidDelta, "delta must be positive");
  Enumerator en(problem, problem.delta / 2.0);
  ModulusSolution sol;
  sol.delta = problem.delta;
  if (en.c.norm() == 0.0) {
    sol.f_star = Eigen::VectorXd::Zero(m);
    sol.ball_inactive = true;
    return sol;
  }
  en.recurse(0);
  if (!en.best_f.size()) Fail(ErrorCode::kSolverStalled, "oracle found no feasible bounded candidate");
  sol.f_star = en.best_f;
  sol.omega = en.c.dot(en.best_f);
  sol.mu = en.best_mu;
  sol.ball_inactive = en.best_inactive;
  sol.omega_prime = sol.mu * problem.delta / 2.0;
  return sol;
}

}  // namespace mmlin
