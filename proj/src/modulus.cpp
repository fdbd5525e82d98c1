#include "mmlin/modulus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/SparseCholesky>

namespace mmlin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct UnionFind {
  std::vector<Index> parent;
  explicit UnionFind(Index m) : parent(static_cast<std::size_t>(m)) {
    std::iota(parent.begin(), parent.end(), Index{0});
  }
  Index find(Index v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
      v = parent[static_cast<std::size_t>(v)];
    }
    return v;
  }
  bool unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<std::size_t>(a)] = b;
    return true;
  }
};


}  // namespace

Eigen::VectorXd ModulusProblem::objective() const {
  const double n_units = static_cast<double>(H.rows());
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(H.rows());
  return (2.0 / n_units) * (H.transpose() * ones);
}

ModulusProblem MakeModulusProblem(const Sample& sample, const FunctionalTarget& target, const LipschitzClass& cls,
                                  double delta, bool prune_1d) {
  ModulusProblem p;
  p.nodes = BuildNodes(sample, target);
  p.graph = BuildConstraintGraph(sample, p.nodes, cls, prune_1d);
  p.H = target.matrix(p.nodes);
  p.delta = delta;
  return p;
}

ModulusSolver::ModulusSolver(const ModulusProblem& problem, ToleranceSpec tol) : problem_(problem), tol_(tol) {
  const Index m = problem_.nodes.size();
  if (problem_.H.cols() != m) Fail(ErrorCode::kInvalidArgument, "functional matrix does not match node set");
  if (problem_.node_scale.size() != 0 && problem_.node_scale.size() != m)
    Fail(ErrorCode::kInvalidArgument, "node scale length does not match node set");
  if (problem_.node_scale.size() != 0 && !(problem_.node_scale.array() > 0.0).all())
    Fail(ErrorCode::kInvalidVariance, "node scales must be positive");
  c_ = problem_.objective();
  scale_ = problem_.node_scale.size() ? problem_.node_scale : Eigen::VectorXd::Ones(m);
  observed_.assign(static_cast<std::size_t>(m), 0);
  for (Index k = 0; k < m; ++k) observed_[static_cast<std::size_t>(k)] = problem_.nodes.nodes[static_cast<std::size_t>(k)].observed;

  // Zero-bound edges pin z_a = z_b; contract them.
  UnionFind tie(m);
  for (const Edge& e : problem_.graph.edges)
    if (e.bound == 0.0) tie.unite(e.a, e.b);
  group_.assign(static_cast<std::size_t>(m), -1);
  std::vector<Index> label(static_cast<std::size_t>(m), -1);
  n_groups_ = 0;
  for (Index k = 0; k < m; ++k) {
    Index r = tie.find(k);
    if (label[static_cast<std::size_t>(r)] < 0) label[static_cast<std::size_t>(r)] = n_groups_++;
    group_[static_cast<std::size_t>(k)] = label[static_cast<std::size_t>(r)];
  }
  c_group_ = Eigen::VectorXd::Zero(n_groups_);
  q_group_ = Eigen::VectorXd::Zero(n_groups_);
  for (Index k = 0; k < m; ++k) {
    Index g = group_[static_cast<std::size_t>(k)];
    c_group_[g] += c_[k] / scale_[k];
    if (observed_[static_cast<std::size_t>(k)]) q_group_[g] += 1.0 / (scale_[k] * scale_[k]);
  }

  // Groups in graph components without an observed node carry no ball term;
  // they are pinned at zero.
  UnionFind comp(n_groups_);
  for (const Edge& e : problem_.graph.edges)
    comp.unite(group_[static_cast<std::size_t>(e.a)], group_[static_cast<std::size_t>(e.b)]);
  std::vector<char> root_anchored(static_cast<std::size_t>(n_groups_), 0);
  for (Index g = 0; g < n_groups_; ++g)
    if (q_group_[g] > 0.0) root_anchored[static_cast<std::size_t>(comp.find(g))] = 1;
  anchored_.assign(static_cast<std::size_t>(n_groups_), 0);
  for (Index g = 0; g < n_groups_; ++g)
    anchored_[static_cast<std::size_t>(g)] = root_anchored[static_cast<std::size_t>(comp.find(g))];

  in_working_.assign(problem_.graph.edges.size(), 0);
  seed_working_set();
}

void ModulusSolver::add_edge(std::size_t e) {
  if (in_working_[e]) return;
  in_working_[e] = 1;
  const Edge& ed = problem_.graph.edges[e];
  Index ga = group_[static_cast<std::size_t>(ed.a)];
  Index gb = group_[static_cast<std::size_t>(ed.b)];
  if (ga == gb || !anchored_[static_cast<std::size_t>(ga)]) return;
  working_.push_back({ga, gb, ed.bound});
}

void ModulusSolver::seed_working_set() {
  const auto& edges = problem_.graph.edges;
  const Index m = problem_.nodes.size();
  if (problem_.graph.pruned || edges.size() <= static_cast<std::size_t>(std::max<Index>(6 * m, 64))) {
    for (std::size_t e = 0; e < edges.size(); ++e) add_edge(e);
    return;
  }
  // Minimum spanning forest keeps every graph component connected.
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return edges[x].bound < edges[y].bound; });
  UnionFind uf(m);
  for (std::size_t e : order)
    if (uf.unite(edges[e].a, edges[e].b)) add_edge(e);
  // Nearest neighbours of each node, and its nearest observed neighbours.
  constexpr std::size_t kNear = 6;
  constexpr std::size_t kNearObserved = 3;
  std::vector<std::vector<std::size_t>> incident(static_cast<std::size_t>(m));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    incident[static_cast<std::size_t>(edges[e].a)].push_back(e);
    incident[static_cast<std::size_t>(edges[e].b)].push_back(e);
  }
  for (Index k = 0; k < m; ++k) {
    auto& inc = incident[static_cast<std::size_t>(k)];
    std::size_t want = std::min(inc.size(), kNear + kNearObserved);
    std::partial_sort(inc.begin(), inc.begin() + static_cast<std::ptrdiff_t>(want), inc.end(),
                      [&](std::size_t x, std::size_t y) { return edges[x].bound < edges[y].bound; });
    std::size_t taken = 0;
    std::size_t taken_obs = 0;
    for (std::size_t i = 0; i < inc.size() && (taken < kNear || taken_obs < kNearObserved); ++i) {
      std::size_t e = inc[i];
      if (i == want) {
        // Only observed neighbours still wanted; finish the sort lazily.
        std::sort(inc.begin() + static_cast<std::ptrdiff_t>(i), inc.end(),
                  [&](std::size_t x, std::size_t y) { return edges[x].bound < edges[y].bound; });
        e = inc[i];
      }
      Index other = edges[e].a == k ? edges[e].b : edges[e].a;
      bool obs = observed_[static_cast<std::size_t>(other)];
      if (taken < kNear) {
        add_edge(e);
        ++taken;
        if (obs) ++taken_obs;
      } else if (obs) {
        add_edge(e);
        ++taken_obs;
      }
    }
  }
}

std::vector<std::size_t> ModulusSolver::violated_edges(const Eigen::VectorXd& z, double radius) const {
  const auto& edges = problem_.graph.edges;
  std::vector<std::pair<double, std::size_t>> viol;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (in_working_[e]) continue;
    const Edge& ed = edges[e];
    double v = (std::abs(z[ed.a] - z[ed.b]) - ed.bound) / radius;
    if (v > 1e-10) viol.emplace_back(v, e);
  }
  std::sort(viol.begin(), viol.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  const std::size_t cap = static_cast<std::size_t>(std::max<Index>(50, 8 * problem_.nodes.size()));
  if (viol.size() > cap) viol.resize(cap);
  std::vector<std::size_t> out;
  out.reserve(viol.size());
  for (const auto& v : viol) out.push_back(v.second);
  return out;
}

namespace {

// Primal-dual interior point for
//   max c'x  s.t.  |x_a - x_b| <= w_e,  x'Qx <= 1   (Q diagonal, w > 0)
// started at the strictly feasible point x = 0. Slacks are always exact, so
// the primal iterate stays feasible and only stationarity and
// complementarity have to be driven to zero.
constexpr double kGamma = 1e-3;
constexpr double kBeta = 10.0;
constexpr double kSlackFloor = 64.0 * std::numeric_limits<double>::epsilon();
constexpr int kStallWindow = 200;

struct IpmResult {
  Eigen::VectorXd x;
  Eigen::VectorXd lam_p;  // multipliers of x_a - x_b <= w
  Eigen::VectorXd lam_m;  // multipliers of x_b - x_a <= w
  double nu = 0.0;
  double stationarity = kInf;
  double complementarity = kInf;
  int iterations = 0;
  bool converged = false;
};

struct WorkingEdge {
  Index a;
  Index b;
  double w;
};

IpmResult InteriorPoint(const Eigen::VectorXd& c, const Eigen::VectorXd& q, const std::vector<WorkingEdge>& edges,
                        int max_iterations, double stat_tol, double compl_tol) {
  const Index nv = c.size();
  const Index ne = static_cast<Index>(edges.size());
  IpmResult r;
  r.x = Eigen::VectorXd::Zero(nv);
  Eigen::VectorXd sp(ne), sm(ne);
  for (Index e = 0; e < ne; ++e) sp[e] = sm[e] = edges[static_cast<std::size_t>(e)].w;
  double sq = 1.0;
  const double tau0 = 1.0 / std::sqrt(static_cast<double>(2 * ne + 1));
  r.lam_p = sp.cwiseInverse() * tau0;
  r.lam_m = sm.cwiseInverse() * tau0;
  r.nu = tau0;
  const double n_constraints = static_cast<double>(2 * ne + 1);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(nv + 4 * ne));
  Eigen::SparseMatrix<double> M(nv, nv);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;

  auto residuals = [&]() {
    Eigen::VectorXd rd = -c + 2.0 * r.nu * q.cwiseProduct(r.x);
    for (Index e = 0; e < ne; ++e) {
      const auto& ed = edges[static_cast<std::size_t>(e)];
      double l = r.lam_p[e] - r.lam_m[e];
      rd[ed.a] += l;
      rd[ed.b] -= l;
    }
    r.stationarity = rd.lpNorm<Eigen::Infinity>();
    r.complementarity = r.lam_p.dot(sp) + r.lam_m.dot(sm) + r.nu * sq;
  };

  // Solve with M, polishing with a few refinement sweeps since M grows
  // badly conditioned as edges become active.
  auto Refined = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd sol = ldlt.solve(b);
    for (int k = 0; k < 3; ++k) {
      Eigen::VectorXd res = b - M.selfadjointView<Eigen::Lower>() * sol;
      sol += ldlt.solve(res);
    }
    return sol;
  };

  // Direction for per-constraint complementarity targets tp, tm, tq.
  Eigen::VectorXd g(nv), dx(nv), dlp(ne), dlm(ne);
  double dnu = 0.0;
  auto direction = [&](const Eigen::VectorXd& tp, const Eigen::VectorXd& tm, double tq) {
    // Bordered system in (dx, dnu); keeps the ball row well scaled as its
    // slack goes to zero.
    Eigen::VectorXd rhs = c - r.nu * g;
    for (Index e = 0; e < ne; ++e) {
      const auto& ed = edges[static_cast<std::size_t>(e)];
      double v = tp[e] / sp[e] - tm[e] / sm[e];
      rhs[ed.a] -= v;
      rhs[ed.b] += v;
    }
    Eigen::VectorXd xs = Refined(rhs);
    Eigen::VectorXd ys = Refined(g);
    const double r2 = sq - tq / r.nu;
    dnu = (g.dot(xs) - r2) / (g.dot(ys) + sq / r.nu);
    dx = xs - ys * dnu;
    for (Index e = 0; e < ne; ++e) {
      const auto& ed = edges[static_cast<std::size_t>(e)];
      double adx = dx[ed.a] - dx[ed.b];  // d(sp) = -adx, d(sm) = +adx
      dlp[e] = (tp[e] - r.lam_p[e] * sp[e] + r.lam_p[e] * adx) / sp[e];
      dlm[e] = (tm[e] - r.lam_m[e] * sm[e] - r.lam_m[e] * adx) / sm[e];
    }
  };

  // Largest step keeping slacks and multipliers nonnegative.
  auto max_step = [&]() {
    double a = 1.0;
    for (Index e = 0; e < ne; ++e) {
      const auto& ed = edges[static_cast<std::size_t>(e)];
      double adx = dx[ed.a] - dx[ed.b];
      if (adx > 0.0) a = std::min(a, sp[e] / adx);
      if (adx < 0.0) a = std::min(a, -sm[e] / adx);
      if (dlp[e] < 0.0) a = std::min(a, -r.lam_p[e] / dlp[e]);
      if (dlm[e] < 0.0) a = std::min(a, -r.lam_m[e] / dlm[e]);
    }
    if (dnu < 0.0) a = std::min(a, -r.nu / dnu);
    // Ball: 1 - (x + a dx)'Q(x + a dx) >= 0 is a concave quadratic in a.
    const double qa = dx.dot(q.cwiseProduct(dx));
    const double qb = 2.0 * r.x.dot(q.cwiseProduct(dx));
    if (qa > 0.0) {
      double disc = qb * qb + 4.0 * qa * sq;
      double root = (-qb + std::sqrt(disc)) / (2.0 * qa);
      a = std::min(a, root);
    }
    return a;
  };

  residuals();
  const double ratio0 = r.stationarity / r.complementarity;
  double best_merit = kInf;
  int since_best = 0;
  // Raised after a step had to be cut back hard; pure affine steps then
  // keep colliding with the neighbourhood.
  double sigma_floor = 0.0;
  for (; r.iterations < max_iterations; ++r.iterations) {
    if (r.stationarity <= stat_tol && r.complementarity <= compl_tol) {
      r.converged = true;
      break;
    }
    const double merit = std::max(r.stationarity / stat_tol, r.complementarity / compl_tol);
    if (merit < 0.99 * best_merit) {
      best_merit = merit;
      since_best = 0;
    } else if (++since_best > kStallWindow) {
      break;
    }
    g = 2.0 * q.cwiseProduct(r.x);
    trip.clear();
    for (Index v = 0; v < nv; ++v) trip.emplace_back(v, v, 2.0 * r.nu * q[v] + 1e-14);
    for (Index e = 0; e < ne; ++e) {
      const auto& ed = edges[static_cast<std::size_t>(e)];
      double d = r.lam_p[e] / sp[e] + r.lam_m[e] / sm[e];
      trip.emplace_back(ed.a, ed.a, d);
      trip.emplace_back(ed.b, ed.b, d);
      trip.emplace_back(std::max(ed.a, ed.b), std::min(ed.a, ed.b), -d);
    }
    M.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed) {
      ldlt.analyzePattern(M);
      analyzed = true;
    }
    ldlt.factorize(M);
    if (ldlt.info() != Eigen::Success) break;

    const double mu = r.complementarity / n_constraints;
    // Predictor.
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(ne);
    direction(zero, zero, 0.0);
    double a_aff = max_step();
    double gap_aff = 0.0;
    for (Index e = 0; e < ne; ++e) {
      const auto& ed = edges[static_cast<std::size_t>(e)];
      double adx = dx[ed.a] - dx[ed.b];
      gap_aff += (r.lam_p[e] + a_aff * dlp[e]) * std::max(sp[e] - a_aff * adx, 0.0) +
                 (r.lam_m[e] + a_aff * dlm[e]) * std::max(sm[e] + a_aff * adx, 0.0);
    }
    {
      Eigen::VectorXd xa = r.x + a_aff * dx;
      gap_aff += (r.nu + a_aff * dnu) * std::max(1.0 - xa.dot(q.cwiseProduct(xa)), 0.0);
    }
    const double sigma = std::clamp(std::max(std::pow(gap_aff / r.complementarity, 3.0), sigma_floor), 0.0, 1.0);
    // Corrector with second-order terms on the linear rows.
    Eigen::VectorXd tp(ne), tm(ne);
    for (Index e = 0; e < ne; ++e) {
      const auto& ed = edges[static_cast<std::size_t>(e)];
      double adx = dx[ed.a] - dx[ed.b];
      tp[e] = sigma * mu + adx * dlp[e];
      tm[e] = sigma * mu - adx * dlm[e];
    }
    double tq = sigma * mu;
    direction(tp, tm, tq);
    double a = max_step();
    if (!(a > 0.0)) break;
    a = std::min(1.0, 0.995 * a);
    const double a_full = a;
    // Backtrack until the trial point stays in a wide neighbourhood of the
    // central path: no product far below the average, and stationarity
    // falling no slower than complementarity.
    const IpmResult saved = r;
    const Eigen::VectorXd sp0 = sp, sm0 = sm;
    const double sq0 = sq;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt, a *= 0.5) {
      r.x = saved.x + a * dx;
      r.lam_p = saved.lam_p + a * dlp;
      r.lam_m = saved.lam_m + a * dlm;
      r.nu = saved.nu + a * dnu;
      for (Index e = 0; e < ne; ++e) {
        const auto& ed = edges[static_cast<std::size_t>(e)];
        double t = r.x[ed.a] - r.x[ed.b];
        sp[e] = ed.w - t;
        sm[e] = ed.w + t;
      }
      // 1 - x'Qx cancels near the boundary; below its rounding floor the
      // slack carries no information, so hold it at the floor.
      sq = 1.0 - r.x.dot(q.cwiseProduct(r.x));
      if (!(sq > -kSlackFloor) || (ne && (sp.minCoeff() <= 0.0 || sm.minCoeff() <= 0.0))) continue;
      sq = std::max(sq, kSlackFloor);
      residuals();
      const double avg = r.complementarity / n_constraints;
      bool central = r.nu * sq >= kGamma * avg;
      for (Index e = 0; central && e < ne; ++e)
        central = r.lam_p[e] * sp[e] >= kGamma * avg && r.lam_m[e] * sm[e] >= kGamma * avg;
      const bool balanced = r.stationarity <= std::max(kBeta * ratio0, kBeta) * r.complementarity ||
                            r.stationarity <= stat_tol;
      if (central && balanced) {
        accepted = true;
        sigma_floor = a < 0.25 * a_full ? 0.3 : 0.0;
        break;
      }
    }
    if (!accepted) {
      r = saved;
      sp = sp0;
      sm = sm0;
      sq = sq0;
      break;
    }
  }
  if (!r.converged && r.stationarity <= stat_tol && r.complementarity <= compl_tol) r.converged = true;
  return r;
}

}  // namespace

ModulusSolution ModulusSolver::solve(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) Fail(ErrorCode::kInvalidDelta, "delta must be positive and finite");
  const Index m = problem_.nodes.size();
  const double radius = delta / 2.0;
  ModulusSolution sol;
  sol.delta = delta;
  sol.f_star = Eigen::VectorXd::Zero(m);

  // Free variables: anchored groups.
  std::vector<Index> var(static_cast<std::size_t>(n_groups_), -1);
  Index nv = 0;
  for (Index g = 0; g < n_groups_; ++g) {
    if (anchored_[static_cast<std::size_t>(g)]) {
      var[static_cast<std::size_t>(g)] = nv++;
    } else if (std::abs(c_group_[g]) > 1e-12 * c_group_.lpNorm<Eigen::Infinity>()) {
      Fail(ErrorCode::kInvalidArgument, "functional loads a node not linked to any observation; modulus is unbounded");
    }
  }
  Eigen::VectorXd c(nv), q(nv);
  for (Index g = 0; g < n_groups_; ++g)
    if (var[static_cast<std::size_t>(g)] >= 0) {
      c[var[static_cast<std::size_t>(g)]] = c_group_[g];
      q[var[static_cast<std::size_t>(g)]] = q_group_[g];
    }
  const double c_norm = c.norm();
  if (c_norm == 0.0) {
    sol.ball_inactive = true;
    return sol;
  }
  c /= c_norm;

  const double stat_tol = 1e-3 * tol_.stationarity;
  const double compl_tol = 1e-3 * tol_.complementarity;
  int budget = tol_.max_iterations;
  int rounds = 0;
  IpmResult ipm;
  Eigen::VectorXd z(m);
  for (;;) {
    ++rounds;
    std::vector<WorkingEdge> edges;
    edges.reserve(working_.size());
    for (const auto& we : working_)
      edges.push_back({var[static_cast<std::size_t>(we.a)], var[static_cast<std::size_t>(we.b)], we.bound / radius});
    ipm = InteriorPoint(c, q, edges, budget, stat_tol, compl_tol);
    budget -= ipm.iterations;
    sol.kkt.iterations += ipm.iterations;
    if (!ipm.converged) {
      Fail(ErrorCode::kSolverStalled,
           "interior point stopped after " + std::to_string(sol.kkt.iterations) +
               " iterations (stationarity " + std::to_string(ipm.stationarity) + ", complementarity " +
               std::to_string(ipm.complementarity) + ")");
    }
    for (Index k = 0; k < m; ++k) {
      Index v = var[static_cast<std::size_t>(group_[static_cast<std::size_t>(k)])];
      z[k] = v >= 0 ? radius * ipm.x[v] : 0.0;
    }
    auto viol = violated_edges(z, radius);
    if (viol.empty()) break;
    for (std::size_t e : viol) add_edge(e);
  }

  sol.f_star = z.cwiseQuotient(scale_);
  sol.omega = c_.dot(sol.f_star);
  sol.mu = ipm.nu * c_norm / radius;
  sol.omega_prime = sol.mu * delta / 2.0;

  // Report KKT quantities over the full graph in normalized units.
  double primal = 0.0;
  for (const Edge& e : problem_.graph.edges)
    primal = std::max(primal, (std::abs(z[e.a] - z[e.b]) - e.bound) / radius);
  double fo2 = 0.0;
  for (Index k = 0; k < m; ++k)
    if (observed_[static_cast<std::size_t>(k)]) fo2 += sol.f_star[k] * sol.f_star[k];
  primal = std::max(primal, fo2 / (radius * radius) - 1.0);
  sol.kkt.primal = primal;
  sol.kkt.stationarity = ipm.stationarity;
  sol.kkt.complementarity = ipm.complementarity;
  sol.kkt.rounds = rounds;
  sol.kkt.working_edges = static_cast<Index>(working_.size());
  sol.ball_inactive = fo2 < radius * radius * (1.0 - 1e-7) && ipm.nu < 1e-8;
  if (primal > tol_.primal)
    Fail(ErrorCode::kSolverStalled, "primal infeasibility " + std::to_string(primal) + " above tolerance");
  return sol;
}

ModulusSolution SolveModulus(const ModulusProblem& problem, const ToleranceSpec& tol) {
  ModulusSolver solver(problem, tol);
  return solver.solve(problem.delta);
}

std::vector<CurvePoint> OmegaCurve(const ModulusProblem& problem, const std::vector<double>& deltas,
                                   const ToleranceSpec& tol) {
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) Fail(ErrorCode::kInvalidDelta, "delta grid must be positive");
    if (i > 0 && !(deltas[i] > deltas[i - 1])) Fail(ErrorCode::kInvalidDelta, "delta grid must be strictly increasing");
  }
  ModulusSolver solver(problem, tol);
  std::vector<CurvePoint> out;
  out.reserve(deltas.size());
  for (double d : deltas) {
    ModulusSolution s;
    try {
      s = solver.solve(d);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " [delta=" + std::to_string(d) + "]");
    }
    CurvePoint pt{d, s.omega, s.omega_prime, s.mu, s.kkt.primal, s.kkt.stationarity,
                  std::numeric_limits<double>::quiet_NaN(), s.ball_inactive};
    if (tol.verify_fd) {
      const double h = 1e-3 * d;
      double up = solver.solve(d + h).omega;
      double dn = solver.solve(d - h).omega;
      pt.fd_omega_prime = (up - dn) / (2.0 * h);
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace mmlin
