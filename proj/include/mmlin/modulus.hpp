#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mmlin/data_model.hpp"

namespace mmlin {

struct ToleranceSpec {
  double primal = 1e-8;          // relative primal feasibility
  double stationarity = 1e-6;
  double complementarity = 1e-6;
  int max_iterations = 100000;   // interior-point iterations summed over working-set rounds
  bool verify_fd = false;        // finite-difference cross-check of omega'
};

// Maximize (2/n) sum_i (H f)_i over the Lipschitz polytope subject to
// sum over observed nodes of f^2 <= delta^2 / 4.
struct ModulusProblem {
  NodeSet nodes;
  ConstraintGraph graph;
  Eigen::SparseMatrix<double> H;
  double delta = 1.0;
  // Optional per-node factor s: edge rows read |s_a f_a - s_b f_b| <= bound.
  // Empty means all ones.
  Eigen::VectorXd node_scale;

  Index n() const { return H.rows(); }
  // Gradient of the objective with respect to node values.
  Eigen::VectorXd objective() const;
};

ModulusProblem MakeModulusProblem(const Sample& sample, const FunctionalTarget& target,
                                  const LipschitzClass& cls, double delta, bool prune_1d);

struct KktReport {
  double primal = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;
  int iterations = 0;
  int rounds = 0;
  Index working_edges = 0;
};

struct ModulusSolution {
  Eigen::VectorXd f_star;
  double omega = 0.0;
  double omega_prime = 0.0;
  double mu = 0.0;
  double delta = 0.0;
  bool ball_inactive = false;
  KktReport kkt;
};

// Working-set interior-point solver. Keeps the active edge set between
// calls so that a sequence of deltas can be solved cheaply.
class ModulusSolver {
 public:
  // `problem` must outlive the solver.
  explicit ModulusSolver(const ModulusProblem& problem, ToleranceSpec tol = {});

  ModulusSolution solve(double delta);
  const ModulusProblem& problem() const { return problem_; }

 private:
  // Solver works on z_v = s_v f_v so edge rows are plain differences; nodes
  // tied by zero-bound edges share one variable ("group").
  struct WorkEdge {
    Index a;  // group
    Index b;  // group
    double bound;
  };

  void seed_working_set();
  void add_edge(std::size_t e);
  std::vector<std::size_t> violated_edges(const Eigen::VectorXd& z, double radius) const;

  const ModulusProblem& problem_;
  ToleranceSpec tol_;
  Eigen::VectorXd c_;          // objective over nodes
  Eigen::VectorXd scale_;      // s_v
  std::vector<char> observed_;
  std::vector<Index> group_;   // node -> group
  Index n_groups_ = 0;
  Eigen::VectorXd c_group_;    // objective over groups (z space)
  Eigen::VectorXd q_group_;    // ball weight over groups
  std::vector<char> anchored_; // per group
  std::vector<char> in_working_;
  std::vector<WorkEdge> working_;
};

ModulusSolution SolveModulus(const ModulusProblem& problem, const ToleranceSpec& tol = {});

// Exhaustive enumeration of signed spanning forests of the edge graph;
// independent of the interior-point path. Limited to small node counts.
ModulusSolution BruteForceModulus(const ModulusProblem& problem);
inline constexpr Index kOracleMaxNodes = 10;

struct CurvePoint {
  double delta;
  double omega;
  double omega_prime;
  double mu;
  double kkt_primal;
  double kkt_stationarity;
  double fd_omega_prime;  // NaN unless verify_fd
  bool ball_inactive;
};

std::vector<CurvePoint> OmegaCurve(const ModulusProblem& problem, const std::vector<double>& deltas,
                                   const ToleranceSpec& tol = {});

}  // namespace mmlin
