#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mmlin/error.hpp"

namespace mmlin {

using Index = Eigen::Index;

// Observed units: outcome, optional binary arm, covariates (n x p).
class Sample {
 public:
  Sample(Eigen::VectorXd y, std::optional<std::vector<int>> d, Eigen::MatrixXd x);

  Index n() const { return y_.size(); }
  Index p() const { return x_.cols(); }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::MatrixXd& x() const { return x_; }
  bool has_arms() const { return d_.has_value(); }
  // Arm of unit i; 0 when the sample carries no treatment column.
  int arm(Index i) const { return d_ ? (*d_)[static_cast<std::size_t>(i)] : 0; }
  const std::optional<std::vector<int>>& d() const { return d_; }
  Index count_arm(int a) const;

  // Same covariates and arms, new outcome vector.
  Sample with_outcome(Eigen::VectorXd y) const;

 private:
  Eigen::VectorXd y_;
  std::optional<std::vector<int>> d_;
  Eigen::MatrixXd x_;
};

// Reads the `y[,d],x1..xp` CSV schema. Throws kDataError naming the row.
Sample ReadSampleCsv(const std::string& path);
Sample ParseSampleCsv(const std::string& text);

// {f : |f(d,x) - f(d,x')| <= C |x - x'|_A} with |v|_A = sum_j |A_jj v_j|.
struct LipschitzClass {
  double C = 1.0;
  Eigen::VectorXd a_diag;

  LipschitzClass() = default;
  LipschitzClass(double c, Eigen::VectorXd a);
  static LipschitzClass Identity(double c, Index p);

  double norm(const Eigen::Ref<const Eigen::RowVectorXd>& v) const;
  double distance(const Eigen::MatrixXd& x, Index i, Index j) const;
  void validate(Index p) const;
};

struct Node {
  int arm = 0;
  Index row = 0;  // covariate row in the sample
  bool observed = false;
  Index owner = -1;  // unit index for observed nodes
};

struct NodeSet {
  std::vector<Node> nodes;
  std::vector<Index> unit_node;  // observed node of each unit
  Index n_units = 0;

  Index size() const { return static_cast<Index>(nodes.size()); }
  Index find(int arm, Index row) const;
  Index observed_count() const { return n_units; }
};

enum class TargetKind { kAte, kAtt, kCustom };

const char* TargetKindName(TargetKind kind);

// Linear functional f -> h(Z_i, f) = sum of coef * f(arm, x_row), one row per unit.
class FunctionalTarget {
 public:
  struct Term {
    Index unit;
    int arm;
    Index row;
    double coef;
  };

  FunctionalTarget(TargetKind kind, Index n, std::vector<Term> terms);

  // h(Z_i,f) = f(1,X_i) - f(0,X_i).
  static FunctionalTarget Ate(const Sample& s);
  // Feasible ATT: (n/n1) D_i (f(1,X_i) - f(0,X_i)).
  static FunctionalTarget Att(const Sample& s);
  // D_i (f(1,X_i) - f(0,X_i)); the ATT numerator before dividing by E[D].
  static FunctionalTarget AttNumerator(const Sample& s);

  TargetKind kind() const { return kind_; }
  Index n() const { return n_; }
  const std::vector<Term>& terms() const { return terms_; }

  // n x |nodes| operator H with (H f)_i = h(Z_i, f).
  Eigen::SparseMatrix<double> matrix(const NodeSet& nodes) const;
  FunctionalTarget scaled(double alpha) const;

 private:
  TargetKind kind_;
  Index n_;
  std::vector<Term> terms_;
};

NodeSet BuildNodes(const Sample& sample, const FunctionalTarget& target);

struct Edge {
  Index a;
  Index b;
  double bound;
};

struct ConstraintGraph {
  std::vector<Edge> edges;
  bool pruned = false;
};

ConstraintGraph BuildConstraintGraph(const Sample& sample, const NodeSet& nodes,
                                     const LipschitzClass& cls, bool prune_1d);

// Node values indexed like NodeSet: the value at each node's (arm, row).
Eigen::VectorXd EvaluateOnNodes(const NodeSet& nodes, const Sample& sample,
                                const std::function<double(int, const Eigen::RowVectorXd&)>& f);

}  // namespace mmlin
