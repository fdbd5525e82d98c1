#include "mmlin/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace mmlin {

Sample::Sample(Eigen::VectorXd y, std::optional<std::vector<int>> d, Eigen::MatrixXd x)
    : y_(std::move(y)), d_(std::move(d)), x_(std::move(x)) {
  if (y_.size() < 2) Fail(ErrorCode::kDataError, "sample needs n >= 2 units");
  if (x_.cols() < 1) Fail(ErrorCode::kDataError, "sample needs p >= 1 covariates");
  if (x_.rows() != y_.size()) Fail(ErrorCode::kDataError, "covariate rows do not match outcome length");
  if (d_ && static_cast<Index>(d_->size()) != y_.size())
    Fail(ErrorCode::kDataError, "treatment column length does not match outcome length");
  for (Index i = 0; i < y_.size(); ++i) {
    bool finite = std::isfinite(y_[i]) && x_.row(i).allFinite();
    if (!finite) Fail(ErrorCode::kDataError, "non-finite value in unit " + std::to_string(i + 1));
    if (d_ && (*d_)[static_cast<std::size_t>(i)] != 0 && (*d_)[static_cast<std::size_t>(i)] != 1)
      Fail(ErrorCode::kDataError, "treatment must be 0/1 (unit " + std::to_string(i + 1) + ")");
  }
}

Index Sample::count_arm(int a) const {
  Index c = 0;
  for (Index i = 0; i < n(); ++i) c += arm(i) == a ? 1 : 0;
  return c;
}

Sample Sample::with_outcome(Eigen::VectorXd y) const { return Sample(std::move(y), d_, x_); }

namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseField(const std::string& s, std::size_t row, const std::string& col) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (s.empty() || end == begin || *end != '\0')
    Fail(ErrorCode::kDataError, "row " + std::to_string(row) + ": cannot parse column '" + col + "'");
  if (!std::isfinite(v))
    Fail(ErrorCode::kDataError, "row " + std::to_string(row) + ": non-finite value in column '" + col + "'");
  return v;
}

}  // namespace

Sample ParseSampleCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) Fail(ErrorCode::kDataError, "empty CSV: header required");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // BOM
  const auto header = SplitCsvLine(line);

  int y_col = -1;
  int d_col = -1;
  std::map<int, int> x_cols;  // covariate index (1-based) -> column
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const std::string& h = header[static_cast<std::size_t>(c)];
    if (h == "y") {
      y_col = c;
    } else if (h == "d") {
      d_col = c;
    } else if (h.size() > 1 && h[0] == 'x' &&
               std::all_of(h.begin() + 1, h.end(), [](char ch) { return std::isdigit(ch); })) {
      x_cols[std::stoi(h.substr(1))] = c;
    }
  }
  if (y_col < 0) Fail(ErrorCode::kDataError, "CSV header lacks column 'y'");
  if (x_cols.empty()) Fail(ErrorCode::kDataError, "CSV header lacks covariate columns x1..xp");
  const int p = static_cast<int>(x_cols.size());
  for (int j = 1; j <= p; ++j)
    if (!x_cols.count(j)) Fail(ErrorCode::kDataError, "covariate columns must be x1..x" + std::to_string(p));

  std::vector<double> ys;
  std::vector<int> ds;
  std::vector<double> xs;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != header.size())
      Fail(ErrorCode::kDataError, "row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                                      " fields, got " + std::to_string(cells.size()));
    ys.push_back(ParseField(cells[static_cast<std::size_t>(y_col)], row, "y"));
    if (d_col >= 0) {
      double dv = ParseField(cells[static_cast<std::size_t>(d_col)], row, "d");
      if (dv != 0.0 && dv != 1.0) Fail(ErrorCode::kDataError, "row " + std::to_string(row) + ": d must be 0 or 1");
      ds.push_back(static_cast<int>(dv));
    }
    for (int j = 1; j <= p; ++j)
      xs.push_back(ParseField(cells[static_cast<std::size_t>(x_cols[j])], row, "x" + std::to_string(j)));
  }
  const Index n = static_cast<Index>(ys.size());
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  Eigen::MatrixXd x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xs.data(), n, p);
  std::optional<std::vector<int>> d;
  if (d_col >= 0) d = std::move(ds);
  return Sample(std::move(y), std::move(d), std::move(x));
}

Sample ReadSampleCsv(const std::string& path) {
  std::ifstream f(path);
  if (!f) Fail(ErrorCode::kIoError, "cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return ParseSampleCsv(buf.str());
}

LipschitzClass::LipschitzClass(double c, Eigen::VectorXd a) : C(c), a_diag(std::move(a)) {}

LipschitzClass LipschitzClass::Identity(double c, Index p) {
  return LipschitzClass(c, Eigen::VectorXd::Ones(p));
}

double LipschitzClass::norm(const Eigen::Ref<const Eigen::RowVectorXd>& v) const {
  return (v.transpose().array() * a_diag.array()).abs().sum();
}

double LipschitzClass::distance(const Eigen::MatrixXd& x, Index i, Index j) const {
  double s = 0.0;
  for (Index k = 0; k < x.cols(); ++k) s += std::abs(a_diag[k] * (x(i, k) - x(j, k)));
  return s;
}

void LipschitzClass::validate(Index p) const {
  if (!(C >= 0.0) || !std::isfinite(C)) Fail(ErrorCode::kInvalidArgument, "Lipschitz constant must be >= 0");
  if (a_diag.size() != p)
    Fail(ErrorCode::kInvalidArgument, "A diagonal has length " + std::to_string(a_diag.size()) +
                                          ", expected " + std::to_string(p));
  for (Index j = 0; j < p; ++j)
    if (!(a_diag[j] > 0.0) || !std::isfinite(a_diag[j]))
      Fail(ErrorCode::kInvalidArgument, "A diagonal entries must be positive");
}

Index NodeSet::find(int arm, Index row) const {
  for (Index k = 0; k < size(); ++k) {
    const Node& nd = nodes[static_cast<std::size_t>(k)];
    if (nd.arm == arm && nd.row == row) return k;
  }
  return -1;
}

const char* TargetKindName(TargetKind kind) {
  switch (kind) {
    case TargetKind::kAte: return "ate";
    case TargetKind::kAtt: return "att";
    case TargetKind::kCustom: return "custom";
  }
  return "custom";
}

FunctionalTarget::FunctionalTarget(TargetKind kind, Index n, std::vector<Term> terms)
    : kind_(kind), n_(n), terms_(std::move(terms)) {
  for (const Term& t : terms_) {
    if (t.unit < 0 || t.unit >= n_ || t.row < 0 || t.row >= n_)
      Fail(ErrorCode::kInvalidArgument, "functional term references a unit outside the sample");
    if (!std::isfinite(t.coef)) Fail(ErrorCode::kInvalidArgument, "functional coefficient must be finite");
  }
}

FunctionalTarget FunctionalTarget::Ate(const Sample& s) {
  std::vector<Term> terms;
  terms.reserve(static_cast<std::size_t>(2 * s.n()));
  for (Index i = 0; i < s.n(); ++i) {
    terms.push_back({i, 1, i, 1.0});
    terms.push_back({i, 0, i, -1.0});
  }
  return FunctionalTarget(TargetKind::kAte, s.n(), std::move(terms));
}

FunctionalTarget FunctionalTarget::Att(const Sample& s) {
  const Index n1 = s.count_arm(1);
  if (n1 == 0) Fail(ErrorCode::kMissingArm, "ATT target needs at least one treated unit");
  const double scale = static_cast<double>(s.n()) / static_cast<double>(n1);
  std::vector<Term> terms;
  for (Index i = 0; i < s.n(); ++i) {
    if (s.arm(i) != 1) continue;
    terms.push_back({i, 1, i, scale});
    terms.push_back({i, 0, i, -scale});
  }
  return FunctionalTarget(TargetKind::kAtt, s.n(), std::move(terms));
}

FunctionalTarget FunctionalTarget::AttNumerator(const Sample& s) {
  std::vector<Term> terms;
  for (Index i = 0; i < s.n(); ++i) {
    if (s.arm(i) != 1) continue;
    terms.push_back({i, 1, i, 1.0});
    terms.push_back({i, 0, i, -1.0});
  }
  return FunctionalTarget(TargetKind::kCustom, s.n(), std::move(terms));
}

FunctionalTarget FunctionalTarget::scaled(double alpha) const {
  std::vector<Term> t = terms_;
  for (Term& term : t) term.coef *= alpha;
  return FunctionalTarget(kind_, n_, std::move(t));
}

Eigen::SparseMatrix<double> FunctionalTarget::matrix(const NodeSet& nodes) const {
  std::map<std::pair<int, Index>, Index> lookup;
  for (Index k = 0; k < nodes.size(); ++k)
    lookup[{nodes.nodes[static_cast<std::size_t>(k)].arm, nodes.nodes[static_cast<std::size_t>(k)].row}] = k;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(terms_.size());
  for (const Term& t : terms_) {
    if (t.coef == 0.0) continue;
    auto it = lookup.find({t.arm, t.row});
    if (it == lookup.end()) Fail(ErrorCode::kInvalidArgument, "functional references a node outside the node set");
    trip.emplace_back(t.unit, it->second, t.coef);
  }
  Eigen::SparseMatrix<double> h(n_, nodes.size());
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

NodeSet BuildNodes(const Sample& sample, const FunctionalTarget& target) {
  if (target.n() != sample.n()) Fail(ErrorCode::kInvalidArgument, "functional and sample sizes differ");
  NodeSet ns;
  ns.n_units = sample.n();
  ns.unit_node.resize(static_cast<std::size_t>(sample.n()));
  std::map<std::pair<int, Index>, Index> lookup;
  for (Index i = 0; i < sample.n(); ++i) {
    Node nd{sample.arm(i), i, true, i};
    lookup[{nd.arm, i}] = ns.size();
    ns.unit_node[static_cast<std::size_t>(i)] = ns.size();
    ns.nodes.push_back(nd);
  }
  bool has_arm[2] = {sample.count_arm(0) > 0, sample.count_arm(1) > 0};
  for (const auto& t : target.terms()) {
    if (t.coef == 0.0) continue;
    if (t.arm != 0 && t.arm != 1) Fail(ErrorCode::kInvalidArgument, "arm must be 0 or 1");
    if (!has_arm[t.arm])
      Fail(ErrorCode::kMissingArm, "target references arm " + std::to_string(t.arm) + " which has no units");
    if (lookup.count({t.arm, t.row})) continue;
    lookup[{t.arm, t.row}] = ns.size();
    ns.nodes.push_back(Node{t.arm, t.row, false, -1});
  }
  return ns;
}

ConstraintGraph BuildConstraintGraph(const Sample& sample, const NodeSet& nodes, const LipschitzClass& cls,
                                     bool prune_1d) {
  cls.validate(sample.p());
  if (prune_1d && sample.p() != 1)
    Fail(ErrorCode::kInvalidPruning, "sorted-adjacent pruning requires a single covariate");
  ConstraintGraph g;
  g.pruned = prune_1d;
  const Eigen::MatrixXd& x = sample.x();
  for (int arm = 0; arm <= 1; ++arm) {
    std::vector<Index> members;
    for (Index k = 0; k < nodes.size(); ++k)
      if (nodes.nodes[static_cast<std::size_t>(k)].arm == arm) members.push_back(k);
    auto row = [&](Index k) { return nodes.nodes[static_cast<std::size_t>(k)].row; };
    if (prune_1d) {
      std::stable_sort(members.begin(), members.end(),
                       [&](Index a, Index b) { return x(row(a), 0) < x(row(b), 0); });
      for (std::size_t t = 1; t < members.size(); ++t) {
        Index a = members[t - 1];
        Index b = members[t];
        g.edges.push_back({a, b, cls.C * cls.distance(x, row(a), row(b))});
      }
    } else {
      for (std::size_t s = 0; s < members.size(); ++s)
        for (std::size_t t = s + 1; t < members.size(); ++t) {
          Index a = members[s];
          Index b = members[t];
          g.edges.push_back({a, b, cls.C * cls.distance(x, row(a), row(b))});
        }
    }
  }
  return g;
}

Eigen::VectorXd EvaluateOnNodes(const NodeSet& nodes, const Sample& sample,
                                const std::function<double(int, const Eigen::RowVectorXd&)>& f) {
  Eigen::VectorXd v(nodes.size());
  for (Index k = 0; k < nodes.size(); ++k) {
    const Node& nd = nodes.nodes[static_cast<std::size_t>(k)];
    v[k] = f(nd.arm, sample.x().row(nd.row));
  }
  return v;
}

}  // namespace mmlin
