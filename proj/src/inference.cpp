#include "mmlin/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

namespace mmlin {

namespace {

constexpr double kVarianceFloor = 1e-12;

double NormalCdf(double x) { return boost::math::cdf(boost::math::normal(), x); }
double NormalQuantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

std::vector<Index> ArmMembers(const Sample& s, int arm) {
  std::vector<Index> out;
  for (Index i = 0; i < s.n(); ++i)
    if (s.arm(i) == arm) out.push_back(i);
  return out;
}

void FitNearest(const Sample& s, const FitSpec& spec, int arm, const std::vector<Index>& members,
                PreliminaryFit& fit) {
  const Index p = s.p();
  Eigen::VectorXd a = spec.a_diag.size() ? spec.a_diag : Eigen::VectorXd::Ones(p);
  if (a.size() != p) Fail(ErrorCode::kInvalidArgument, "metric weights length does not match covariates");
  const std::size_t k = static_cast<std::size_t>(spec.k);
  // Leave the unit itself out when the arm has enough other units; otherwise
  // observed residuals would be identically zero.
  const bool leave_out = members.size() > k;
  std::vector<std::pair<double, Index>> dist;
  for (Index i = 0; i < s.n(); ++i) {
    dist.clear();
    for (Index j : members) {
      if (leave_out && j == i) continue;
      double d = ((s.x().row(i) - s.x().row(j)).array().abs() * a.transpose().array()).sum();
      dist.emplace_back(d, j);
    }
    std::size_t take = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    double sum = 0.0;
    for (std::size_t t = 0; t < take; ++t) sum += s.y()[dist[t].second];
    fit.fhat(i, arm) = sum / static_cast<double>(take);
  }
}

// Gaussian product kernel with per-coordinate scale h * sd_j; the bandwidth
// multiplier h is chosen by leave-one-out least squares over a log grid.
void FitLocalConstant(const Sample& s, const FitSpec& spec, int arm, const std::vector<Index>& members,
                      PreliminaryFit& fit) {
  const Index p = s.p();
  const auto m = static_cast<Index>(members.size());
  if (m == 1) {
    fit.fhat.col(arm).setConstant(s.y()[members[0]]);
    return;
  }
  Eigen::MatrixXd xa(m, p);
  Eigen::VectorXd ya(m);
  for (Index t = 0; t < m; ++t) {
    xa.row(t) = s.x().row(members[static_cast<std::size_t>(t)]);
    ya[t] = s.y()[members[static_cast<std::size_t>(t)]];
  }
  Eigen::RowVectorXd sd(p);
  for (Index j = 0; j < p; ++j) {
    double mean = xa.col(j).mean();
    double v = (xa.col(j).array() - mean).square().sum() / static_cast<double>(m - 1);
    sd[j] = v > 0.0 ? std::sqrt(v) : 1.0;
  }
  // Squared scaled distances between arm members, reused across bandwidths.
  Eigen::MatrixXd d2(m, m);
  for (Index r = 0; r < m; ++r)
    for (Index c = r; c < m; ++c) {
      double v = ((xa.row(r) - xa.row(c)).array() / sd.array()).square().sum();
      d2(r, c) = v;
      d2(c, r) = v;
    }

  const int points = std::max(2, spec.bandwidth_points);
  const double lo = std::log(spec.bandwidth_lo);
  const double hi = std::log(spec.bandwidth_hi);
  double best_cv = std::numeric_limits<double>::infinity();
  int best_g = 0;
  for (int g = 0; g < points; ++g) {
    const double h = std::exp(lo + (hi - lo) * g / (points - 1));
    const double inv = 1.0 / (2.0 * h * h);
    double cv = 0.0;
    for (Index r = 0; r < m; ++r) {
      // Largest log-weight among the others, for stable normalization.
      double shift = std::numeric_limits<double>::infinity();
      for (Index c = 0; c < m; ++c)
        if (c != r) shift = std::min(shift, d2(r, c));
      double num = 0.0;
      double den = 0.0;
      for (Index c = 0; c < m; ++c) {
        if (c == r) continue;
        double w = std::exp(-(d2(r, c) - shift) * inv);
        num += w * ya[c];
        den += w;
      }
      double e = ya[r] - num / den;
      cv += e * e;
    }
    if (cv < best_cv) {
      best_cv = cv;
      best_g = g;
    }
  }
  const double h = std::exp(lo + (hi - lo) * best_g / (points - 1));
  fit.bandwidth[arm] = h;
  fit.bandwidth_on_edge[arm] = best_g == 0 || best_g == points - 1;

  const double inv = 1.0 / (2.0 * h * h);
  Eigen::VectorXd w(m);
  for (Index i = 0; i < s.n(); ++i) {
    double shift = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < m; ++c) {
      w[c] = ((s.x().row(i) - xa.row(c)).array() / sd.array()).square().sum();
      shift = std::min(shift, w[c]);
    }
    w = (-(w.array() - shift) * inv).exp();
    fit.fhat(i, arm) = w.dot(ya) / w.sum();
  }
}

}  // namespace

double PointEstimate(const WeightSet& weights, const Eigen::VectorXd& y) {
  if (weights.k.size() != y.size()) Fail(ErrorCode::kInvalidArgument, "weights and outcome lengths differ");
  return weights.k.dot(y);
}

const char* FitMethodName(FitMethod m) {
  return m == FitMethod::kNearestNeighbor ? "nearest_neighbor" : "local_constant";
}

PreliminaryFit FitRegression(const Sample& sample, const FitSpec& spec) {
  if (spec.method == FitMethod::kNearestNeighbor && spec.k < 1)
    Fail(ErrorCode::kInvalidArgument, "nearest-neighbour count must be >= 1");
  if (spec.method == FitMethod::kLocalConstant && !(spec.bandwidth_lo > 0.0 && spec.bandwidth_hi > spec.bandwidth_lo))
    Fail(ErrorCode::kInvalidArgument, "bandwidth grid must be positive and increasing");
  PreliminaryFit fit;
  fit.method = spec.method;
  const Index n = sample.n();
  fit.fhat = Eigen::MatrixXd::Constant(n, 2, std::numeric_limits<double>::quiet_NaN());
  const int arms = sample.has_arms() ? 2 : 1;
  for (int arm = 0; arm < arms; ++arm) {
    std::vector<Index> members = ArmMembers(sample, arm);
    if (members.empty()) Fail(ErrorCode::kMissingArm, "arm " + std::to_string(arm) + " has no units to fit");
    if (spec.method == FitMethod::kNearestNeighbor)
      FitNearest(sample, spec, arm, members, fit);
    else
      FitLocalConstant(sample, spec, arm, members, fit);
  }
  fit.residuals.resize(n);
  for (Index i = 0; i < n; ++i) fit.residuals[i] = sample.y()[i] - fit.fhat(i, sample.arm(i));
  return fit;
}

Eigen::VectorXd EvaluateTarget(const FunctionalTarget& target, const PreliminaryFit& fit) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(target.n());
  for (const auto& t : target.terms()) {
    if (t.coef == 0.0) continue;
    double v = fit.fhat(t.row, t.arm);
    if (!std::isfinite(v)) Fail(ErrorCode::kMissingArm, "preliminary fit does not cover arm " + std::to_string(t.arm));
    h[t.unit] += t.coef * v;
  }
  return h;
}

namespace {

VarianceResult Finish(double conditional, double marginal) {
  VarianceResult r;
  r.conditional = conditional;
  if (marginal < 0.0) {
    r.marginal_clamped = true;
    marginal = 0.0;
  }
  r.marginal = marginal;
  r.se = std::sqrt(std::max(conditional + marginal, kVarianceFloor));
  return r;
}

double Conditional(const WeightSet& w, const PreliminaryFit& fit) {
  if (w.k.size() != fit.residuals.size()) Fail(ErrorCode::kInvalidArgument, "weights and fit lengths differ");
  return (w.k.array().square() * fit.residuals.array().square()).sum();
}

}  // namespace

VarianceResult VarianceGeneric(const WeightSet& w, const PreliminaryFit& fit, const FunctionalTarget& target,
                               double psi_hat) {
  const double n = static_cast<double>(target.n());
  Eigen::VectorXd h = EvaluateTarget(target, fit);
  return Finish(Conditional(w, fit), h.squaredNorm() / (n * n) - psi_hat * psi_hat / n);
}

VarianceResult VarianceAttSplit(const WeightSet& w, const PreliminaryFit& fit, const Sample& sample, double tau_hat) {
  const Index n1 = sample.count_arm(1);
  if (n1 == 0) Fail(ErrorCode::kMissingArm, "ATT variance needs treated units");
  double s = 0.0;
  for (Index i = 0; i < sample.n(); ++i) {
    if (sample.arm(i) != 1) continue;
    double diff = fit.fhat(i, 1) - fit.fhat(i, 0);
    if (!std::isfinite(diff)) Fail(ErrorCode::kMissingArm, "preliminary fit does not cover both arms");
    s += diff * diff;
  }
  const double m = static_cast<double>(n1);
  return Finish(Conditional(w, fit), s / (m * m) - tau_hat * tau_hat / m);
}

VarianceResult VarianceEstimate(const WeightSet& w, const PreliminaryFit& fit, const FunctionalTarget& target,
                                const Sample& sample, double psi_hat) {
  if (target.kind() == TargetKind::kAtt) return VarianceAttSplit(w, fit, sample, psi_hat);
  return VarianceGeneric(w, fit, target, psi_hat);
}

const char* CiStyleName(CiStyle s) { return s == CiStyle::kAdditive ? "additive" : "folded_normal"; }

double CriticalValue(double alpha, double t) {
  if (!(alpha > 0.0 && alpha < 1.0)) Fail(ErrorCode::kInvalidArgument, "alpha must lie in (0,1)");
  if (!std::isfinite(t)) Fail(ErrorCode::kInvalidArgument, "bias ratio must be finite");
  t = std::abs(t);
  const double z = NormalQuantile(1.0 - alpha / 2.0);
  if (t == 0.0) return z;
  // Coverage of [-c, c] by N(t, 1) rises in c; root lies in [z, t + z].
  auto coverage = [&](double c) { return NormalCdf(c - t) - NormalCdf(-c - t); };
  double lo = z;
  double hi = t + z;
  while (hi - lo > 1e-10 * std::max(1.0, hi)) {
    double mid = 0.5 * (lo + hi);
    if (coverage(mid) < 1.0 - alpha)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

void ConfidenceIntervals(EstimateReport& r, double alpha, CiStyle style) {
  if (!(alpha > 0.0 && alpha < 1.0)) Fail(ErrorCode::kInvalidArgument, "alpha must lie in (0,1)");
  if (!(r.se >= 0.0) || !(r.maxbias >= -1e-10)) Fail(ErrorCode::kInvalidArgument, "se and maxbias must be nonnegative");
  const double b = std::max(r.maxbias, 0.0);
  r.alpha = alpha;
  r.style = style;
  const double z2 = NormalQuantile(1.0 - alpha / 2.0);
  const double z1 = NormalQuantile(1.0 - alpha);
  r.ci_naive = {r.psi_hat - z2 * r.se, r.psi_hat + z2 * r.se};
  double half;
  if (style == CiStyle::kFoldedNormal && r.se == 0.0 && b > 0.0) {
    r.flags.emplace_back("biasaware_additive_fallback");
    r.style = CiStyle::kAdditive;
  }
  if (r.style == CiStyle::kFoldedNormal)
    half = r.se > 0.0 ? CriticalValue(alpha, b / r.se) * r.se : 0.0;
  else
    half = b + z2 * r.se;
  r.ci_biasaware = {r.psi_hat - half, r.psi_hat + half};
  r.ci_onesided_lower = r.psi_hat - b - z1 * r.se;
}

Component LinearComponent(const WeightSet& w, const Eigen::VectorXd& y, const PreliminaryFit& fit,
                          const FunctionalTarget& target) {
  const Index n = y.size();
  if (w.k.size() != n || fit.fhat.rows() != n) Fail(ErrorCode::kInvalidArgument, "component lengths differ");
  Component c;
  c.psi_hat = w.k.dot(y);
  Eigen::VectorXd h = EvaluateTarget(target, fit);
  // The fit must have been built for this outcome, so its residuals are Y - fhat(Z).
  c.influence = static_cast<double>(n) * w.k.cwiseProduct(fit.residuals) + h;
  c.influence.array() -= c.psi_hat;
  return c;
}

Component MeanComponent(const Eigen::VectorXd& v) {
  Component c;
  c.psi_hat = v.mean();
  c.influence = v.array() - c.psi_hat;
  return c;
}

CompositeResult DeltaMethod(const std::vector<Component>& comps, double value, const Eigen::VectorXd& gradient) {
  const auto K = static_cast<Index>(comps.size());
  if (K == 0 || gradient.size() != K) Fail(ErrorCode::kInvalidArgument, "gradient dimension must match components");
  const Index n = comps[0].influence.size();
  Eigen::MatrixXd z(n, K);
  for (Index k = 0; k < K; ++k) {
    if (comps[static_cast<std::size_t>(k)].influence.size() != n)
      Fail(ErrorCode::kInvalidArgument, "components must share the sample size");
    z.col(k) = comps[static_cast<std::size_t>(k)].influence;
  }
  Eigen::MatrixXd centered = z.rowwise() - z.colwise().mean();
  CompositeResult r;
  r.value = value;
  r.sigma = centered.transpose() * centered / static_cast<double>(n);
  double v = gradient.dot(r.sigma * gradient);
  r.se = std::sqrt(std::max(v, 0.0) / static_cast<double>(n));
  return r;
}

CompositeResult AttRatio(const Sample& sample, const WeightSet& numerator_weights, const PreliminaryFit& fit) {
  Eigen::VectorXd d(sample.n());
  for (Index i = 0; i < sample.n(); ++i) d[i] = sample.arm(i);
  Component num = LinearComponent(numerator_weights, sample.y(), fit, FunctionalTarget::AttNumerator(sample));
  Component den = MeanComponent(d);
  if (std::abs(den.psi_hat) <= 1e-8) Fail(ErrorCode::kDegenerateDenominator, "treated share is zero");
  Eigen::Vector2d grad(1.0 / den.psi_hat, -num.psi_hat / (den.psi_hat * den.psi_hat));
  return DeltaMethod({num, den}, num.psi_hat / den.psi_hat, grad);
}

CompositeResult LateRatio(const WeightSet& w, const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                          const PreliminaryFit& fit_y, const PreliminaryFit& fit_d, const FunctionalTarget& target) {
  Component num = LinearComponent(w, y, fit_y, target);
  Component den = LinearComponent(w, d, fit_d, target);
  if (std::abs(den.psi_hat) <= 1e-8) Fail(ErrorCode::kDegenerateDenominator, "first-stage effect is zero");
  Eigen::Vector2d grad(1.0 / den.psi_hat, -num.psi_hat / (den.psi_hat * den.psi_hat));
  return DeltaMethod({num, den}, num.psi_hat / den.psi_hat, grad);
}

}  // namespace mmlin
