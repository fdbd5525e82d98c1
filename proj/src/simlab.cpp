#include "mmlin/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace mmlin {

Index DgpSpec::p() const { return case_id == 2 ? 3 : 1; }

void DgpSpec::validate() const {
  if (case_id < 1 || case_id > 5) Fail(ErrorCode::kInvalidArgument, "case must be 1..5");
  if (n < 2) Fail(ErrorCode::kInvalidArgument, "n must be >= 2");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) Fail(ErrorCode::kInvalidArgument, "noise sd must be >= 0");
}

double DgpSpec::f(int d, const Eigen::RowVectorXd& x) const {
  switch (case_id) {
    case 2: {
      static const double b0[3] = {1.0, 1.0, 1.0};
      static const double b1[3] = {0.5, 1.5, 2.0};
      const double* b = d == 1 ? b1 : b0;
      return std::sin(x[0] * b[0] + x[1] * b[1] + x[2] * b[2]);
    }
    case 3:
      return d == 1 ? std::sin(1.0 / (x[0] + 0.05)) : std::cos(1.0 / (x[0] + 0.01));
    default:
      return std::sin(x[0] * (d == 1 ? 2.0 : 1.0));
  }
}

double DgpSpec::propensity(const Eigen::RowVectorXd& x) const {
  switch (case_id) {
    case 4: return 0.75 - 0.25 * std::sqrt(1.0 - x[0]);
    case 5: return x[0];
    default: return 1.0 / (1.0 + std::exp(-x[0]));
  }
}

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SimSample GenerateSample(const DgpSpec& dgp, std::uint64_t seed) {
  dgp.validate();
  const Index n = dgp.n;
  const Index p = dgp.p();
  for (int attempt = 0;; ++attempt) {
    if (attempt > 1000) Fail(ErrorCode::kDataError, "could not draw a sample with both arms");
    boost::random::mt19937_64 rng(SplitMix64(seed + static_cast<std::uint64_t>(attempt)));
    boost::random::uniform_01<double> unif;
    boost::random::normal_distribution<double> norm(0.0, 1.0);
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n), f0(n), f1(n);
    std::vector<int> d(static_cast<std::size_t>(n));
    Index n1 = 0;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < p; ++j) x(i, j) = unif(rng);
      Eigen::RowVectorXd xi = x.row(i);
      const int di = unif(rng) < dgp.propensity(xi) ? 1 : 0;
      const double e0 = dgp.noise_sd * norm(rng);
      const double e1 = dgp.noise_sd * norm(rng);
      f0[i] = dgp.f(0, xi);
      f1[i] = dgp.f(1, xi);
      y[i] = di == 1 ? f1[i] + e1 : f0[i] + e0;
      d[static_cast<std::size_t>(i)] = di;
      n1 += di;
    }
    if (n1 == 0 || n1 == n) continue;
    double att = 0.0;
    for (Index i = 0; i < n; ++i)
      if (d[static_cast<std::size_t>(i)] == 1) att += f1[i] - f0[i];
    return SimSample{Sample(std::move(y), std::move(d), std::move(x)), std::move(f0), std::move(f1),
                     att / static_cast<double>(n1), attempt};
  }
}

namespace {

template <class F>
double Integrate01(F f) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 20, 1e-13);
}

}  // namespace

double TreatedShare(const DgpSpec& dgp) {
  // f_D depends on x1 only.
  Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(dgp.p());
  return Integrate01([&](double t) {
    x[0] = t;
    return dgp.propensity(x);
  });
}

double PopulationAtt(const DgpSpec& dgp) {
  Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(dgp.p());
  auto effect = [&](double t) {
    x[0] = t;
    double e = dgp.propensity(x);
    double inner;
    if (dgp.p() == 1) {
      inner = dgp.f(1, x) - dgp.f(0, x);
    } else {
      inner = Integrate01([&](double u) {
        x[1] = u;
        return Integrate01([&](double v) {
          x[2] = v;
          return dgp.f(1, x) - dgp.f(0, x);
        });
      });
    }
    return e * inner;
  };
  return Integrate01(effect) / TreatedShare(dgp);
}

Eigen::VectorXd OracleRieszAtt(const DgpSpec& dgp, const Sample& sample, double treated_share) {
  Eigen::VectorXd g(sample.n());
  for (Index i = 0; i < sample.n(); ++i) {
    if (sample.arm(i) == 1) {
      g[i] = 1.0 / treated_share;
      continue;
    }
    double e = dgp.propensity(sample.x().row(i));
    if (!(e < 1.0)) Fail(ErrorCode::kInvalidArgument, "control unit with propensity 1 has unbounded representer");
    g[i] = -(e / (1.0 - e)) / treated_share;
  }
  return g;
}

double Discrepancy(const WeightSet& w, const Eigen::VectorXd& gamma) {
  if (w.k.size() != gamma.size()) Fail(ErrorCode::kInvalidArgument, "weights and representer lengths differ");
  const double n = static_cast<double>(gamma.size());
  return (n * w.k - gamma).squaredNorm() / n;
}

double AugmentedEstimate(const WeightSet& w, const Sample& sample, const PreliminaryFit& fit,
                         const FunctionalTarget& target) {
  Eigen::VectorXd h = EvaluateTarget(target, fit);
  if (fit.residuals.size() != sample.n()) Fail(ErrorCode::kInvalidArgument, "fit does not match sample");
  return h.mean() + w.k.dot(fit.residuals);
}

namespace {

struct Task {
  int case_id;
  double C;
  Index n;
  int rep;
};

RepResult RunRep(const SimConfig& cfg, const Task& t, double psi_true, double treated_share) {
  DgpSpec dgp{t.case_id, t.n, cfg.noise_sd};
  RepResult r;
  r.case_id = t.case_id;
  r.C = t.C;
  r.n = t.n;
  r.rep = t.rep;
  r.seed = SplitMix64(cfg.base_seed ^ static_cast<std::uint64_t>(t.rep));
  SimSample sim = GenerateSample(dgp, r.seed);
  const Sample& s = sim.sample;
  r.n1 = s.count_arm(1);
  r.redraws = sim.redraws;
  r.sample_att = sim.sample_att;

  FunctionalTarget target = FunctionalTarget::Att(s);
  ModulusProblem prob = MakeModulusProblem(s, target, LipschitzClass::Identity(t.C, s.p()), cfg.delta_star, s.p() == 1);
  ModulusSolver solver(prob);
  DeltaResolution dn = ResolveDelta(DeltaRule::Rmse(cfg.noise_sd), solver);
  DeltaResolution ds = ResolveDelta(DeltaRule::Fixed(cfg.delta_star), solver);
  const WeightSet& wn = dn.weights;
  const WeightSet& ws = ds.weights;
  r.delta_n = dn.delta;
  r.psi_dn = PointEstimate(wn, s.y());
  r.psi_dstar = PointEstimate(ws, s.y());
  r.maxbias_dn = wn.maxbias;
  r.maxbias_dstar = ws.maxbias;
  Eigen::VectorXd gamma = OracleRieszAtt(dgp, s, treated_share);
  r.dis_dn = Discrepancy(wn, gamma);
  r.dis_dstar = Discrepancy(ws, gamma);
  for (const WeightSet* w : {&wn, &ws}) {
    double sum1 = 0.0, sum0 = 0.0;
    for (Index i = 0; i < s.n(); ++i) (s.arm(i) == 1 ? sum1 : sum0) += w->k[i];
    r.balance_error = std::max({r.balance_error, std::abs(sum1 - 1.0), std::abs(sum0 + 1.0)});
  }

  if (cfg.augmented || cfg.coverage) {
    PreliminaryFit fit = FitRegression(s, cfg.fit);
    if (cfg.augmented) {
      r.aug_dn = AugmentedEstimate(wn, s, fit, target);
      r.aug_dstar = AugmentedEstimate(ws, s, fit, target);
    }
    if (cfg.coverage) {
      VarianceResult v = VarianceEstimate(wn, fit, target, s, r.psi_dn);
      EstimateReport rep;
      rep.psi_hat = r.psi_dn;
      rep.se = v.se;
      rep.maxbias = std::max(wn.maxbias, 0.0);
      ConfidenceIntervals(rep, cfg.alpha, CiStyle::kFoldedNormal);
      r.se_dn = v.se;
      r.cover_naive = rep.ci_naive.contains(psi_true);
      r.cover_biasaware = rep.ci_biasaware.contains(psi_true);
    }
  }
  return r;
}

std::string Num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

SimResult RunMonteCarlo(const SimConfig& cfg) {
  if (cfg.reps < 1) Fail(ErrorCode::kInvalidArgument, "reps must be >= 1");
  if (cfg.cases.empty() || cfg.n_grid.empty() || cfg.c_grid.empty())
    Fail(ErrorCode::kInvalidArgument, "cases, n grid and C grid must be nonempty");
  for (double c : cfg.c_grid)
    if (!(c >= 0.0)) Fail(ErrorCode::kInvalidArgument, "Lipschitz constants must be >= 0");
  std::vector<Task> tasks;
  std::vector<double> truth, share;
  std::vector<std::size_t> case_index;
  for (std::size_t ci = 0; ci < cfg.cases.size(); ++ci) {
    DgpSpec probe{cfg.cases[ci], 2, cfg.noise_sd};
    probe.validate();
    truth.push_back(PopulationAtt(probe));
    share.push_back(TreatedShare(probe));
    for (double C : cfg.c_grid)
      for (Index n : cfg.n_grid) {
        DgpSpec{cfg.cases[ci], n, cfg.noise_sd}.validate();
        for (int rep = 0; rep < cfg.reps; ++rep) {
          tasks.push_back({cfg.cases[ci], C, n, rep});
          case_index.push_back(ci);
        }
      }
  }

  SimResult out;
  out.reps.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      {
        std::lock_guard<std::mutex> lock(error_mu);
        if (error) return;
      }
      try {
        out.reps[i] = RunRep(cfg, tasks[i], truth[case_index[i]], share[case_index[i]]);
      } catch (const Error& e) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error)
          error = std::make_exception_ptr(Error(e.code(), std::string(e.what()) + " [case " +
                                                              std::to_string(tasks[i].case_id) + ", rep " +
                                                              std::to_string(tasks[i].rep) + "]"));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  // Reduction in task order.
  for (std::size_t start = 0; start < tasks.size(); start += static_cast<std::size_t>(cfg.reps)) {
    CellSummary c;
    const RepResult& first = out.reps[start];
    c.case_id = first.case_id;
    c.C = first.C;
    c.n = first.n;
    c.reps = cfg.reps;
    c.psi_true = truth[case_index[start]];
    const double m = cfg.reps;
    for (int k = 0; k < cfg.reps; ++k) {
      const RepResult& r = out.reps[start + static_cast<std::size_t>(k)];
      c.dis_dn += r.dis_dn / m;
      c.dis_dstar += r.dis_dstar / m;
      c.bias_dn += (r.psi_dn - c.psi_true) / m;
      c.bias_dstar += (r.psi_dstar - c.psi_true) / m;
      c.maxbias_dn += r.maxbias_dn / m;
      c.maxbias_dstar += r.maxbias_dstar / m;
      c.mse_dn += (r.psi_dn - c.psi_true) * (r.psi_dn - c.psi_true) / m;
      c.mse_dstar += (r.psi_dstar - c.psi_true) * (r.psi_dstar - c.psi_true) / m;
      c.aug_bias_dn += (r.aug_dn - c.psi_true) / m;
      c.aug_bias_dstar += (r.aug_dstar - c.psi_true) / m;
      c.aug_mse_dn += (r.aug_dn - c.psi_true) * (r.aug_dn - c.psi_true) / m;
      c.aug_mse_dstar += (r.aug_dstar - c.psi_true) * (r.aug_dstar - c.psi_true) / m;
      c.cover_naive += (r.cover_naive ? 1.0 : 0.0) / m;
      c.cover_biasaware += (r.cover_biasaware ? 1.0 : 0.0) / m;
      c.mean_se_dn += r.se_dn / m;
      c.mean_delta_n += r.delta_n / m;
      c.redraws += r.redraws;
    }
    c.rmse_dn = std::sqrt(c.mse_dn);
    c.rmse_dstar = std::sqrt(c.mse_dstar);
    c.aug_rmse_dn = std::sqrt(c.aug_mse_dn);
    c.aug_rmse_dstar = std::sqrt(c.aug_mse_dstar);
    out.cells.push_back(c);
  }
  return out;
}

std::string PanelCsv(const SimResult& r) {
  std::ostringstream os;
  os << "n,Dis_dn,Dis_dstar,bias_dn,maxbias_dn,rmse_dn,bias_dstar,maxbias_dstar,rmse_dstar,case,C,reps,"
        "mse_dn,mse_dstar,cover_naive_dn,cover_biasaware_dn,mean_se_dn,mean_delta_n,psi_true,redraws\n";
  for (const auto& c : r.cells)
    os << c.n << ',' << Num(c.dis_dn) << ',' << Num(c.dis_dstar) << ',' << Num(c.bias_dn) << ',' << Num(c.maxbias_dn) << ',' << Num(c.rmse_dn) << ','
       << Num(c.bias_dstar) << ',' << Num(c.maxbias_dstar) << ',' << Num(c.rmse_dstar) << ',' << c.case_id << ',' << Num(c.C) << ',' << c.reps << ','
       << Num(c.mse_dn) << ','
       << Num(c.mse_dstar) << ',' << Num(c.cover_naive) << ',' << Num(c.cover_biasaware) << ','
       << Num(c.mean_se_dn) << ',' << Num(c.mean_delta_n) << ',' << Num(c.psi_true) << ',' << c.redraws << '\n';
  return os.str();
}

std::string AugmentedCsv(const SimResult& r) {
  std::ostringstream os;
  os << "n,case,C,reps,aug_bias_dn,aug_rmse_dn,aug_bias_dstar,aug_rmse_dstar,aug_mse_dn,aug_mse_dstar\n";
  for (const auto& c : r.cells)
    os << c.n << ',' << c.case_id << ',' << Num(c.C) << ',' << c.reps << ',' << Num(c.aug_bias_dn) << ','
       << Num(c.aug_rmse_dn) << ',' << Num(c.aug_bias_dstar) << ',' << Num(c.aug_rmse_dstar) << ','
       << Num(c.aug_mse_dn) << ',' << Num(c.aug_mse_dstar) << '\n';
  return os.str();
}

std::string RepsCsv(const SimResult& r) {
  std::ostringstream os;
  os << "case,C,n,rep,seed,n1,delta_n,psi_dn,psi_dstar,maxbias_dn,maxbias_dstar,Dis_dn,Dis_dstar,aug_dn,aug_dstar,"
        "se_dn,cover_naive_dn,cover_biasaware_dn,sample_att\n";
  for (const auto& x : r.reps)
    os << x.case_id << ',' << Num(x.C) << ',' << x.n << ',' << x.rep << ',' << x.seed << ',' << x.n1 << ','
       << Num(x.delta_n) << ',' << Num(x.psi_dn) << ',' << Num(x.psi_dstar) << ',' << Num(x.maxbias_dn) << ','
       << Num(x.maxbias_dstar) << ',' << Num(x.dis_dn) << ',' << Num(x.dis_dstar) << ',' << Num(x.aug_dn) << ','
       << Num(x.aug_dstar) << ',' << Num(x.se_dn) << ',' << (x.cover_naive ? 1 : 0) << ','
       << (x.cover_biasaware ? 1 : 0) << ',' << Num(x.sample_att) << '\n';
  return os.str();
}

}  // namespace mmlin
