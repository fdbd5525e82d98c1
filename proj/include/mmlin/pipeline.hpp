#pragma once

#include <limits>
#include <string>
#include <vector>

#include "mmlin/inference.hpp"

namespace mmlin {

// Everything `estimate`, `sweep-c` and `modulus-curve` need beyond the sample.
struct EstimateConfig {
  TargetKind target = TargetKind::kAtt;
  double lipschitz_c = 1.0;
  Eigen::VectorXd a_diag;  // empty = identity
  DeltaMode delta_rule = DeltaMode::kRmse;
  double delta = 2.0;
  double alpha = 0.05;
  double beta = 0.99;
  double sigma_bar = std::numeric_limits<double>::quiet_NaN();  // NaN = from the preliminary fit
  CiStyle style = CiStyle::kFoldedNormal;
  FitSpec fit;
  bool prune_1d = true;
  int max_iterations = ToleranceSpec{}.max_iterations;
  int threads = 1;
};

void ValidateConfig(const EstimateConfig& cfg, const Sample& sample);

struct EstimateOutput {
  EstimateReport report;
  WeightSet weights;
  double sigma_bar = 0.0;
  Index n = 0;
  Index n1 = 0;
};

EstimateOutput Estimate(const Sample& sample, const EstimateConfig& cfg);

// Same, reusing a fit of this sample (the fit does not depend on C).
EstimateOutput EstimateWithFit(const Sample& sample, const EstimateConfig& cfg, const PreliminaryFit& fit);

constexpr int kReportSchemaVersion = 1;

std::string ReportJson(const EstimateOutput& out, const EstimateConfig& cfg);
std::string WeightsCsv(const Sample& sample, const WeightSet& w);

// "lo:hi:steps" -> steps evenly spaced values (steps = 1 gives lo).
std::vector<double> ParseGridSpec(const std::string& spec);

struct SweepRow {
  double C = 0.0;
  bool ok = false;
  std::string error;
  EstimateReport report;
};

// One row per C; a failing C is recorded in its row and the sweep continues.
std::vector<SweepRow> SweepC(const Sample& sample, const EstimateConfig& cfg, const std::vector<double>& c_grid);

std::string SweepCsv(const std::vector<SweepRow>& rows);
std::string SweepSvg(const std::vector<SweepRow>& rows);

// The modulus on a delta grid at the configured C and target.
std::vector<CurvePoint> ModulusCurve(const Sample& sample, const EstimateConfig& cfg, const std::vector<double>& deltas);
std::string CurveCsv(const std::vector<CurvePoint>& pts);

}  // namespace mmlin
