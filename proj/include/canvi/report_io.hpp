#pragma once

#include <string>
#include <vector>

#include "canvi/conformal.hpp"
#include "canvi/pipeline.hpp"

namespace canvi {

void write_text_file(const std::string& path, const std::string& content);

/// Columns: level, coverage_mean, coverage_se, predictor_kind, task, seed.
std::string coverage_curve_to_csv(const CoverageCurve& curve);

/// Columns: checkpoint_step, lhat_mean, lhat_se, estimator, task, alpha, seed.
struct EfficiencyTraceRow {
  long checkpoint_step = 0;
  double lhat_mean = 0.0;
  double lhat_se = 0.0;
  std::string estimator;
  std::string task;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};
std::string efficiency_trace_to_csv(const std::vector<EfficiencyTraceRow>& rows);

/// Columns: phi, analytic_length, mc_length, mc_se.
struct GaussianVerifyRow {
  double phi = 0.0;
  double analytic_length = 0.0;
  double mc_length = 0.0;
  double mc_se = 0.0;
};
std::string gaussian_verify_to_csv(const std::vector<GaussianVerifyRow>& rows);

/// Full-precision JSON document: config echo (every default made explicit),
/// per-candidate results, selection, recalibration, coverage, dataset
/// fingerprints.
std::string canvi_report_to_json(const CanviReport& report, const CanviConfig& config);

// Minimal self-contained SVG line plots (axes, ticks, polylines, error bars).
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> y_err;  // empty = no error bars
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  bool diagonal = false;  // y = x reference line
};

std::string render_svg(const PlotSpec& plot);

}  // namespace canvi
