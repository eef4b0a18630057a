#include "canvi/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "canvi/dataset_io.hpp"
#include "json.hpp"

namespace canvi {

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string coverage_curve_to_csv(const CoverageCurve& curve) {
  std::ostringstream out;
  out << "level,coverage_mean,coverage_se,predictor_kind,task,seed\n";
  for (const auto& p : curve.points) {
    out << format_full(p.level) << "," << format_full(p.coverage) << ","
        << format_full(p.std_error) << "," << curve.predictor_kind << ","
        << curve.task_name << "," << curve.seed << "\n";
  }
  return out.str();
}

std::string efficiency_trace_to_csv(const std::vector<EfficiencyTraceRow>& rows) {
  std::ostringstream out;
  out << "checkpoint_step,lhat_mean,lhat_se,estimator,task,alpha,seed\n";
  for (const auto& r : rows) {
    out << r.checkpoint_step << "," << format_full(r.lhat_mean) << ","
        << format_full(r.lhat_se) << "," << r.estimator << "," << r.task << ","
        << format_full(r.alpha) << "," << r.seed << "\n";
  }
  return out.str();
}

std::string gaussian_verify_to_csv(const std::vector<GaussianVerifyRow>& rows) {
  std::ostringstream out;
  out << "phi,analytic_length,mc_length,mc_se\n";
  for (const auto& r : rows) {
    out << format_full(r.phi) << "," << format_full(r.analytic_length) << ","
        << format_full(r.mc_length) << "," << format_full(r.mc_se) << "\n";
  }
  return out.str();
}

namespace {

nlohmann::json candidate_spec_json(const CandidateSpec& spec) {
  nlohmann::json j;
  j["family"] = spec.family;
  j["label"] = spec.label;
  j["phi"] = spec.phi;
  if (std::isnan(spec.variance)) {
    j["variance"] = "task-default";
  } else {
    j["variance"] = spec.variance;
  }
  j["n_components"] = spec.n_components;
  j["hidden_width"] = spec.hidden_width;
  j["hidden_depth"] = spec.hidden_depth;
  j["train_steps"] = spec.train_steps;
  j["train_batch"] = spec.train_batch;
  j["learning_rate"] = spec.learning_rate;
  j["dispersion"] = spec.dispersion;
  return j;
}

nlohmann::json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

std::string canvi_report_to_json(const CanviReport& report, const CanviConfig& config) {
  nlohmann::json j;
  auto& cfg = j["config"];
  cfg["task"] = config.task;
  cfg["task_seed"] = config.task_seed;
  cfg["rho"] = config.rho;
  cfg["alpha"] = config.alpha;
  cfg["n_calibration"] = config.n_calibration;
  cfg["n_test"] = config.n_test;
  cfg["n_mc_samples"] = config.n_mc_samples;
  cfg["m_hdr"] = config.m_hdr;
  cfg["coverage_batches"] = config.coverage_batches;
  cfg["coverage_batch_size"] = config.coverage_batch_size;
  cfg["seed"] = config.seed;
  cfg["workers"] = config.workers;
  cfg["alpha_integral"] = config.alpha_integral;
  cfg["candidates"] = nlohmann::json::array();
  for (const auto& spec : config.candidates) {
    cfg["candidates"].push_back(candidate_spec_json(spec));
  }

  j["candidates"] = nlohmann::json::array();
  for (const auto& c : report.candidates) {
    nlohmann::json cj;
    cj["label"] = c.label;
    cj["failed"] = c.failed;
    if (c.failed) {
      cj["error"] = c.error;
    } else {
      cj["threshold"] = finite_or_string(c.threshold);
      cj["inverse_efficiency"] = c.inverse_efficiency;
      cj["inverse_efficiency_se"] = c.inverse_efficiency_se;
      cj["coverage"] = c.coverage.coverage;
      cj["coverage_se"] = c.coverage.std_error;
    }
    j["candidates"].push_back(cj);
  }
  j["selected"] = report.selected;
  j["recalibrated_threshold"] = finite_or_string(report.recalibrated_threshold);
  j["recalibrated_efficiency"] = report.recalibrated_efficiency;
  j["recalibrated_efficiency_se"] = report.recalibrated_efficiency_se;
  j["selected_coverage"] = report.selected_coverage.coverage;
  j["selected_coverage_se"] = report.selected_coverage.std_error;
  if (report.alpha_integral) j["alpha_integral"] = *report.alpha_integral;
  j["fingerprints"] = {{"calibration", report.fingerprint_calibration},
                       {"test", report.fingerprint_test},
                       {"recalibration", report.fingerprint_recalibration}};
  j["seed"] = report.seed;
  // candidates are scored on one shared test set with shared per-point
  // sampling substreams, so their efficiencies are directly comparable
  j["shared_efficiency_streams"] = true;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kMarginL = 70, kMarginR = 20, kMarginT = 40, kMarginB = 55;

struct Range {
  double lo, hi;
  double map(double v, double pix_lo, double pix_hi) const {
    const double t = (v - lo) / (hi - lo);
    return pix_lo + t * (pix_hi - pix_lo);
  }
};

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

std::string render_svg(const PlotSpec& plot) {
  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  bool first = true;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double err = i < s.y_err.size() ? s.y_err[i] : 0.0;
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (first) {
        x_lo = x_hi = s.x[i];
        y_lo = s.y[i] - err;
        y_hi = s.y[i] + err;
        first = false;
      } else {
        x_lo = std::min(x_lo, s.x[i]);
        x_hi = std::max(x_hi, s.x[i]);
        y_lo = std::min(y_lo, s.y[i] - err);
        y_hi = std::max(y_hi, s.y[i] + err);
      }
    }
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1;
  if (y_hi <= y_lo) y_hi = y_lo + 1;
  const double y_pad = 0.05 * (y_hi - y_lo);
  const Range xr{x_lo, x_hi};
  const Range yr{y_lo - y_pad, y_hi + y_pad};
  const double px_lo = kMarginL, px_hi = kWidth - kMarginR;
  const double py_lo = kHeight - kMarginB, py_hi = kMarginT;  // y grows upward

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << plot.title << "</text>\n";

  // axes
  out << "<line x1=\"" << px_lo << "\" y1=\"" << py_lo << "\" x2=\"" << px_hi
      << "\" y2=\"" << py_lo << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << px_lo << "\" y1=\"" << py_lo << "\" x2=\"" << px_lo
      << "\" y2=\"" << py_hi << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = x_lo + (x_hi - x_lo) * i / 5.0;
    const double px = xr.map(fx, px_lo, px_hi);
    out << "<line x1=\"" << px << "\" y1=\"" << py_lo << "\" x2=\"" << px
        << "\" y2=\"" << py_lo + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px << "\" y=\"" << py_lo + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt_tick(fx) << "</text>\n";
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    const double py = yr.map(fy, py_lo, py_hi);
    out << "<line x1=\"" << px_lo - 5 << "\" y1=\"" << py << "\" x2=\"" << px_lo
        << "\" y2=\"" << py << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px_lo - 8 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt_tick(fy) << "</text>\n";
  }
  out << "<text x=\"" << (px_lo + px_hi) / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << plot.x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << (py_lo + py_hi) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 18 " << (py_lo + py_hi) / 2 << ")\">"
      << plot.y_label << "</text>\n";

  if (plot.diagonal) {
    const double lo = std::max(xr.lo, yr.lo);
    const double hi = std::min(xr.hi, yr.hi);
    if (hi > lo) {
      out << "<line x1=\"" << xr.map(lo, px_lo, px_hi) << "\" y1=\""
          << yr.map(lo, py_lo, py_hi) << "\" x2=\"" << xr.map(hi, px_lo, px_hi)
          << "\" y2=\"" << yr.map(hi, py_lo, py_hi)
          << "\" stroke=\"#888888\" stroke-dasharray=\"3,3\"/>\n";
    }
  }

  int legend_row = 0;
  for (const auto& s : plot.series) {
    std::ostringstream pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      pts << xr.map(s.x[i], px_lo, px_hi) << "," << yr.map(s.y[i], py_lo, py_hi)
          << " ";
    }
    out << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\""
        << s.color << "\" stroke-width=\"1.5\""
        << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
    for (std::size_t i = 0; i < s.y_err.size() && i < s.x.size(); ++i) {
      if (s.y_err[i] <= 0.0) continue;
      const double px = xr.map(s.x[i], px_lo, px_hi);
      const double y1 = yr.map(s.y[i] - s.y_err[i], py_lo, py_hi);
      const double y2 = yr.map(s.y[i] + s.y_err[i], py_lo, py_hi);
      out << "<line x1=\"" << px << "\" y1=\"" << y1 << "\" x2=\"" << px
          << "\" y2=\"" << y2 << "\" stroke=\"" << s.color << "\"/>\n";
    }
    const double ly = kMarginT + 14 * legend_row++;
    out << "<line x1=\"" << px_hi - 150 << "\" y1=\"" << ly << "\" x2=\""
        << px_hi - 130 << "\" y2=\"" << ly << "\" stroke=\"" << s.color
        << "\" stroke-width=\"1.5\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "")
        << "/>\n";
    out << "<text x=\"" << px_hi - 125 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace canvi
