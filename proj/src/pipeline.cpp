#include "canvi/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "canvi/dataset_io.hpp"
#include "canvi/errors.hpp"
#include "canvi/mdn.hpp"
#include "canvi/parallel.hpp"
#include "canvi/stats.hpp"
#include "canvi/train.hpp"

namespace canvi {

namespace {

// Stream labels under the master seed; datasets and evaluation draws never
// share a stream.
constexpr std::uint64_t kStreamCalibration = 1;
constexpr std::uint64_t kStreamTest = 2;
constexpr std::uint64_t kStreamRecalibration = 3;
constexpr std::uint64_t kStreamTraining = 4;
constexpr std::uint64_t kStreamEfficiency = 5;
constexpr std::uint64_t kStreamInit = 6;
constexpr std::uint64_t kStreamCandCoverage = 7;
constexpr std::uint64_t kStreamSelectedCoverage = 8;
constexpr std::uint64_t kStreamHdr = 9;
constexpr std::uint64_t kStreamSweepTest = 10;
constexpr std::uint64_t kStreamReplicates = 64;

std::string default_label(const CandidateSpec& spec) {
  std::ostringstream out;
  out << spec.family;
  if (spec.family == "clg") {
    out << " phi=" << spec.phi;
  } else {
    out << " K=" << spec.n_components;
    if (spec.train_steps > 0) out << " steps=" << spec.train_steps;
  }
  if (spec.dispersion != 1.0) out << " c=" << spec.dispersion;
  return out.str();
}

std::shared_ptr<const PosteriorModel> build_one(const CanviConfig& config,
                                                const Task& task,
                                                const CandidateSpec& spec,
                                                std::size_t index) {
  std::shared_ptr<const PosteriorModel> model;
  if (spec.family == "clg") {
    const int td = task.spec().theta_dim;
    const int xd = task.spec().x_dim;
    double variance = spec.variance;
    if (std::isnan(variance)) {
      variance = (config.task == "bivariate_gaussian") ? 1.0 - config.rho * config.rho
                                                       : 1.0;
    }
    std::vector<double> slope(static_cast<std::size_t>(td) * xd, 0.0);
    for (int i = 0; i < std::min(td, xd); ++i) slope[i * xd + i] = spec.phi;
    std::vector<double> cov(static_cast<std::size_t>(td) * td, 0.0);
    for (int i = 0; i < td; ++i) cov[i * td + i] = variance;
    model = std::make_shared<ConditionalLinearGaussian>(
        td, xd, std::move(slope), std::vector<double>(td, 0.0), std::move(cov));
  } else if (spec.family == "mdn") {
    auto mdn = std::make_shared<MixtureDensityNetwork>(MixtureDensityNetwork::for_task(
        task, spec.n_components, spec.hidden_width, spec.hidden_depth,
        RngStream(config.seed, kStreamInit).substream(index)));
    if (spec.train_steps > 0) {
      TrainConfig tc;
      tc.steps = spec.train_steps;
      tc.batch_size = spec.train_batch;
      tc.learning_rate = spec.learning_rate;
      train_favi(*mdn, task, tc, RngStream(config.seed, kStreamTraining).substream(index));
    }
    model = mdn;
  } else {
    throw std::invalid_argument("unknown candidate family: " + spec.family);
  }
  if (spec.dispersion != 1.0) {
    model = std::make_shared<DispersionScaled>(model, spec.dispersion);
  }
  return model;
}

void validate(const CanviConfig& config) {
  if (config.candidates.empty()) {
    throw std::invalid_argument("config: candidate list is empty");
  }
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
    throw std::invalid_argument("config: alpha must lie in (0, 1)");
  }
  if (config.n_calibration < 1 || config.n_test < 1 || config.n_mc_samples < 1) {
    throw std::invalid_argument("config: sizes must be >= 1");
  }
}

struct Selection {
  std::vector<CandidateResult> results;
  int selected = -1;
  double recalibrated_threshold = 0.0;
  double recalibrated_efficiency = 0.0;
  double recalibrated_efficiency_se = 0.0;
};

// Calibrate + score every candidate on shared datasets, pick the argmin, and
// recalibrate the winner on the fresh set. The efficiency stream is shared
// across candidates so their per-point substreams coincide.
Selection select_and_recalibrate(const std::vector<BuiltCandidate>& built,
                                 const JointDataset& d_calib,
                                 const JointDataset& d_test,
                                 const JointDataset& d_recal, double alpha,
                                 std::size_t n_mc_samples,
                                 const RngStream& efficiency_rng) {
  Selection sel;
  sel.results.resize(built.size());
  for (std::size_t t = 0; t < built.size(); ++t) {
    auto& res = sel.results[t];
    res.label = built[t].label;
    if (built[t].failed) {
      res.failed = true;
      res.error = built[t].error;
      continue;
    }
    const auto pred = calibrate(built[t].model, d_calib, alpha);
    res.threshold = pred.threshold;
    const auto eff = inverse_efficiency(*built[t].model, pred.threshold, d_test,
                                        n_mc_samples, efficiency_rng);
    res.inverse_efficiency = eff.mean_size;
    res.inverse_efficiency_se = eff.std_error;
  }

  for (std::size_t t = 0; t < sel.results.size(); ++t) {
    if (sel.results[t].failed) continue;
    if (sel.selected < 0 ||
        sel.results[t].inverse_efficiency <
            sel.results[sel.selected].inverse_efficiency) {
      sel.selected = static_cast<int>(t);
    }
  }
  if (sel.selected < 0) {
    throw std::runtime_error("canvi: every candidate failed to build");
  }

  const auto recal = calibrate(built[sel.selected].model, d_recal, alpha);
  sel.recalibrated_threshold = recal.threshold;
  const auto eff_r = inverse_efficiency(*built[sel.selected].model, recal.threshold,
                                        d_test, n_mc_samples, efficiency_rng);
  sel.recalibrated_efficiency = eff_r.mean_size;
  sel.recalibrated_efficiency_se = eff_r.std_error;
  return sel;
}

// Trapezoid integral of the region size over the level grid, reusing one set
// of conditional draws per test point across all levels.
double integrate_efficiency_over_alpha(const PosteriorModel& model,
                                       const JointDataset& d_calib,
                                       const JointDataset& d_test,
                                       std::size_t n_mc_samples, RngStream rng) {
  std::vector<double> calib_scores(d_calib.size());
  for (std::size_t i = 0; i < d_calib.size(); ++i) {
    calib_scores[i] = score(model, d_calib.x(i), d_calib.theta(i));
  }
  std::sort(calib_scores.begin(), calib_scores.end());

  std::vector<std::vector<double>> draws(d_test.size());
  for (std::size_t i = 0; i < d_test.size(); ++i) {
    RngStream point = rng.substream(i);
    draws[i] = model.sample_densities(d_test.x(i), n_mc_samples, point);
    for (double& v : draws[i]) v = 1.0 / v;  // scores of the draws
  }

  const auto alphas = default_levels();  // same grid, read as alpha values
  std::vector<double> sizes(alphas.size());
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const std::size_t k = conformal_rank(calib_scores.size(), alphas[a]);
    const double threshold =
        k > calib_scores.size() ? kInfiniteScore : calib_scores[k - 1];
    double total = 0.0;
    for (const auto& point_draws : draws) {
      double s = 0.0;
      for (double w : point_draws) {
        if (w <= threshold) s += w;
      }
      total += s / static_cast<double>(point_draws.size());
    }
    sizes[a] = total / static_cast<double>(draws.size());
  }
  double integral = 0.0;
  for (std::size_t a = 1; a < alphas.size(); ++a) {
    integral += 0.5 * (sizes[a] + sizes[a - 1]) * (alphas[a] - alphas[a - 1]);
  }
  return integral;
}

}  // namespace

std::unique_ptr<Task> make_task_from_config(const CanviConfig& config) {
  return make_task(config.task, config.task_seed, config.rho);
}

JointDataset reproduce_dataset(const CanviConfig& config, DatasetRole role) {
  const auto task = make_task_from_config(config);
  std::uint64_t stream = kStreamCalibration;
  std::size_t n = config.n_calibration;
  switch (role) {
    case DatasetRole::calibration: break;
    case DatasetRole::test:
      stream = kStreamTest;
      n = config.n_test;
      break;
    case DatasetRole::recalibration: stream = kStreamRecalibration; break;
    case DatasetRole::train:
      throw std::invalid_argument("reproduce_dataset: training batches are per-step");
  }
  return sample_joint(*task, n, RngStream(config.seed, stream), role);
}

std::vector<BuiltCandidate> build_candidates(const CanviConfig& config,
                                             const Task& task) {
  validate(config);
  std::vector<BuiltCandidate> built(config.candidates.size());
  parallel_for(config.candidates.size(), config.workers, [&](std::size_t t) {
    const auto& spec = config.candidates[t];
    built[t].label = spec.label.empty() ? default_label(spec) : spec.label;
    try {
      built[t].model = build_one(config, task, spec, t);
    } catch (const TrainingError& e) {
      built[t].failed = true;
      built[t].error = e.what();
    } catch (const SimulationError& e) {
      built[t].failed = true;
      built[t].error = e.what();
    }
  });
  return built;
}

CanviReport run_canvi(const CanviConfig& config) {
  validate(config);
  const auto task = make_task_from_config(config);
  const auto built = build_candidates(config, *task);

  const auto d_calib = sample_joint(*task, config.n_calibration,
                                    RngStream(config.seed, kStreamCalibration),
                                    DatasetRole::calibration);
  const auto d_test = sample_joint(*task, config.n_test,
                                   RngStream(config.seed, kStreamTest),
                                   DatasetRole::test);
  const auto d_recal = sample_joint(*task, config.n_calibration,
                                    RngStream(config.seed, kStreamRecalibration),
                                    DatasetRole::recalibration);

  auto sel = select_and_recalibrate(built, d_calib, d_test, d_recal, config.alpha,
                                    config.n_mc_samples,
                                    RngStream(config.seed, kStreamEfficiency));

  CanviReport report;
  report.candidates = std::move(sel.results);
  report.selected = sel.selected;
  report.recalibrated_threshold = sel.recalibrated_threshold;
  report.recalibrated_efficiency = sel.recalibrated_efficiency;
  report.recalibrated_efficiency_se = sel.recalibrated_efficiency_se;
  report.seed = config.seed;
  report.selected_model = built[sel.selected].model;
  report.selected_predictor =
      CalibratedPredictor{built[sel.selected].model, sel.recalibrated_threshold,
                          config.alpha, d_recal.size()};

  // Post-hoc coverage on fresh shared batches: per candidate with its
  // calibration-set threshold, and the recalibrated winner separately.
  if (config.coverage_batches > 0 && config.coverage_batch_size > 0) {
    const auto batches =
        draw_test_batches(*task, config.coverage_batch_size, config.coverage_batches,
                          RngStream(config.seed, kStreamCandCoverage));
    for (std::size_t t = 0; t < built.size(); ++t) {
      if (report.candidates[t].failed) continue;
      const CalibratedPredictor pred{built[t].model, report.candidates[t].threshold,
                                     config.alpha, d_calib.size()};
      report.candidates[t].coverage = assess_coverage(pred, batches);
    }
    report.selected_coverage = assess_coverage(
        report.selected_predictor,
        draw_test_batches(*task, config.coverage_batch_size, config.coverage_batches,
                          RngStream(config.seed, kStreamSelectedCoverage)));
  }

  if (config.alpha_integral) {
    report.alpha_integral = integrate_efficiency_over_alpha(
        *report.selected_model, d_calib, d_test,
        std::min<std::size_t>(config.n_mc_samples, 2000),
        RngStream(config.seed, kStreamEfficiency).substream(7777));
  }

  report.fingerprint_calibration = dataset_fingerprint(d_calib);
  report.fingerprint_test = dataset_fingerprint(d_test);
  report.fingerprint_recalibration = dataset_fingerprint(d_recal);
  return report;
}

SlackStats efficiency_slack_check(const CanviConfig& config, std::size_t n_replicates,
                                  std::vector<std::size_t> n_calibration_values) {
  validate(config);
  if (n_replicates < 1) {
    throw std::invalid_argument("efficiency_slack_check: need n_replicates >= 1");
  }
  const auto task = make_task_from_config(config);
  const auto built = build_candidates(config, *task);

  SlackStats stats;
  stats.n_calibration = std::move(n_calibration_values);
  stats.slack.resize(stats.n_calibration.size());
  stats.median_slack.resize(stats.n_calibration.size());
  stats.median_best_efficiency.resize(stats.n_calibration.size());

  for (std::size_t a = 0; a < stats.n_calibration.size(); ++a) {
    const std::size_t n_calib = stats.n_calibration[a];
    std::vector<double> slack(n_replicates);
    std::vector<double> best(n_replicates);
    parallel_for(n_replicates, config.workers, [&](std::size_t r) {
      const RngStream root =
          RngStream(config.seed, kStreamReplicates).substream(a * 1000 + r);
      const auto d_calib = sample_joint(*task, n_calib, root.substream(1),
                                        DatasetRole::calibration);
      const auto d_test = sample_joint(*task, config.n_test, root.substream(2),
                                       DatasetRole::test);
      const auto d_recal = sample_joint(*task, n_calib, root.substream(3),
                                        DatasetRole::recalibration);
      const auto sel =
          select_and_recalibrate(built, d_calib, d_test, d_recal, config.alpha,
                                 config.n_mc_samples, root.substream(5));
      best[r] = sel.results[sel.selected].inverse_efficiency;
      slack[r] = sel.recalibrated_efficiency - best[r];
    });
    auto median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    stats.median_slack[a] = median(slack);
    stats.median_best_efficiency[a] = median(best);
    stats.slack[a] = std::move(slack);
  }
  return stats;
}

std::vector<double> default_levels() {
  std::vector<double> levels;
  for (int i = 1; i <= 19; ++i) levels.push_back(0.05 * i);
  return levels;
}

std::pair<CoverageCurve, CoverageCurve> coverage_sweep(const PosteriorModel& model,
                                                       const Task& task,
                                                       std::span<const double> levels,
                                                       const SweepOptions& options) {
  for (double level : levels) {
    if (!(level > 0.0 && level < 1.0)) {
      throw std::invalid_argument("coverage_sweep: levels must lie in (0, 1)");
    }
  }
  const auto d_calib = sample_joint(task, options.n_calibration,
                                    RngStream(options.seed, kStreamCalibration),
                                    DatasetRole::calibration);
  std::vector<double> calib_scores(d_calib.size());
  for (std::size_t i = 0; i < d_calib.size(); ++i) {
    calib_scores[i] = score(model, d_calib.x(i), d_calib.theta(i));
  }
  std::sort(calib_scores.begin(), calib_scores.end());

  std::vector<double> thresholds(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const double alpha = 1.0 - levels[l];
    const std::size_t k = conformal_rank(calib_scores.size(), alpha);
    thresholds[l] = k > calib_scores.size() ? kInfiniteScore : calib_scores[k - 1];
  }

  const auto batches =
      draw_test_batches(task, options.batch_size, options.n_batches,
                        RngStream(options.seed, kStreamSweepTest));
  const RngStream hdr_root(options.seed, kStreamHdr);

  // hits[batch][level], filled independently per batch; one conditional
  // density sample per test point is shared across all levels.
  const std::size_t n_levels = levels.size();
  std::vector<std::vector<std::size_t>> conformal_hits(
      batches.size(), std::vector<std::size_t>(n_levels, 0));
  std::vector<std::vector<std::size_t>> hdr_hits = conformal_hits;

  parallel_for(batches.size(), options.workers, [&](std::size_t b) {
    const auto& batch = batches[b];
    RngStream batch_rng = hdr_root.substream(b);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto x = batch.x(i);
      const double ld = model.log_density(batch.theta(i), x);
      const double point_score = std::exp(-ld);
      const double point_density = std::exp(ld);

      RngStream point_rng = batch_rng.substream(i);
      auto dens = model.sample_densities(x, options.m_hdr, point_rng);
      std::sort(dens.begin(), dens.end());

      for (std::size_t l = 0; l < n_levels; ++l) {
        if (point_score <= thresholds[l]) ++conformal_hits[b][l];
        const double alpha = 1.0 - levels[l];
        const auto k = static_cast<std::size_t>(std::max<long>(
            1, std::lround(std::ceil(alpha * options.m_hdr - 1e-9))));
        if (point_density >= dens[k - 1]) ++hdr_hits[b][l];
      }
    }
  });

  auto to_curve = [&](const std::vector<std::vector<std::size_t>>& hits,
                      const std::string& kind) {
    CoverageCurve curve;
    curve.predictor_kind = kind;
    curve.task_name = task.spec().name;
    curve.seed = options.seed;
    for (std::size_t l = 0; l < n_levels; ++l) {
      std::vector<double> per_batch(batches.size());
      for (std::size_t b = 0; b < batches.size(); ++b) {
        per_batch[b] = static_cast<double>(hits[b][l]) / batches[b].size();
      }
      curve.points.push_back(
          CoveragePoint{levels[l], mean(per_batch), standard_error(per_batch)});
    }
    return curve;
  };
  return {to_curve(conformal_hits, "conformal"), to_curve(hdr_hits, "hdr")};
}

std::pair<CoverageCurve, CoverageCurve> coverage_sweep(const CanviConfig& config,
                                                       std::span<const double> levels) {
  validate(config);
  const auto task = make_task_from_config(config);
  const auto built = build_candidates(config, *task);
  if (built[0].failed) {
    throw std::runtime_error("coverage_sweep: first candidate failed: " + built[0].error);
  }
  SweepOptions options;
  options.n_calibration = config.n_calibration;
  options.n_batches = config.coverage_batches;
  options.batch_size = config.coverage_batch_size;
  options.m_hdr = config.m_hdr;
  options.seed = config.seed;
  options.workers = config.workers;
  return coverage_sweep(*built[0].model, *task, levels, options);
}

}  // namespace canvi
