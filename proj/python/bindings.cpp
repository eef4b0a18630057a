#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "canvi/checkpoint.hpp"
#include "canvi/conformal.hpp"
#include "canvi/dataset_io.hpp"
#include "canvi/efficiency.hpp"
#include "canvi/errors.hpp"
#include "canvi/mdn.hpp"
#include "canvi/pipeline.hpp"
#include "canvi/report_io.hpp"
#include "canvi/stats.hpp"
#include "canvi/train.hpp"

namespace py = pybind11;
using namespace canvi;

namespace {

py::array_t<double> matrix(const std::vector<double>& flat, std::size_t rows, int cols) {
  py::array_t<double> out({static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(cols)});
  std::copy(flat.begin(), flat.end(), out.mutable_data());
  return out;
}

std::vector<double> row(py::array_t<double, py::array::c_style | py::array::forcecast> a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conformalized amortized posterior toolkit (native core)";

  py::register_exception<SimulationError>(m, "SimulationError");
  py::register_exception<TrainingError>(m, "TrainingError");

  // stats
  m.def("std_normal_cdf", &std_normal_cdf, py::arg("z"));
  m.def("std_normal_quantile", &std_normal_quantile, py::arg("p"));
  m.def(
      "conformal_quantile",
      [](const std::vector<double>& scores, double alpha) {
        return conformal_quantile(scores, alpha);
      },
      py::arg("scores"), py::arg("alpha"));

  // rng
  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"),
           py::arg("stream_id"))
      .def("substream", &RngStream::substream, py::arg("child_id"))
      .def("uniform01", &RngStream::uniform01)
      .def("normal", py::overload_cast<>(&RngStream::normal));

  // tasks
  py::class_<TaskSpec>(m, "TaskSpec")
      .def_readonly("name", &TaskSpec::name)
      .def_readonly("theta_dim", &TaskSpec::theta_dim)
      .def_readonly("x_dim", &TaskSpec::x_dim);

  py::class_<Task, std::shared_ptr<Task>>(m, "Task")
      .def_property_readonly("spec", &Task::spec)
      .def(
          "sample_prior",
          [](const Task& t, RngStream& rng) { return t.sample_prior(rng); },
          py::arg("rng"))
      .def(
          "simulate",
          [](const Task& t, const std::vector<double>& theta, RngStream& rng) {
            return t.simulate(theta, rng);
          },
          py::arg("theta"), py::arg("rng"));

  m.def(
      "make_task",
      [](const std::string& name, std::uint64_t task_seed, double rho) {
        return std::shared_ptr<Task>(make_task(name, task_seed, rho));
      },
      py::arg("name"), py::arg("task_seed") = 0, py::arg("rho") = 0.3);
  m.def("task_names", &task_names);
  m.def(
      "arch_log_likelihood",
      [](const std::vector<double>& theta, const std::vector<double>& y) {
        return arch_log_likelihood(theta, y);
      },
      py::arg("theta"), py::arg("y_series"));

  py::enum_<DatasetRole>(m, "DatasetRole")
      .value("train", DatasetRole::train)
      .value("calibration", DatasetRole::calibration)
      .value("test", DatasetRole::test)
      .value("recalibration", DatasetRole::recalibration);

  py::class_<JointDataset>(m, "JointDataset")
      .def_readonly("task_name", &JointDataset::task_name)
      .def_readonly("theta_dim", &JointDataset::theta_dim)
      .def_readonly("x_dim", &JointDataset::x_dim)
      .def("__len__", &JointDataset::size)
      .def("thetas",
           [](const JointDataset& d) { return matrix(d.thetas, d.size(), d.theta_dim); })
      .def("xs", [](const JointDataset& d) { return matrix(d.xs, d.size(), d.x_dim); })
      .def("fingerprint", &dataset_fingerprint)
      .def("to_csv", &dataset_to_csv);

  m.def(
      "sample_joint",
      [](const Task& task, std::size_t n, const RngStream& rng, DatasetRole role) {
        return sample_joint(task, n, rng, role);
      },
      py::arg("task"), py::arg("n"), py::arg("rng"),
      py::arg("role") = DatasetRole::train);
  m.def("write_dataset_csv", &write_dataset_csv, py::arg("dataset"), py::arg("path"));
  m.def("read_dataset_csv", &read_dataset_csv, py::arg("path"));

  // models
  py::class_<PosteriorModel, std::shared_ptr<PosteriorModel>>(m, "PosteriorModel")
      .def_property_readonly("theta_dim", &PosteriorModel::theta_dim)
      .def_property_readonly("x_dim", &PosteriorModel::x_dim)
      .def_property_readonly("family", &PosteriorModel::family)
      .def(
          "log_density",
          [](const PosteriorModel& model, py::array_t<double> theta,
             py::array_t<double> x) { return model.log_density(row(theta), row(x)); },
          py::arg("theta"), py::arg("x"))
      .def(
          "sample",
          [](const PosteriorModel& model, py::array_t<double> x, RngStream& rng) {
            return model.sample(row(x), rng);
          },
          py::arg("x"), py::arg("rng"));

  m.def(
      "linear_gaussian",
      [](double phi, double variance) {
        return std::shared_ptr<PosteriorModel>(
            std::make_shared<ConditionalLinearGaussian>(
                ConditionalLinearGaussian::scalar(phi, variance)));
      },
      py::arg("phi"), py::arg("variance"));
  m.def(
      "mdn_for_task",
      [](const Task& task, int n_components, int hidden_width, int hidden_depth,
         std::uint64_t seed) {
        return std::shared_ptr<PosteriorModel>(std::make_shared<MixtureDensityNetwork>(
            MixtureDensityNetwork::for_task(task, n_components, hidden_width,
                                            hidden_depth, RngStream(seed, 0))));
      },
      py::arg("task"), py::arg("n_components") = 10, py::arg("hidden_width") = 64,
      py::arg("hidden_depth") = 2, py::arg("seed") = 0);
  m.def(
      "dispersion_scaled",
      [](std::shared_ptr<PosteriorModel> base, double c) {
        return std::shared_ptr<PosteriorModel>(std::make_shared<DispersionScaled>(
            std::shared_ptr<const PosteriorModel>(base), c));
      },
      py::arg("base"), py::arg("c"));
  m.def(
      "train_favi",
      [](std::shared_ptr<PosteriorModel> model, const Task& task, long steps,
         int batch_size, double learning_rate, std::uint64_t seed) {
        auto* mdn = dynamic_cast<MixtureDensityNetwork*>(model.get());
        if (mdn == nullptr) {
          throw std::invalid_argument("train_favi: model is not a mixture network");
        }
        TrainConfig tc;
        tc.steps = steps;
        tc.batch_size = batch_size;
        tc.learning_rate = learning_rate;
        return train_favi(*mdn, task, tc, RngStream(seed, 0)).loss_trace;
      },
      py::arg("model"), py::arg("task"), py::arg("steps") = 5000,
      py::arg("batch_size") = 128, py::arg("learning_rate") = 1e-3,
      py::arg("seed") = 0);
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def(
      "load_model",
      [](const std::string& path) {
        return std::shared_ptr<PosteriorModel>(load_model(path));
      },
      py::arg("path"));

  // conformal
  m.def(
      "score",
      [](const PosteriorModel& model, py::array_t<double> x, py::array_t<double> theta) {
        return score(model, row(x), row(theta));
      },
      py::arg("model"), py::arg("x"), py::arg("theta"));

  py::class_<CalibratedPredictor>(m, "CalibratedPredictor")
      .def_readonly("threshold", &CalibratedPredictor::threshold)
      .def_readonly("alpha", &CalibratedPredictor::alpha)
      .def_readonly("calibration_size", &CalibratedPredictor::calibration_size)
      .def(
          "contains",
          [](const CalibratedPredictor& pred, py::array_t<double> x,
             py::array_t<double> theta) { return contains(pred, row(x), row(theta)); },
          py::arg("x"), py::arg("theta"));

  m.def(
      "calibrate",
      [](std::shared_ptr<PosteriorModel> model, const JointDataset& dc, double alpha) {
        return calibrate(std::shared_ptr<const PosteriorModel>(model), dc, alpha);
      },
      py::arg("model"), py::arg("calibration"), py::arg("alpha"));
  m.def(
      "hdr_threshold",
      [](const PosteriorModel& model, py::array_t<double> x, double alpha, int m_samples,
         RngStream& rng) { return hdr_threshold(model, row(x), alpha, m_samples, rng); },
      py::arg("model"), py::arg("x"), py::arg("alpha"), py::arg("m_samples"),
      py::arg("rng"));

  py::class_<CoveragePoint>(m, "CoveragePoint")
      .def_readonly("level", &CoveragePoint::level)
      .def_readonly("coverage", &CoveragePoint::coverage)
      .def_readonly("std_error", &CoveragePoint::std_error);

  m.def(
      "assess_coverage",
      [](const CalibratedPredictor& pred, const Task& task, std::size_t n_test,
         std::size_t n_batches, std::uint64_t seed) {
        return assess_coverage(pred, task, n_test, n_batches, RngStream(seed, 0));
      },
      py::arg("predictor"), py::arg("task"), py::arg("n_test"), py::arg("n_batches"),
      py::arg("seed"));

  // efficiency
  m.def(
      "region_size_iw",
      [](const PosteriorModel& model, double threshold, py::array_t<double> x,
         std::size_t n_samples, RngStream& rng) {
        return region_size_iw(model, threshold, row(x), n_samples, rng);
      },
      py::arg("model"), py::arg("threshold"), py::arg("x"), py::arg("n_samples"),
      py::arg("rng"));
  m.def(
      "region_size_grid",
      [](const PosteriorModel& model, double threshold, py::array_t<double> x,
         const std::vector<std::pair<double, double>>& bounds, int points_per_dim) {
        std::vector<Interval> ivs;
        ivs.reserve(bounds.size());
        for (const auto& [lo, hi] : bounds) ivs.push_back(Interval{lo, hi});
        return region_size_grid(model, threshold, row(x),
                                GridSpec::uniform(ivs, points_per_dim));
      },
      py::arg("model"), py::arg("threshold"), py::arg("x"), py::arg("bounds"),
      py::arg("points_per_dim") = 100);
  m.def(
      "inverse_efficiency",
      [](const PosteriorModel& model, double threshold, const JointDataset& test,
         std::size_t n_samples, std::uint64_t seed) {
        const auto est =
            inverse_efficiency(model, threshold, test, n_samples, RngStream(seed, 0));
        return py::make_tuple(est.mean_size, est.std_error, est.per_point);
      },
      py::arg("model"), py::arg("threshold"), py::arg("test"), py::arg("n_samples"),
      py::arg("seed"));
  m.def(
      "inverse_efficiency_grid",
      [](const PosteriorModel& model, double threshold, const JointDataset& test,
         const std::vector<std::pair<double, double>>& bounds, int points_per_dim) {
        std::vector<Interval> ivs;
        ivs.reserve(bounds.size());
        for (const auto& [lo, hi] : bounds) ivs.push_back(Interval{lo, hi});
        const auto est = inverse_efficiency_grid(model, threshold, test,
                                                 GridSpec::uniform(ivs, points_per_dim));
        return py::make_tuple(est.mean_size, est.std_error, est.per_point);
      },
      py::arg("model"), py::arg("threshold"), py::arg("test"), py::arg("bounds"),
      py::arg("points_per_dim") = 100);
  m.def("gaussian_analytic_threshold", &gaussian_analytic_threshold, py::arg("rho"),
        py::arg("phi"), py::arg("alpha"));
  m.def("gaussian_analytic_length", &gaussian_analytic_length, py::arg("rho"),
        py::arg("phi"), py::arg("alpha"));
  m.def(
      "counterexample_lengths",
      [](double b, double alpha) {
        const auto len = counterexample_lengths(b, alpha);
        return py::make_tuple(len.l_true, len.l_candidate);
      },
      py::arg("b"), py::arg("alpha"));

  // pipeline
  py::class_<CandidateSpec>(m, "CandidateSpec")
      .def(py::init<>())
      .def_readwrite("family", &CandidateSpec::family)
      .def_readwrite("label", &CandidateSpec::label)
      .def_readwrite("phi", &CandidateSpec::phi)
      .def_readwrite("variance", &CandidateSpec::variance)
      .def_readwrite("n_components", &CandidateSpec::n_components)
      .def_readwrite("hidden_width", &CandidateSpec::hidden_width)
      .def_readwrite("hidden_depth", &CandidateSpec::hidden_depth)
      .def_readwrite("train_steps", &CandidateSpec::train_steps)
      .def_readwrite("train_batch", &CandidateSpec::train_batch)
      .def_readwrite("learning_rate", &CandidateSpec::learning_rate)
      .def_readwrite("dispersion", &CandidateSpec::dispersion);

  py::class_<CanviConfig>(m, "CanviConfig")
      .def(py::init<>())
      .def_readwrite("task", &CanviConfig::task)
      .def_readwrite("task_seed", &CanviConfig::task_seed)
      .def_readwrite("rho", &CanviConfig::rho)
      .def_readwrite("candidates", &CanviConfig::candidates)
      .def_readwrite("alpha", &CanviConfig::alpha)
      .def_readwrite("n_calibration", &CanviConfig::n_calibration)
      .def_readwrite("n_test", &CanviConfig::n_test)
      .def_readwrite("n_mc_samples", &CanviConfig::n_mc_samples)
      .def_readwrite("m_hdr", &CanviConfig::m_hdr)
      .def_readwrite("coverage_batches", &CanviConfig::coverage_batches)
      .def_readwrite("coverage_batch_size", &CanviConfig::coverage_batch_size)
      .def_readwrite("seed", &CanviConfig::seed)
      .def_readwrite("workers", &CanviConfig::workers)
      .def_readwrite("alpha_integral", &CanviConfig::alpha_integral);

  m.def(
      "run_canvi_json",
      [](const CanviConfig& config) {
        const auto report = run_canvi(config);
        return canvi_report_to_json(report, config);
      },
      py::arg("config"));
  m.def(
      "run_canvi_predictor",
      [](const CanviConfig& config) {
        const auto report = run_canvi(config);
        return py::make_tuple(report.selected, report.selected_predictor);
      },
      py::arg("config"));
}
