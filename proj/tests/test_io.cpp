#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <fstream>

#include "canvi/checkpoint.hpp"
#include "canvi/dataset_io.hpp"
#include "canvi/errors.hpp"
#include "canvi/mdn.hpp"
#include "canvi/pipeline.hpp"
#include "canvi/report_io.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace canvi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("canvi_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("dataset csv round-trip is bit-exact") {
  const auto task = make_task("lotka_volterra");
  JointDataset ds;
  // find a seed whose 20 draws all integrate cleanly
  for (std::uint64_t s = 0;; ++s) {
    try {
      ds = sample_joint(*task, 20, RngStream(100, s), DatasetRole::test);
      break;
    } catch (const SimulationError&) {
    }
  }
  TempDir tmp;
  const auto path = tmp.file("lv.csv");
  write_dataset_csv(ds, path);
  const auto back = read_dataset_csv(path);
  CHECK(back.task_name == ds.task_name);
  CHECK(back.role == ds.role);
  CHECK(back.seed == ds.seed);
  CHECK(back.theta_dim == ds.theta_dim);
  CHECK(back.x_dim == ds.x_dim);
  CHECK(back.thetas == ds.thetas);
  CHECK(back.xs == ds.xs);
  CHECK(dataset_fingerprint(back) == dataset_fingerprint(ds));
}

TEST_CASE("fingerprints differ across datasets and are stable") {
  const auto task = make_task("two_moons");
  const auto a = sample_joint(*task, 10, RngStream(101, 0), DatasetRole::test);
  const auto b = sample_joint(*task, 10, RngStream(101, 1), DatasetRole::test);
  CHECK(dataset_fingerprint(a) == dataset_fingerprint(a));
  CHECK(dataset_fingerprint(a) != dataset_fingerprint(b));
  CHECK(dataset_fingerprint(a).size() == 64);
}

TEST_CASE("sha256 known answer") {
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("mdn checkpoint round-trip reproduces log densities bit-exactly") {
  const auto task = make_task("two_moons");
  const MixtureDensityNetwork mdn =
      MixtureDensityNetwork::for_task(*task, 7, 24, 2, RngStream(102, 0));
  TempDir tmp;
  const auto path = tmp.file("mdn.ckpt");
  save_model(mdn, path);
  const auto loaded = load_model(path);
  REQUIRE(loaded != nullptr);
  CHECK(loaded->family() == "mdn");
  RngStream rng(102, 1);
  for (int i = 0; i < 100; ++i) {
    RngStream sub = rng.substream(i);
    const auto theta = task->sample_prior(sub);
    const auto x = task->simulate(theta, sub);
    CHECK(loaded->log_density(theta, x) == mdn.log_density(theta, x));
  }
}

TEST_CASE("clg and dispersion checkpoints round-trip") {
  const ConditionalLinearGaussian clg(2, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6},
                                      {0.7, -0.7}, {1.0, 0.2, 0.2, 2.0});
  TempDir tmp;
  save_model(clg, tmp.file("clg.ckpt"));
  const auto loaded = load_model(tmp.file("clg.ckpt"));
  const std::vector<double> theta = {0.3, -0.8};
  const std::vector<double> x = {1.0, 2.0, 3.0};
  CHECK(loaded->log_density(theta, x) == clg.log_density(theta, x));

  auto base = std::make_shared<ConditionalLinearGaussian>(clg);
  const DispersionScaled wide(base, 2.0);
  save_model(wide, tmp.file("disp.ckpt"));
  const auto loaded_wide = load_model(tmp.file("disp.ckpt"));
  CHECK(loaded_wide->log_density(theta, x) == wide.log_density(theta, x));
}

TEST_CASE("load_model rejects malformed files") {
  TempDir tmp;
  const auto path = tmp.file("junk.ckpt");
  std::ofstream(path) << "not a checkpoint\n";
  CHECK_THROWS_AS(load_model(path), std::runtime_error);
  CHECK_THROWS_AS(load_model(tmp.file("missing.ckpt")), std::runtime_error);
}

TEST_CASE("report json echoes every config default and parses") {
  CanviConfig cfg;
  cfg.task = "bivariate_gaussian";
  cfg.n_calibration = 500;
  cfg.n_test = 20;
  cfg.n_mc_samples = 500;
  cfg.coverage_batches = 2;
  cfg.coverage_batch_size = 500;
  CandidateSpec spec;
  spec.family = "clg";
  spec.phi = 0.3;
  cfg.candidates = {spec};
  const auto report = run_canvi(cfg);
  const auto text = canvi_report_to_json(report, cfg);
  const auto j = nlohmann::json::parse(text);
  for (const char* key :
       {"task", "task_seed", "rho", "alpha", "n_calibration", "n_test",
        "n_mc_samples", "m_hdr", "coverage_batches", "coverage_batch_size", "seed",
        "workers", "alpha_integral", "candidates"}) {
    CHECK(j["config"].contains(key));
  }
  for (const char* key :
       {"family", "label", "phi", "variance", "n_components", "hidden_width",
        "hidden_depth", "train_steps", "train_batch", "learning_rate", "dispersion"}) {
    CHECK(j["config"]["candidates"][0].contains(key));
  }
  CHECK(j["selected"] == 0);
  CHECK(j["fingerprints"]["calibration"].get<std::string>().size() == 64);
}

TEST_CASE("coverage csv has the documented columns and is deterministic") {
  CoverageCurve curve;
  curve.predictor_kind = "conformal";
  curve.task_name = "two_moons";
  curve.seed = 3;
  curve.points = {{0.9, 0.91, 0.004}, {0.95, 0.94, 0.003}};
  const auto csv = coverage_curve_to_csv(curve);
  CHECK(csv.rfind("level,coverage_mean,coverage_se,predictor_kind,task,seed\n", 0) == 0);
  CHECK(csv == coverage_curve_to_csv(curve));
  CHECK(csv.find("two_moons") != std::string::npos);
}

TEST_CASE("svg render contains the expected elements") {
  PlotSpec plot;
  plot.title = "coverage";
  plot.x_label = "nominal";
  plot.y_label = "empirical";
  plot.diagonal = true;
  PlotSeries a;
  a.label = "conformal";
  a.x = {0.1, 0.5, 0.9};
  a.y = {0.12, 0.51, 0.9};
  a.y_err = {0.01, 0.01, 0.01};
  PlotSeries b = a;
  b.label = "hdr";
  b.dashed = true;
  b.y = {0.08, 0.4, 0.8};
  plot.series = {a, b};
  const auto svg = render_svg(plot);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  // two data polylines
  std::size_t count = 0;
  for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos;
       pos = svg.find("<polyline", pos + 1)) {
    ++count;
  }
  CHECK(count == 2);
  CHECK(svg.find("stroke-dasharray=\"3,3\"") != std::string::npos);  // diagonal
  CHECK(svg.find("conformal") != std::string::npos);
}

TEST_CASE("efficiency trace csv format") {
  std::vector<EfficiencyTraceRow> rows = {
      {0, 3.2, 0.1, "iw_mc", "two_moons", 0.05, 9},
      {500, 1.1, 0.05, "iw_mc", "two_moons", 0.05, 9}};
  const auto csv = efficiency_trace_to_csv(rows);
  CHECK(csv.rfind("checkpoint_step,lhat_mean,lhat_se,estimator,task,alpha,seed\n", 0) ==
        0);
  CHECK(csv.find("\n500,") != std::string::npos);
}
