// End-to-end checks of the installed command-line tool. The binary path
// arrives via CANVI_CLI_BIN (set by the test harness).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

std::string cli_bin() {
  const char* bin = std::getenv("CANVI_CLI_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

int run(const std::string& args) {
  const std::string cmd = cli_bin() + " " + args + " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::ostringstream out;
  out << f.rdbuf();
  return out.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("canvi_cli_" + std::to_string(::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_config(const fs::path& p, const std::string& body) {
  std::ofstream f(p);
  f << body;
}

}  // namespace

TEST_CASE("simulate writes the documented csv and is seed-stable") {
  TempDir tmp;
  const auto a = tmp.path / "a.csv";
  const auto b = tmp.path / "b.csv";
  CHECK(run("simulate --task two_moons --n 10 --seed 9 --out " + a.string()) == 0);
  CHECK(run("simulate --task two_moons --n 10 --seed 9 --out " + b.string()) == 0);
  const auto text = slurp(a);
  CHECK(text == slurp(b));
  // 2 header lines + 10 rows; 4 columns per row
  int lines = 0;
  for (char ch : text) {
    if (ch == '\n') ++lines;
  }
  CHECK(lines == 12);
  const auto first_row = text.substr(text.find('\n', text.find('\n') + 1) + 1);
  int commas = 0;
  for (char ch : first_row.substr(0, first_row.find('\n'))) {
    if (ch == ',') ++commas;
  }
  CHECK(commas == 3);
}

TEST_CASE("simulate sir produces counts within the binomial range") {
  TempDir tmp;
  const auto out = tmp.path / "sir.csv";
  CHECK(run("simulate --task sir --n 100 --seed 2 --out " + out.string()) == 0);
  std::ifstream f(out);
  std::string line;
  std::getline(f, line);
  std::getline(f, line);
  while (std::getline(f, line)) {
    std::istringstream row(line);
    std::string cell;
    int col = 0;
    while (std::getline(row, cell, ',')) {
      if (col >= 2) {  // x columns
        const double v = std::stod(cell);
        CHECK(v >= 0.0);
        CHECK(v <= 1000.0);
      }
      ++col;
    }
  }
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("simulate --task not_a_task --n 5 --out /tmp/x.csv") == 2);
  CHECK(run("bogus-subcommand") == 2);
  CHECK(run("simulate") == 2);  // missing required --task
  TempDir tmp;
  const auto cfg = tmp.path / "bad.ini";
  write_config(cfg, "[task]\nname = two_moons\nbogus_key = 1\n");
  CHECK(run("canvi --config " + cfg.string()) == 2);
  const auto cfg2 = tmp.path / "nocand.ini";
  write_config(cfg2, "[task]\nname = two_moons\n");
  CHECK(run("canvi --config " + cfg2.string()) == 2);
}

TEST_CASE("io failures exit with code 1") {
  CHECK(run("simulate --task two_moons --n 5 --out /nonexistent_dir/x.csv") == 1);
}

TEST_CASE("training divergence exits with code 3") {
  TempDir tmp;
  const auto cfg = tmp.path / "diverge.ini";
  write_config(cfg,
               "[task]\nname = two_moons\n"
               "[candidates]\ncandidate = mdn K=2 hidden=8 steps=30 lr=1e12\n"
               "[conformal]\nn_calib = 50\nn_test = 5\ns_samples = 50\n"
               "coverage_batches = 1\ncoverage_batch_size = 50\n"
               "[output]\ndir = " + (tmp.path / "out").string() + "\n");
  CHECK(run("canvi --config " + cfg.string()) == 3);
  CHECK(run("train --config " + cfg.string()) == 3);
}

TEST_CASE("canvi run emits a deterministic report with config echo") {
  TempDir tmp;
  const auto cfg = tmp.path / "run.ini";
  write_config(cfg,
               "[task]\nname = bivariate_gaussian\nrho = 0.3\n"
               "[candidates]\ncandidate = clg phi=0.0\ncandidate = clg phi=0.3\n"
               "[conformal]\nalpha = 0.05\nn_calib = 500\nn_test = 20\n"
               "s_samples = 500\ncoverage_batches = 2\ncoverage_batch_size = 200\n"
               "[seed]\nmaster = 5\n"
               "[output]\ndir = " + (tmp.path / "o1").string() + "\n");
  CHECK(run("canvi --config " + cfg.string()) == 0);
  CHECK(run("canvi --config " + cfg.string() + " --out " + (tmp.path / "o2").string()) ==
        0);
  const auto r1 = slurp(tmp.path / "o1" / "report.json");
  const auto r2 = slurp(tmp.path / "o2" / "report.json");
  CHECK(r1 == r2);
  CHECK(r1.find("\"selected\": 1") != std::string::npos);

  // every default appears in the echo
  const auto echo = slurp(tmp.path / "o1" / "config_echo.ini");
  for (const char* key : {"name", "task_seed", "rho", "alpha", "alpha_grid", "n_calib",
                          "n_test", "s_samples", "m_hdr", "coverage_batches",
                          "coverage_batch_size", "steps", "batch", "lr",
                          "checkpoint_every", "dir", "master", "candidate"}) {
    CHECK(echo.find(key) != std::string::npos);
  }
}

TEST_CASE("coverage command writes two csvs and an svg with two curves") {
  TempDir tmp;
  const auto cfg = tmp.path / "cov.ini";
  write_config(cfg,
               "[task]\nname = bivariate_gaussian\nrho = 0.3\n"
               "[candidates]\ncandidate = clg phi=0.3\n"
               "[conformal]\nalpha_grid = 0.25:0.95:0.35\nn_calib = 400\n"
               "m_hdr = 50\ncoverage_batches = 2\ncoverage_batch_size = 300\n"
               "[seed]\nmaster = 6\n"
               "[output]\ndir = " + (tmp.path / "cov_out").string() + "\n");
  CHECK(run("coverage --config " + cfg.string()) == 0);
  const auto conformal = slurp(tmp.path / "cov_out" / "coverage_conformal.csv");
  CHECK(conformal.rfind("level,coverage_mean,coverage_se,predictor_kind,task,seed\n",
                        0) == 0);
  // byte-identical on re-run with the same seed
  CHECK(run("coverage --config " + cfg.string() + " --out " +
            (tmp.path / "cov_out2").string()) == 0);
  CHECK(slurp(tmp.path / "cov_out2" / "coverage_conformal.csv") == conformal);
  CHECK(slurp(tmp.path / "cov_out" / "coverage_hdr.csv").find("hdr") !=
        std::string::npos);
  const auto svg = slurp(tmp.path / "cov_out" / "coverage.svg");
  std::size_t polylines = 0;
  for (auto pos = svg.find("<polyline"); pos != std::string::npos;
       pos = svg.find("<polyline", pos + 1)) {
    ++polylines;
  }
  CHECK(polylines == 2);
  CHECK(svg.find("stroke-dasharray=\"3,3\"") != std::string::npos);  // diagonal
}

TEST_CASE("train writes checkpoints that reload") {
  TempDir tmp;
  const auto cfg = tmp.path / "train.ini";
  write_config(cfg,
               "[task]\nname = two_moons\n"
               "[candidates]\ncandidate = mdn K=2 hidden=8 steps=20 batch=16\n"
               "[train]\ncheckpoint_every = 10\n"
               "[output]\ndir = " + (tmp.path / "t_out").string() + "\n");
  CHECK(run("train --config " + cfg.string()) == 0);
  CHECK(fs::exists(tmp.path / "t_out" / "cand0_step0.ckpt"));
  CHECK(fs::exists(tmp.path / "t_out" / "cand0_step20.ckpt"));
  const auto loss = slurp(tmp.path / "t_out" / "cand0_loss.csv");
  CHECK(loss.rfind("step,loss\n", 0) == 0);
  int rows = -1;
  for (char ch : loss) {
    if (ch == '\n') ++rows;
  }
  CHECK(rows == 20);
}

TEST_CASE("efficiency-trace writes one row per checkpoint") {
  TempDir tmp;
  const auto cfg = tmp.path / "trace.ini";
  write_config(cfg,
               "[task]\nname = two_moons\n"
               "[candidates]\ncandidate = mdn K=2 hidden=8 steps=40 batch=16\n"
               "[conformal]\nn_calib = 200\nn_test = 5\ns_samples = 200\n"
               "[train]\ncheckpoint_every = 20\n"
               "[seed]\nmaster = 8\n"
               "[output]\ndir = " + (tmp.path / "tr_out").string() + "\n");
  CHECK(run("efficiency-trace --config " + cfg.string()) == 0);
  const auto csv = slurp(tmp.path / "tr_out" / "efficiency_trace.csv");
  CHECK(csv.rfind("checkpoint_step,lhat_mean,lhat_se,estimator,task,alpha,seed\n", 0) ==
        0);
  // checkpoints at steps 0, 20, 40
  int rows = -1;
  for (char ch : csv) {
    if (ch == '\n') ++rows;
  }
  CHECK(rows == 3);
  CHECK(csv.find("iw_mc") != std::string::npos);
  CHECK(fs::exists(tmp.path / "tr_out" / "efficiency_trace.svg"));
}

TEST_CASE("gaussian-verify emits the analytic column") {
  TempDir tmp;
  CHECK(run("gaussian-verify --rho 0.3 --alpha 0.05 --phi-min 0.25 --phi-max 0.35 "
            "--phi-step 0.05 --out " + (tmp.path / "gv").string()) == 0);
  const auto csv = slurp(tmp.path / "gv" / "gaussian_verify.csv");
  CHECK(csv.rfind("phi,analytic_length,mc_length,mc_se\n", 0) == 0);
  CHECK(csv.find("3.739372") != std::string::npos);  // analytic at phi = rho
  CHECK(fs::exists(tmp.path / "gv" / "gaussian_verify.svg"));
}

TEST_CASE("counterexample prints the exact pair and rejects a bad window") {
  const std::string out_file = "/tmp/canvi_counter_out.txt";
  const std::string cmd = cli_bin() +
                          " counterexample --b 50 --alpha 0.2 > " + out_file +
                          " 2>/dev/null";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  const auto text = slurp(out_file);
  CHECK(text.find("l_true") != std::string::npos);
  CHECK(text.find("50") != std::string::npos);
  CHECK(text.find("25") != std::string::npos);
  fs::remove(out_file);
  CHECK(run("counterexample --b 50 --alpha 0.3") == 2);
}

TEST_CASE("output root env var anchors relative paths") {
  TempDir tmp;
  const std::string cmd = "CANVI_OUTPUT_ROOT=" + tmp.path.string() + " " + cli_bin() +
                          " simulate --task two_moons --n 3 --seed 1 --out rel.csv "
                          "> /dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(fs::exists(tmp.path / "rel.csv"));
}
