// Command-line front end: experiment configuration, execution, and emission
// of tabular/plot artifacts (CSV, JSON, SVG).
//
// Exit codes: 0 success, 1 IO failure, 2 usage or config error, 3 numeric or
// training failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "canvi/checkpoint.hpp"
#include "canvi/conformal.hpp"
#include "canvi/dataset_io.hpp"
#include "canvi/efficiency.hpp"
#include "canvi/errors.hpp"
#include "canvi/mdn.hpp"
#include "canvi/pipeline.hpp"
#include "canvi/report_io.hpp"
#include "canvi/train.hpp"

namespace fs = std::filesystem;
using namespace canvi;

namespace {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Config file: INI-style sections with key = value lines; '#' starts a
// comment; the [candidates] section accepts repeated `candidate =` entries.
// Unknown sections or keys are rejected.

struct FileConfig {
  CanviConfig canvi;
  TrainConfig train;
  std::string output_dir = "out";
  std::vector<double> levels;  // empty = default grid
};

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for " + key + ": " + v);
  }
}

long parse_long(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const long d = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value for " + key + ": " + v);
  }
}

CandidateSpec parse_candidate(const std::string& descriptor,
                              const TrainConfig& train_defaults) {
  const auto tokens = split_ws(descriptor);
  if (tokens.empty()) throw ConfigError("config: empty candidate descriptor");
  CandidateSpec spec;
  spec.family = tokens[0];
  if (spec.family != "mdn" && spec.family != "clg") {
    throw ConfigError("config: unknown candidate family: " + spec.family);
  }
  spec.train_steps = train_defaults.steps;
  spec.train_batch = train_defaults.batch_size;
  spec.learning_rate = train_defaults.learning_rate;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: candidate option must be key=value: " + tokens[i]);
    }
    const std::string key = tokens[i].substr(0, eq);
    const std::string value = tokens[i].substr(eq + 1);
    if (key == "K") {
      spec.n_components = static_cast<int>(parse_long(value, key));
    } else if (key == "hidden") {
      spec.hidden_width = static_cast<int>(parse_long(value, key));
    } else if (key == "depth") {
      spec.hidden_depth = static_cast<int>(parse_long(value, key));
    } else if (key == "steps") {
      spec.train_steps = parse_long(value, key);
    } else if (key == "batch") {
      spec.train_batch = static_cast<int>(parse_long(value, key));
    } else if (key == "lr") {
      spec.learning_rate = parse_double(value, key);
    } else if (key == "c") {
      spec.dispersion = parse_double(value, key);
    } else if (key == "phi") {
      spec.phi = parse_double(value, key);
    } else if (key == "variance") {
      spec.variance = parse_double(value, key);
    } else if (key == "label") {
      spec.label = value;
    } else {
      throw ConfigError("config: unknown candidate option: " + key);
    }
  }
  return spec;
}

std::vector<double> parse_levels(const std::string& v) {
  // "lo:hi:step" or a comma-separated list
  std::vector<double> levels;
  if (v.find(':') != std::string::npos) {
    const auto a = v.find(':');
    const auto b = v.find(':', a + 1);
    if (b == std::string::npos) throw ConfigError("config: alpha_grid needs lo:hi:step");
    const double lo = parse_double(v.substr(0, a), "alpha_grid");
    const double hi = parse_double(v.substr(a + 1, b - a - 1), "alpha_grid");
    const double step = parse_double(v.substr(b + 1), "alpha_grid");
    if (!(step > 0.0)) throw ConfigError("config: alpha_grid step must be positive");
    for (double lvl = lo; lvl <= hi + 1e-12; lvl += step) levels.push_back(lvl);
  } else {
    std::istringstream in(v);
    std::string tok;
    while (std::getline(in, tok, ',')) levels.push_back(parse_double(tok, "alpha_grid"));
  }
  return levels;
}

FileConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  FileConfig cfg;
  std::vector<std::string> candidate_lines;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config: malformed section at line " + std::to_string(line_no));
      }
      section = line.substr(1, line.size() - 2);
      if (section != "task" && section != "candidates" && section != "conformal" &&
          section != "train" && section != "output" && section != "seed") {
        throw ConfigError("config: unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: expected key = value at line " + std::to_string(line_no));
    }
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));

    if (section == "task") {
      if (key == "name") {
        cfg.canvi.task = value;
      } else if (key == "task_seed") {
        cfg.canvi.task_seed = static_cast<std::uint64_t>(parse_long(value, key));
      } else if (key == "rho") {
        cfg.canvi.rho = parse_double(value, key);
      } else {
        throw ConfigError("config: unknown key in [task]: " + key);
      }
    } else if (section == "candidates") {
      if (key != "candidate") {
        throw ConfigError("config: unknown key in [candidates]: " + key);
      }
      candidate_lines.push_back(value);
    } else if (section == "conformal") {
      if (key == "alpha") {
        cfg.canvi.alpha = parse_double(value, key);
      } else if (key == "alpha_grid") {
        cfg.levels = parse_levels(value);
      } else if (key == "n_calib") {
        cfg.canvi.n_calibration = static_cast<std::size_t>(parse_long(value, key));
      } else if (key == "n_test") {
        cfg.canvi.n_test = static_cast<std::size_t>(parse_long(value, key));
      } else if (key == "s_samples") {
        cfg.canvi.n_mc_samples = static_cast<std::size_t>(parse_long(value, key));
      } else if (key == "m_hdr") {
        cfg.canvi.m_hdr = static_cast<int>(parse_long(value, key));
      } else if (key == "coverage_batches") {
        cfg.canvi.coverage_batches = static_cast<std::size_t>(parse_long(value, key));
      } else if (key == "coverage_batch_size") {
        cfg.canvi.coverage_batch_size = static_cast<std::size_t>(parse_long(value, key));
      } else if (key == "alpha_integral") {
        cfg.canvi.alpha_integral = (value == "true" || value == "1");
      } else {
        throw ConfigError("config: unknown key in [conformal]: " + key);
      }
    } else if (section == "train") {
      if (key == "steps") {
        cfg.train.steps = parse_long(value, key);
      } else if (key == "batch") {
        cfg.train.batch_size = static_cast<int>(parse_long(value, key));
      } else if (key == "lr") {
        cfg.train.learning_rate = parse_double(value, key);
      } else if (key == "checkpoint_every") {
        cfg.train.checkpoint_every = parse_long(value, key);
      } else {
        throw ConfigError("config: unknown key in [train]: " + key);
      }
    } else if (section == "output") {
      if (key == "dir") {
        cfg.output_dir = value;
      } else {
        throw ConfigError("config: unknown key in [output]: " + key);
      }
    } else if (section == "seed") {
      if (key == "master") {
        cfg.canvi.seed = static_cast<std::uint64_t>(parse_long(value, key));
      } else {
        throw ConfigError("config: unknown key in [seed]: " + key);
      }
    } else {
      throw ConfigError("config: key outside any section at line " +
                        std::to_string(line_no));
    }
  }
  for (const auto& c : candidate_lines) {
    cfg.canvi.candidates.push_back(parse_candidate(c, cfg.train));
  }
  return cfg;
}

// Output path resolution: relative paths land under CANVI_OUTPUT_ROOT when
// that variable is set.
fs::path resolve_out_path(const std::string& p_in) {
  fs::path p(p_in);
  if (p.is_relative()) {
    if (const char* root = std::getenv("CANVI_OUTPUT_ROOT")) {
      p = fs::path(root) / p;
    }
  }
  return p;
}

fs::path prepare_out_dir(const std::string& dir) {
  const fs::path p = resolve_out_path(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + p.string());
  return p;
}

// Echo of the effective configuration with every default made explicit.
std::string config_echo(const FileConfig& cfg) {
  std::ostringstream out;
  out << "[task]\n"
      << "name = " << cfg.canvi.task << "\n"
      << "task_seed = " << cfg.canvi.task_seed << "\n"
      << "rho = " << cfg.canvi.rho << "\n\n";
  out << "[candidates]\n";
  for (const auto& c : cfg.canvi.candidates) {
    out << "candidate = " << c.family;
    if (c.family == "clg") {
      out << " phi=" << c.phi;
      if (!std::isnan(c.variance)) out << " variance=" << c.variance;
    } else {
      out << " K=" << c.n_components << " hidden=" << c.hidden_width
          << " depth=" << c.hidden_depth << " steps=" << c.train_steps
          << " batch=" << c.train_batch << " lr=" << c.learning_rate;
    }
    if (c.dispersion != 1.0) out << " c=" << c.dispersion;
    if (!c.label.empty()) out << " label=" << c.label;
    out << "\n";
  }
  out << "\n[conformal]\n"
      << "alpha = " << cfg.canvi.alpha << "\n"
      << "alpha_grid = ";
  const auto levels = cfg.levels.empty() ? default_levels() : cfg.levels;
  for (std::size_t i = 0; i < levels.size(); ++i) out << (i ? "," : "") << levels[i];
  out << "\n"
      << "n_calib = " << cfg.canvi.n_calibration << "\n"
      << "n_test = " << cfg.canvi.n_test << "\n"
      << "s_samples = " << cfg.canvi.n_mc_samples << "\n"
      << "m_hdr = " << cfg.canvi.m_hdr << "\n"
      << "coverage_batches = " << cfg.canvi.coverage_batches << "\n"
      << "coverage_batch_size = " << cfg.canvi.coverage_batch_size << "\n"
      << "alpha_integral = " << (cfg.canvi.alpha_integral ? "true" : "false") << "\n\n"
      << "[train]\n"
      << "steps = " << cfg.train.steps << "\n"
      << "batch = " << cfg.train.batch_size << "\n"
      << "lr = " << cfg.train.learning_rate << "\n"
      << "checkpoint_every = " << cfg.train.checkpoint_every << "\n\n"
      << "[output]\n"
      << "dir = " << cfg.output_dir << "\n\n"
      << "[seed]\n"
      << "master = " << cfg.canvi.seed << "\n";
  return out.str();
}

// Shared flags that override config-file values.
struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<long> steps;
  std::optional<int> workers;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--out", ov.out, "Output directory (overrides [output] dir)");
  cmd->add_option("--seed", ov.seed, "Master seed (overrides [seed] master)");
  cmd->add_option("--alpha", ov.alpha, "Miscoverage level (overrides [conformal] alpha)");
  cmd->add_option("--steps", ov.steps, "Training steps (overrides [train] steps)");
  cmd->add_option("--workers", ov.workers, "Worker thread cap");
}

FileConfig load_config(const std::string& path, const Overrides& ov) {
  FileConfig cfg = parse_config_file(path);
  if (ov.out) cfg.output_dir = *ov.out;
  if (ov.seed) cfg.canvi.seed = *ov.seed;
  if (ov.alpha) cfg.canvi.alpha = *ov.alpha;
  if (ov.workers) cfg.canvi.workers = *ov.workers;
  if (ov.steps) {
    cfg.train.steps = *ov.steps;
    for (auto& c : cfg.canvi.candidates) c.train_steps = *ov.steps;
  }
  if (cfg.canvi.candidates.empty()) {
    throw ConfigError("config: [candidates] must list at least one candidate");
  }
  return cfg;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_simulate(const std::string& task_name, std::uint64_t task_seed, double rho,
                 long n, std::uint64_t seed, const std::string& out_file,
                 const std::string& role) {
  const auto task = make_task(task_name, task_seed, rho);
  const auto ds = sample_joint(*task, static_cast<std::size_t>(n), RngStream(seed, 0),
                               dataset_role_from_string(role));
  const auto path = resolve_out_path(out_file);
  write_dataset_csv(ds, path.string());
  std::cerr << "wrote " << ds.size() << " samples to " << path << "\n";
  return 0;
}

int cmd_train(const FileConfig& cfg) {
  const fs::path out = prepare_out_dir(cfg.output_dir);
  write_text_file((out / "config_echo.ini").string(), config_echo(cfg));
  const auto task = make_task_from_config(cfg.canvi);
  bool trained_any = false;
  for (std::size_t t = 0; t < cfg.canvi.candidates.size(); ++t) {
    const auto& spec = cfg.canvi.candidates[t];
    if (spec.family != "mdn") continue;
    trained_any = true;
    MixtureDensityNetwork mdn = MixtureDensityNetwork::for_task(
        *task, spec.n_components, spec.hidden_width, spec.hidden_depth,
        RngStream(cfg.canvi.seed, 6).substream(t));
    TrainConfig tc = cfg.train;
    tc.steps = spec.train_steps;
    tc.batch_size = spec.train_batch;
    tc.learning_rate = spec.learning_rate;
    if (tc.checkpoint_every <= 0) tc.checkpoint_every = std::max<long>(1, tc.steps);
    auto save = [&](long step, const MixtureDensityNetwork& m) {
      std::ostringstream name;
      name << "cand" << t << "_step" << step << ".ckpt";
      save_model(m, (out / name.str()).string());
    };
    const auto result =
        train_favi(mdn, *task, tc, RngStream(cfg.canvi.seed, 4).substream(t), save);
    std::ostringstream csv;
    csv << "step,loss\n";
    for (std::size_t s = 0; s < result.loss_trace.size(); ++s) {
      csv << (s + 1) << "," << format_full(result.loss_trace[s]) << "\n";
    }
    std::ostringstream name;
    name << "cand" << t << "_loss.csv";
    write_text_file((out / name.str()).string(), csv.str());
  }
  if (!trained_any) throw ConfigError("train: no trainable (mdn) candidate in config");
  std::cerr << "training artifacts in " << out << "\n";
  return 0;
}

int cmd_canvi(const FileConfig& cfg) {
  const fs::path out = prepare_out_dir(cfg.output_dir);
  write_text_file((out / "config_echo.ini").string(), config_echo(cfg));
  const auto report = run_canvi(cfg.canvi);
  write_text_file((out / "report.json").string(),
                  canvi_report_to_json(report, cfg.canvi));

  std::ostringstream table;
  table << "candidate                         q_hat        l_hat      se         "
           "coverage   selected\n";
  for (std::size_t t = 0; t < report.candidates.size(); ++t) {
    const auto& c = report.candidates[t];
    table << c.label;
    for (std::size_t pad = c.label.size(); pad < 34; ++pad) table << ' ';
    if (c.failed) {
      table << "FAILED: " << c.error << "\n";
      continue;
    }
    auto col = [&](const std::string& s) {
      table << s;
      for (std::size_t pad = s.size(); pad < 13; ++pad) table << ' ';
    };
    col(fmt(c.threshold));
    col(fmt(c.inverse_efficiency));
    col(fmt(c.inverse_efficiency_se));
    col(fmt(c.coverage.coverage));
    if (static_cast<int>(t) == report.selected) table << "*";
    table << "\n";
  }
  table << "\nselected: " << report.candidates[report.selected].label
        << "\nrecalibrated q_hat: " << fmt(report.recalibrated_threshold)
        << "\nrecalibrated l_hat: " << fmt(report.recalibrated_efficiency) << " (se "
        << fmt(report.recalibrated_efficiency_se) << ")"
        << "\nselected coverage:  " << fmt(report.selected_coverage.coverage) << " (se "
        << fmt(report.selected_coverage.std_error) << ")\n";
  std::cout << table.str();
  write_text_file((out / "summary.txt").string(), table.str());
  return 0;
}

int cmd_coverage(const FileConfig& cfg) {
  const fs::path out = prepare_out_dir(cfg.output_dir);
  write_text_file((out / "config_echo.ini").string(), config_echo(cfg));
  const auto levels = cfg.levels.empty() ? default_levels() : cfg.levels;
  const auto [conformal, hdr] = coverage_sweep(cfg.canvi, levels);
  write_text_file((out / "coverage_conformal.csv").string(),
                  coverage_curve_to_csv(conformal));
  write_text_file((out / "coverage_hdr.csv").string(), coverage_curve_to_csv(hdr));

  PlotSpec plot;
  plot.title = "Empirical coverage: " + cfg.canvi.task;
  plot.x_label = "nominal level";
  plot.y_label = "empirical coverage";
  plot.diagonal = true;
  PlotSeries sc, sh;
  sc.label = "conformal";
  sc.color = "#1f77b4";
  sh.label = "hdr";
  sh.color = "#d62728";
  sh.dashed = true;
  for (const auto& p : conformal.points) {
    sc.x.push_back(p.level);
    sc.y.push_back(p.coverage);
    sc.y_err.push_back(p.std_error);
  }
  for (const auto& p : hdr.points) {
    sh.x.push_back(p.level);
    sh.y.push_back(p.coverage);
    sh.y_err.push_back(p.std_error);
  }
  plot.series = {sc, sh};
  write_text_file((out / "coverage.svg").string(), render_svg(plot));
  std::cerr << "coverage artifacts in " << out << "\n";
  return 0;
}

int cmd_efficiency_trace(const FileConfig& cfg) {
  const fs::path out = prepare_out_dir(cfg.output_dir);
  write_text_file((out / "config_echo.ini").string(), config_echo(cfg));
  const auto task = make_task_from_config(cfg.canvi);

  // Trace the first trainable candidate.
  std::size_t index = cfg.canvi.candidates.size();
  for (std::size_t t = 0; t < cfg.canvi.candidates.size(); ++t) {
    if (cfg.canvi.candidates[t].family == "mdn") {
      index = t;
      break;
    }
  }
  if (index == cfg.canvi.candidates.size()) {
    throw ConfigError("efficiency-trace: no trainable (mdn) candidate in config");
  }
  const auto& spec = cfg.canvi.candidates[index];

  const auto d_calib =
      sample_joint(*task, cfg.canvi.n_calibration, RngStream(cfg.canvi.seed, 1),
                   DatasetRole::calibration);
  const auto d_test = sample_joint(*task, cfg.canvi.n_test,
                                   RngStream(cfg.canvi.seed, 2), DatasetRole::test);

  std::vector<EfficiencyTraceRow> rows;
  auto evaluate = [&](long step, const MixtureDensityNetwork& m) {
    auto shared = std::make_shared<MixtureDensityNetwork>(m);
    const auto pred = calibrate(shared, d_calib, cfg.canvi.alpha);
    const auto est = inverse_efficiency(*shared, pred.threshold, d_test,
                                        cfg.canvi.n_mc_samples,
                                        RngStream(cfg.canvi.seed, 5));
    rows.push_back(EfficiencyTraceRow{step, est.mean_size, est.std_error, est.estimator,
                                      cfg.canvi.task, cfg.canvi.alpha, cfg.canvi.seed});
  };

  MixtureDensityNetwork mdn = MixtureDensityNetwork::for_task(
      *task, spec.n_components, spec.hidden_width, spec.hidden_depth,
      RngStream(cfg.canvi.seed, 6).substream(index));
  TrainConfig tc = cfg.train;
  tc.steps = spec.train_steps;
  tc.batch_size = spec.train_batch;
  tc.learning_rate = spec.learning_rate;
  if (tc.checkpoint_every <= 0) tc.checkpoint_every = 500;
  train_favi(mdn, *task, tc, RngStream(cfg.canvi.seed, 4).substream(index), evaluate);

  write_text_file((out / "efficiency_trace.csv").string(),
                  efficiency_trace_to_csv(rows));
  PlotSpec plot;
  plot.title = "Inverse efficiency over training: " + cfg.canvi.task;
  plot.x_label = "training step";
  plot.y_label = "mean region size";
  PlotSeries s;
  s.label = "iw_mc";
  for (const auto& r : rows) {
    s.x.push_back(static_cast<double>(r.checkpoint_step));
    s.y.push_back(r.lhat_mean);
    s.y_err.push_back(r.lhat_se);
  }
  plot.series = {s};
  write_text_file((out / "efficiency_trace.svg").string(), render_svg(plot));
  std::cerr << "efficiency trace in " << out << "\n";
  return 0;
}

int cmd_gaussian_verify(double rho, double alpha, double phi_min, double phi_max,
                        double phi_step, std::uint64_t seed, const std::string& dir) {
  const fs::path out = prepare_out_dir(dir);
  const auto curve = gaussian_verify_curve(rho, alpha, phi_min, phi_max, phi_step,
                                           GaussianVerifyOptions{}, RngStream(seed, 0));
  std::vector<GaussianVerifyRow> rows;
  rows.reserve(curve.size());
  for (const auto& p : curve) {
    rows.push_back(GaussianVerifyRow{p.phi, p.analytic, p.mc, p.mc_se});
  }
  write_text_file((out / "gaussian_verify.csv").string(), gaussian_verify_to_csv(rows));

  PlotSpec plot;
  plot.title = "Region length vs slope (rho = " + fmt(rho) + ")";
  plot.x_label = "phi";
  plot.y_label = "region length";
  PlotSeries analytic, mc;
  analytic.label = "analytic";
  analytic.color = "#ff7f0e";
  mc.label = "monte-carlo";
  mc.color = "#1f77b4";
  for (const auto& p : curve) {
    analytic.x.push_back(p.phi);
    analytic.y.push_back(p.analytic);
    mc.x.push_back(p.phi);
    mc.y.push_back(p.mc);
    mc.y_err.push_back(p.mc_se);
  }
  plot.series = {analytic, mc};
  write_text_file((out / "gaussian_verify.svg").string(), render_svg(plot));
  std::cerr << "gaussian verification artifacts in " << out << "\n";
  return 0;
}

int cmd_counterexample(double b, double alpha, long mc_samples, std::uint64_t seed) {
  const auto exact = counterexample_lengths(b, alpha);
  const auto mc = counterexample_lengths_mc(b, alpha,
                                            static_cast<std::size_t>(mc_samples),
                                            RngStream(seed, 0));
  std::cout << "quantity      analytic      mc            mc_se\n";
  auto row = [&](const std::string& name, double a, const MonteCarloValue& v) {
    std::cout << name;
    for (std::size_t pad = name.size(); pad < 14; ++pad) std::cout << ' ';
    auto col = [&](const std::string& s) {
      std::cout << s;
      for (std::size_t pad = s.size(); pad < 14; ++pad) std::cout << ' ';
    };
    col(fmt(a));
    col(fmt(v.value));
    std::cout << fmt(v.std_error) << "\n";
  };
  row("l_true", exact.l_true, mc.l_true);
  row("l_candidate", exact.l_candidate, mc.l_candidate);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformalized amortized posterior toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw joint samples and write a CSV dataset");
  std::string sim_task, sim_out = "dataset.csv", sim_role = "train";
  long sim_n = 100;
  std::uint64_t sim_seed = 1, sim_task_seed = 0;
  double sim_rho = 0.3;
  sim->add_option("--task", sim_task, "Task name")->required();
  sim->add_option("--n", sim_n, "Number of samples")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Stream seed");
  sim->add_option("--task-seed", sim_task_seed, "Frozen task randomness seed");
  sim->add_option("--rho", sim_rho, "Correlation (bivariate_gaussian only)");
  sim->add_option("--out", sim_out, "Output CSV path");
  sim->add_option("--role", sim_role, "Dataset role tag");

  // config-driven commands
  std::string config_path;
  Overrides ov;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    add_override_flags(cmd, ov);
  };
  auto* train = app.add_subcommand("train", "Train candidates; write checkpoints and loss CSV");
  add_config(train);
  auto* canvi_cmd = app.add_subcommand("canvi", "Run the selection procedure; write report");
  add_config(canvi_cmd);
  auto* coverage = app.add_subcommand("coverage", "Coverage curves for conformal and HDR predictors");
  add_config(coverage);
  auto* trace = app.add_subcommand("efficiency-trace", "Inverse efficiency across training checkpoints");
  add_config(trace);

  // gaussian-verify
  auto* verify = app.add_subcommand("gaussian-verify",
                                    "Closed-form vs Monte-Carlo region lengths");
  double v_rho = 0.3, v_alpha = 0.05, v_phi_min = -1.0, v_phi_max = 1.0,
         v_phi_step = 0.01;
  std::uint64_t v_seed = 1;
  std::string v_out = "gaussian_verify";
  verify->add_option("--rho", v_rho, "Correlation");
  verify->add_option("--alpha", v_alpha, "Miscoverage level");
  verify->add_option("--phi-min", v_phi_min, "Grid start");
  verify->add_option("--phi-max", v_phi_max, "Grid end");
  verify->add_option("--phi-step", v_phi_step, "Grid step");
  verify->add_option("--seed", v_seed, "Stream seed");
  verify->add_option("--out", v_out, "Output directory");

  // counterexample
  auto* counter = app.add_subcommand("counterexample",
                                     "Exact and simulated lengths of the misfit construction");
  double c_b = 50.0, c_alpha = 0.2;
  long c_samples = 100000;
  std::uint64_t c_seed = 1;
  counter->add_option("--b", c_b, "Candidate support width (0, 100)");
  counter->add_option("--alpha", c_alpha, "Miscoverage level, below b/200");
  counter->add_option("--mc-samples", c_samples, "Simulation sample count");
  counter->add_option("--seed", c_seed, "Stream seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_task, sim_task_seed, sim_rho, sim_n, sim_seed, sim_out,
                          sim_role);
    }
    if (train->parsed()) return cmd_train(load_config(config_path, ov));
    if (canvi_cmd->parsed()) return cmd_canvi(load_config(config_path, ov));
    if (coverage->parsed()) return cmd_coverage(load_config(config_path, ov));
    if (trace->parsed()) return cmd_efficiency_trace(load_config(config_path, ov));
    if (verify->parsed()) {
      return cmd_gaussian_verify(v_rho, v_alpha, v_phi_min, v_phi_max, v_phi_step,
                                 v_seed, v_out);
    }
    if (counter->parsed()) {
      return cmd_counterexample(c_b, c_alpha, c_samples, c_seed);
    }
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << " (step " << e.step() << ")\n";
    return 3;
  } catch (const SimulationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    // "every candidate failed" is a numeric failure, not an IO one
    return std::string(e.what()).find("candidate failed") != std::string::npos ? 3 : 1;
  }
  return 0;
}
