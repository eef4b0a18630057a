#include "canvi/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "canvi/dataset_io.hpp"
#include "canvi/mdn.hpp"

namespace canvi {

namespace {

const char* kind_name(SupportTransform::Kind k) {
  switch (k) {
    case SupportTransform::Kind::identity: return "identity";
    case SupportTransform::Kind::logit: return "logit";
    case SupportTransform::Kind::log: return "log";
  }
  return "identity";
}

SupportTransform::Kind kind_from_name(const std::string& s) {
  if (s == "identity") return SupportTransform::Kind::identity;
  if (s == "logit") return SupportTransform::Kind::logit;
  if (s == "log") return SupportTransform::Kind::log;
  throw std::runtime_error("checkpoint: unknown transform kind " + s);
}

void write_params(std::ostream& out, const std::vector<double>& values) {
  out << "params " << values.size() << "\n";
  for (double v : values) out << format_full(v) << "\n";
}

std::vector<double> read_params(std::istream& in) {
  std::string tag;
  std::size_t n = 0;
  in >> tag >> n;
  if (tag != "params") throw std::runtime_error("checkpoint: expected params block");
  std::vector<double> values(n);
  for (auto& v : values) {
    if (!(in >> v)) throw std::runtime_error("checkpoint: truncated params block");
  }
  return values;
}

}  // namespace

void save_model(const PosteriorModel& model, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "canvi-model 1\n";
  if (const auto* mdn = dynamic_cast<const MixtureDensityNetwork*>(&model)) {
    const auto& a = mdn->architecture();
    f << "family mdn\n"
      << "theta_dim " << a.theta_dim << "\n"
      << "x_dim " << a.x_dim << "\n"
      << "components " << a.n_components << "\n"
      << "hidden_width " << a.hidden_width << "\n"
      << "hidden_depth " << a.hidden_depth << "\n";
    f << "transform";
    for (auto k : mdn->transform().kinds()) f << " " << kind_name(k);
    f << "\nbounds";
    for (const auto& iv : mdn->transform().intervals()) {
      f << " " << format_full(iv.lo) << " " << format_full(iv.hi);
    }
    f << "\n";
    write_params(f, mdn->params());
  } else if (const auto* clg = dynamic_cast<const ConditionalLinearGaussian*>(&model)) {
    f << "family clg\n"
      << "theta_dim " << clg->theta_dim() << "\n"
      << "x_dim " << clg->x_dim() << "\n";
    std::vector<double> flat;
    flat.insert(flat.end(), clg->slope().begin(), clg->slope().end());
    flat.insert(flat.end(), clg->intercept().begin(), clg->intercept().end());
    flat.insert(flat.end(), clg->covariance().begin(), clg->covariance().end());
    write_params(f, flat);
  } else if (const auto* disp = dynamic_cast<const DispersionScaled*>(&model)) {
    // Persist the materialized scaled model; it is self-contained.
    f.close();
    const auto scaled = disp->base().clone_scaled(disp->scale());
    save_model(*scaled, path);
    return;
  } else {
    throw std::runtime_error("save_model: unsupported family " + model.family());
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::unique_ptr<PosteriorModel> load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  int version = 0;
  f >> magic >> version;
  if (magic != "canvi-model" || version != 1) {
    throw std::runtime_error("not a model checkpoint: " + path);
  }
  std::string tag, family;
  f >> tag >> family;
  if (tag != "family") throw std::runtime_error("checkpoint: expected family");

  if (family == "mdn") {
    MixtureDensityNetwork::Architecture a;
    std::string key;
    f >> key >> a.theta_dim >> key >> a.x_dim >> key >> a.n_components >> key >>
        a.hidden_width >> key >> a.hidden_depth;
    f >> key;  // "transform"
    std::vector<SupportTransform::Kind> kinds(a.theta_dim);
    for (auto& k : kinds) {
      std::string name;
      f >> name;
      k = kind_from_name(name);
    }
    f >> key;  // "bounds"
    std::vector<Interval> intervals(a.theta_dim);
    for (auto& iv : intervals) f >> iv.lo >> iv.hi;
    auto params = read_params(f);
    SupportTransform tf =
        SupportTransform::from_parts(std::move(kinds), std::move(intervals));
    return std::make_unique<MixtureDensityNetwork>(a, std::move(tf), std::move(params));
  }
  if (family == "clg") {
    int theta_dim = 0, x_dim = 0;
    std::string key;
    f >> key >> theta_dim >> key >> x_dim;
    auto flat = read_params(f);
    const std::size_t n_slope = static_cast<std::size_t>(theta_dim) * x_dim;
    if (flat.size() != n_slope + theta_dim + static_cast<std::size_t>(theta_dim) * theta_dim) {
      throw std::runtime_error("checkpoint: bad clg parameter count in " + path);
    }
    std::vector<double> slope(flat.begin(), flat.begin() + n_slope);
    std::vector<double> intercept(flat.begin() + n_slope, flat.begin() + n_slope + theta_dim);
    std::vector<double> cov(flat.begin() + n_slope + theta_dim, flat.end());
    return std::make_unique<ConditionalLinearGaussian>(theta_dim, x_dim, slope,
                                                       intercept, cov);
  }
  throw std::runtime_error("checkpoint: unknown family " + family);
}

}  // namespace canvi
