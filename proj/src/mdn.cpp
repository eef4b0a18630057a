#include "canvi/mdn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace canvi {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093453;

double logsumexp(std::span<const double> v) {
  double m = kNegInf;
  for (double t : v) m = std::max(m, t);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : v) s += std::exp(t - m);
  return m + std::log(s);
}
}  // namespace

// Flat parameter layout: hidden layers (W, b) in order, then the three heads
// (logits, means, log-stddevs), each affine in the last hidden activation.
struct MixtureDensityNetwork::Layout {
  int x_dim, theta_dim, K, width, depth;
  std::vector<std::size_t> layer_w;  // offsets of hidden-layer weights
  std::vector<std::size_t> layer_b;
  std::size_t logit_w, logit_b;
  std::size_t mean_w, mean_b;
  std::size_t lstd_w, lstd_b;
  std::size_t total;

  explicit Layout(const Architecture& a)
      : x_dim(a.x_dim), theta_dim(a.theta_dim), K(a.n_components),
        width(a.hidden_width), depth(a.hidden_depth) {
    std::size_t off = 0;
    int in = x_dim;
    for (int l = 0; l < depth; ++l) {
      layer_w.push_back(off);
      off += static_cast<std::size_t>(width) * in;
      layer_b.push_back(off);
      off += width;
      in = width;
    }
    const int kd = K * theta_dim;
    logit_w = off; off += static_cast<std::size_t>(K) * width;
    logit_b = off; off += K;
    mean_w = off; off += static_cast<std::size_t>(kd) * width;
    mean_b = off; off += kd;
    lstd_w = off; off += static_cast<std::size_t>(kd) * width;
    lstd_b = off; off += kd;
    total = off;
  }
};

std::size_t MixtureDensityNetwork::param_count(const Architecture& arch) {
  return Layout(arch).total;
}

MixtureDensityNetwork::MixtureDensityNetwork(Architecture arch,
                                             SupportTransform transform,
                                             std::vector<double> params)
    : arch_(arch), transform_(std::move(transform)), params_(std::move(params)) {
  if (arch_.x_dim < 1 || arch_.theta_dim < 1 || arch_.n_components < 1 ||
      arch_.hidden_width < 1 || arch_.hidden_depth < 1) {
    throw std::invalid_argument("MixtureDensityNetwork: bad architecture");
  }
  if (transform_.dim() != arch_.theta_dim) {
    throw std::invalid_argument("MixtureDensityNetwork: transform dim mismatch");
  }
  layout_ = std::make_shared<const Layout>(arch_);
  if (params_.size() != layout_->total) {
    throw std::invalid_argument("MixtureDensityNetwork: parameter count mismatch");
  }
}

MixtureDensityNetwork MixtureDensityNetwork::for_task(const Task& task,
                                                      int n_components,
                                                      int hidden_width,
                                                      int hidden_depth,
                                                      RngStream rng) {
  Architecture arch;
  arch.x_dim = task.spec().x_dim;
  arch.theta_dim = task.spec().theta_dim;
  arch.n_components = n_components;
  arch.hidden_width = hidden_width;
  arch.hidden_depth = hidden_depth;
  SupportTransform tf = SupportTransform::for_support(task.spec().theta_support);

  // Prior bulk in the unconstrained space, for head-bias initialization.
  const int d = arch.theta_dim;
  std::vector<double> mean(d, 0.0), m2(d, 0.0);
  const int n_probe = 1024;
  RngStream probe = rng.substream(0);
  std::vector<double> u(d);
  int used = 0;
  for (int i = 0; i < n_probe; ++i) {
    RngStream sub = probe.substream(i);
    const auto theta = task.sample_prior(sub);
    if (!tf.to_unconstrained(theta, u)) continue;
    ++used;
    for (int j = 0; j < d; ++j) {
      const double delta = u[j] - mean[j];
      mean[j] += delta / used;
      m2[j] += delta * (u[j] - mean[j]);
    }
  }
  std::vector<double> scale(d, 1.0);
  for (int j = 0; j < d; ++j) {
    if (used > 1) scale[j] = std::max(1e-3, std::sqrt(m2[j] / (used - 1)));
  }

  Layout lay(arch);
  std::vector<double> params(lay.total, 0.0);
  RngStream init = rng.substream(1);
  int in = arch.x_dim;
  for (int l = 0; l < arch.hidden_depth; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t i = 0; i < static_cast<std::size_t>(arch.hidden_width) * in; ++i) {
      params[lay.layer_w[l] + i] = init.uniform(-bound, bound);
    }
    in = arch.hidden_width;
  }
  const double head_bound = 0.01 / std::sqrt(static_cast<double>(arch.hidden_width));
  auto fill_head = [&](std::size_t off, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) params[off + i] = init.uniform(-head_bound, head_bound);
  };
  const std::size_t kd = static_cast<std::size_t>(arch.n_components) * d;
  fill_head(lay.logit_w, static_cast<std::size_t>(arch.n_components) * arch.hidden_width);
  fill_head(lay.mean_w, kd * arch.hidden_width);
  fill_head(lay.lstd_w, kd * arch.hidden_width);
  // Mixture logits zero; component means jittered around the prior mean so
  // components start distinct; log-stddevs at the prior scale.
  for (int k = 0; k < arch.n_components; ++k) {
    for (int j = 0; j < d; ++j) {
      params[lay.mean_b + k * d + j] = mean[j] + 0.2 * scale[j] * init.uniform(-1.0, 1.0);
      params[lay.lstd_b + k * d + j] = std::log(scale[j]);
    }
  }
  return MixtureDensityNetwork(arch, std::move(tf), std::move(params));
}

namespace {
struct Forward {
  std::vector<double> acts;    // depth * width hidden activations
  std::vector<double> logits;  // K
  std::vector<double> means;   // K * D
  std::vector<double> lstds;   // K * D
  std::vector<double> comp;    // K: log pi_k + log N_k
};
}  // namespace

// Shared forward pass; fills the activation workspace.
static void mdn_forward(const std::vector<double>& p,
                        const MixtureDensityNetwork::Architecture& arch,
                        std::span<const double> x,
                        const MixtureDensityNetwork::Layout& lay, Forward& f) {
  const int W = arch.hidden_width;
  const int K = arch.n_components;
  const int D = arch.theta_dim;
  f.acts.resize(static_cast<std::size_t>(arch.hidden_depth) * W);
  f.logits.resize(K);
  f.means.resize(static_cast<std::size_t>(K) * D);
  f.lstds.resize(static_cast<std::size_t>(K) * D);
  f.comp.resize(K);

  const double* in = x.data();
  int in_dim = arch.x_dim;
  for (int l = 0; l < arch.hidden_depth; ++l) {
    double* h = f.acts.data() + static_cast<std::size_t>(l) * W;
    const double* w = p.data() + lay.layer_w[l];
    const double* b = p.data() + lay.layer_b[l];
    for (int i = 0; i < W; ++i) {
      double s = b[i];
      const double* row = w + static_cast<std::size_t>(i) * in_dim;
      for (int j = 0; j < in_dim; ++j) s += row[j] * in[j];
      h[i] = std::tanh(s);
    }
    in = h;
    in_dim = W;
  }
  const double* h = f.acts.data() + static_cast<std::size_t>(arch.hidden_depth - 1) * W;
  auto head = [&](std::size_t w_off, std::size_t b_off, double* out, int n) {
    const double* w = p.data() + w_off;
    const double* b = p.data() + b_off;
    for (int i = 0; i < n; ++i) {
      double s = b[i];
      const double* row = w + static_cast<std::size_t>(i) * W;
      for (int j = 0; j < W; ++j) s += row[j] * h[j];
      out[i] = s;
    }
  };
  head(lay.logit_w, lay.logit_b, f.logits.data(), K);
  head(lay.mean_w, lay.mean_b, f.means.data(), K * D);
  head(lay.lstd_w, lay.lstd_b, f.lstds.data(), K * D);
}

double MixtureDensityNetwork::nll_unconstrained(std::span<const double> u,
                                                std::span<const double> x) const {
  thread_local Forward f;
  mdn_forward(params_, arch_, x, layout(), f);
  const int K = arch_.n_components;
  const int D = arch_.theta_dim;
  const double log_z = logsumexp(f.logits);
  for (int k = 0; k < K; ++k) {
    double lp = f.logits[k] - log_z;
    for (int d = 0; d < D; ++d) {
      const double s = f.lstds[k * D + d];
      const double z = (u[d] - f.means[k * D + d]) * std::exp(-s);
      lp += -0.5 * kLog2Pi - s - 0.5 * z * z;
    }
    f.comp[k] = lp;
  }
  return -logsumexp(f.comp);
}

double MixtureDensityNetwork::log_density(std::span<const double> theta,
                                          std::span<const double> x) const {
  if (static_cast<int>(theta.size()) != arch_.theta_dim ||
      static_cast<int>(x.size()) != arch_.x_dim) {
    throw std::invalid_argument("log_density: dimension mismatch");
  }
  thread_local std::vector<double> u;
  u.resize(arch_.theta_dim);
  if (!transform_.to_unconstrained(theta, u)) return kNegInf;
  return -nll_unconstrained(u, x) + transform_.log_jacobian(theta);
}

std::vector<double> MixtureDensityNetwork::sample(std::span<const double> x,
                                                  RngStream& rng) const {
  thread_local Forward f;
  mdn_forward(params_, arch_, x, layout(), f);
  const int K = arch_.n_components;
  const int D = arch_.theta_dim;
  const double log_z = logsumexp(f.logits);
  double target = rng.uniform01();
  int k = K - 1;
  double cum = 0.0;
  for (int i = 0; i < K; ++i) {
    cum += std::exp(f.logits[i] - log_z);
    if (target < cum) {
      k = i;
      break;
    }
  }
  std::vector<double> u(D);
  for (int d = 0; d < D; ++d) {
    u[d] = f.means[k * D + d] + std::exp(f.lstds[k * D + d]) * rng.normal();
  }
  std::vector<double> theta(D);
  transform_.to_constrained(u, theta);
  return theta;
}

std::vector<double> MixtureDensityNetwork::sample_densities(
    std::span<const double> x, std::size_t m, RngStream& rng) const {
  thread_local Forward f;
  mdn_forward(params_, arch_, x, layout(), f);
  const int K = arch_.n_components;
  const int D = arch_.theta_dim;
  const double log_z = logsumexp(f.logits);

  std::vector<double> out(m);
  std::vector<double> u(D);
  std::vector<double> comp(K);
  for (std::size_t j = 0; j < m; ++j) {
    // draw a component, then u from it; one forward pass serves all draws
    double target = rng.uniform01();
    int k = K - 1;
    double cum = 0.0;
    for (int i = 0; i < K; ++i) {
      cum += std::exp(f.logits[i] - log_z);
      if (target < cum) {
        k = i;
        break;
      }
    }
    for (int d = 0; d < D; ++d) {
      u[d] = f.means[k * D + d] + std::exp(f.lstds[k * D + d]) * rng.normal();
    }
    for (int i = 0; i < K; ++i) {
      double lp = f.logits[i] - log_z;
      for (int d = 0; d < D; ++d) {
        const double s = f.lstds[i * D + d];
        const double z = (u[d] - f.means[i * D + d]) * std::exp(-s);
        lp += -0.5 * kLog2Pi - s - 0.5 * z * z;
      }
      comp[i] = lp;
    }
    out[j] = std::exp(logsumexp(comp) + transform_.log_jacobian_from_u(u));
  }
  return out;
}

std::unique_ptr<PosteriorModel> MixtureDensityNetwork::clone_scaled(double c) const {
  if (!(c > 0.0)) throw std::invalid_argument("clone_scaled: c must be positive");
  auto copy = std::make_unique<MixtureDensityNetwork>(*this);
  const auto& lay = layout();
  const std::size_t kd =
      static_cast<std::size_t>(arch_.n_components) * arch_.theta_dim;
  const double shift = std::log(c);
  for (std::size_t i = 0; i < kd; ++i) copy->params_[lay.lstd_b + i] += shift;
  return copy;
}

double MixtureDensityNetwork::nll_and_gradient(std::span<const double> u,
                                               std::span<const double> x,
                                               std::span<double> grad,
                                               double weight) const {
  if (grad.size() != params_.size()) {
    throw std::invalid_argument("nll_and_gradient: grad size mismatch");
  }
  const auto& lay = layout();
  const int W = arch_.hidden_width;
  const int K = arch_.n_components;
  const int D = arch_.theta_dim;
  const int depth = arch_.hidden_depth;

  thread_local Forward f;
  mdn_forward(params_, arch_, x, lay, f);

  const double log_z = logsumexp(f.logits);
  for (int k = 0; k < K; ++k) {
    double lp = f.logits[k] - log_z;
    for (int d = 0; d < D; ++d) {
      const double s = f.lstds[k * D + d];
      const double z = (u[d] - f.means[k * D + d]) * std::exp(-s);
      lp += -0.5 * kLog2Pi - s - 0.5 * z * z;
    }
    f.comp[k] = lp;
  }
  const double logq = logsumexp(f.comp);

  // d(-logq)/d(head outputs); responsibilities r_k = exp(comp_k - logq).
  thread_local std::vector<double> g_logits, g_means, g_lstds, g_h, g_in;
  g_logits.resize(K);
  g_means.resize(static_cast<std::size_t>(K) * D);
  g_lstds.resize(static_cast<std::size_t>(K) * D);
  const double w_neg = -weight;  // gradient of the negative log-density
  for (int k = 0; k < K; ++k) {
    const double r = std::exp(f.comp[k] - logq);
    const double pi = std::exp(f.logits[k] - log_z);
    g_logits[k] = w_neg * (r - pi);
    for (int d = 0; d < D; ++d) {
      const double s = f.lstds[k * D + d];
      const double inv_var = std::exp(-2.0 * s);
      const double diff = u[d] - f.means[k * D + d];
      g_means[k * D + d] = w_neg * r * diff * inv_var;
      g_lstds[k * D + d] = w_neg * r * (diff * diff * inv_var - 1.0);
    }
  }

  // Heads into the last hidden layer.
  const double* h_last = f.acts.data() + static_cast<std::size_t>(depth - 1) * W;
  g_h.assign(W, 0.0);
  auto head_back = [&](std::size_t w_off, std::size_t b_off,
                       const std::vector<double>& g_out, int n) {
    const double* w = params_.data() + w_off;
    for (int i = 0; i < n; ++i) {
      const double g = g_out[i];
      if (g == 0.0) continue;
      double* gw = grad.data() + w_off + static_cast<std::size_t>(i) * W;
      const double* row = w + static_cast<std::size_t>(i) * W;
      for (int j = 0; j < W; ++j) {
        gw[j] += g * h_last[j];
        g_h[j] += g * row[j];
      }
      grad[b_off + i] += g;
    }
  };
  head_back(lay.logit_w, lay.logit_b, g_logits, K);
  head_back(lay.mean_w, lay.mean_b, g_means, K * D);
  head_back(lay.lstd_w, lay.lstd_b, g_lstds, K * D);

  // Hidden layers, last to first.
  for (int l = depth - 1; l >= 0; --l) {
    const double* h = f.acts.data() + static_cast<std::size_t>(l) * W;
    const int in_dim = (l == 0) ? arch_.x_dim : W;
    const double* in =
        (l == 0) ? x.data() : f.acts.data() + static_cast<std::size_t>(l - 1) * W;
    g_in.assign(in_dim, 0.0);
    const double* w = params_.data() + lay.layer_w[l];
    for (int i = 0; i < W; ++i) {
      const double g_pre = g_h[i] * (1.0 - h[i] * h[i]);
      if (g_pre == 0.0) continue;
      double* gw = grad.data() + lay.layer_w[l] + static_cast<std::size_t>(i) * in_dim;
      const double* row = w + static_cast<std::size_t>(i) * in_dim;
      for (int j = 0; j < in_dim; ++j) {
        gw[j] += g_pre * in[j];
        g_in[j] += g_pre * row[j];
      }
      grad[lay.layer_b[l] + i] += g_pre;
    }
    if (l > 0) g_h = g_in;
  }
  return -logq;
}

}  // namespace canvi
