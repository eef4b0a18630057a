#pragma once

#include <memory>
#include <span>
#include <vector>

#include "canvi/model.hpp"

namespace canvi {

/// Mixture density network: a tanh MLP mapping x to the parameters of a
/// K-component diagonal-Gaussian mixture over the unconstrained parameter
/// space. Densities on bounded or positive supports go through the attached
/// SupportTransform with the exact Jacobian correction, so log_density is a
/// proper density on the original space.
///
/// Gradients of the negative log-density are fully analytic (backprop), no
/// autodiff dependency.
class MixtureDensityNetwork : public PosteriorModel {
 public:
  struct Architecture {
    int x_dim = 0;
    int theta_dim = 0;
    int n_components = 10;
    int hidden_width = 64;
    int hidden_depth = 2;
  };

  MixtureDensityNetwork(Architecture arch, SupportTransform transform,
                        std::vector<double> params);

  /// Fresh model for a task: transform chosen from the task's support,
  /// mixture means seeded near the prior bulk, stddevs at the prior scale.
  static MixtureDensityNetwork for_task(const Task& task, int n_components = 10,
                                        int hidden_width = 64, int hidden_depth = 2,
                                        RngStream rng = RngStream(0, 0));

  static std::size_t param_count(const Architecture& arch);

  int theta_dim() const override { return arch_.theta_dim; }
  int x_dim() const override { return arch_.x_dim; }
  double log_density(std::span<const double> theta,
                     std::span<const double> x) const override;
  std::vector<double> sample(std::span<const double> x,
                             RngStream& rng) const override;
  std::vector<double> sample_densities(std::span<const double> x, std::size_t m,
                                       RngStream& rng) const override;
  std::unique_ptr<PosteriorModel> clone_scaled(double c) const override;
  std::string family() const override { return "mdn"; }

  /// -log q_u(u | x) on the unconstrained space.
  double nll_unconstrained(std::span<const double> u,
                           std::span<const double> x) const;

  /// Same value, and accumulates weight * d(nll)/d(params) into grad
  /// (grad.size() == params().size()).
  double nll_and_gradient(std::span<const double> u, std::span<const double> x,
                          std::span<double> grad, double weight = 1.0) const;

  const Architecture& architecture() const { return arch_; }
  const SupportTransform& transform() const { return transform_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& params() { return params_; }

  struct Layout;

 private:
  const Layout& layout() const { return *layout_; }

  Architecture arch_;
  SupportTransform transform_;
  std::vector<double> params_;
  std::shared_ptr<const Layout> layout_;
};

}  // namespace canvi
