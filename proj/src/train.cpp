#include "canvi/train.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "canvi/errors.hpp"

namespace canvi {

TrainResult train_favi(MixtureDensityNetwork& model, const Task& task,
                       const TrainConfig& config, RngStream rng,
                       const CheckpointFn& on_checkpoint) {
  if (config.steps < 0) throw std::invalid_argument("train_favi: steps must be >= 0");
  if (config.batch_size < 1) {
    throw std::invalid_argument("train_favi: batch_size must be >= 1");
  }
  if (!(config.learning_rate > 0.0)) {
    throw std::invalid_argument("train_favi: learning_rate must be positive");
  }

  TrainResult result;
  result.loss_trace.reserve(config.steps);
  if (on_checkpoint && config.checkpoint_every > 0) on_checkpoint(0, model);
  if (config.steps == 0) return result;

  const std::size_t n_params = model.params().size();
  std::vector<double> grad(n_params, 0.0);
  std::vector<double> m(n_params, 0.0);
  std::vector<double> v(n_params, 0.0);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  const int d = model.theta_dim();
  std::vector<double> u(d);
  RngStream batch_root = rng.substream(0);

  for (long step = 1; step <= config.steps; ++step) {
    const JointDataset batch = sample_joint(task, config.batch_size,
                                            batch_root.substream(step),
                                            DatasetRole::train);
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    int used = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      // Prior draws sit inside the support; boundary hits under the
      // transform are measure-zero and simply skipped.
      if (!model.transform().to_unconstrained(batch.theta(i), u)) continue;
      ++used;
      loss += model.nll_and_gradient(u, batch.x(i), grad) -
              model.transform().log_jacobian(batch.theta(i));
    }
    if (used == 0) {
      throw TrainingError("train_favi: entire batch outside model support", step);
    }
    loss /= used;
    const double inv_used = 1.0 / used;
    if (!std::isfinite(loss)) {
      throw TrainingError("train_favi: non-finite loss at step " + std::to_string(step),
                          step);
    }
    result.loss_trace.push_back(loss);

    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    auto& params = model.params();
    for (std::size_t j = 0; j < n_params; ++j) {
      const double g = grad[j] * inv_used;
      m[j] = beta1 * m[j] + (1.0 - beta1) * g;
      v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
      params[j] -= config.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
    }

    if (on_checkpoint && config.checkpoint_every > 0 &&
        (step % config.checkpoint_every == 0 || step == config.steps)) {
      on_checkpoint(step, model);
    }
  }
  return result;
}

}  // namespace canvi
