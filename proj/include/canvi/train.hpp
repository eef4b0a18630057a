#pragma once

#include <functional>
#include <vector>

#include "canvi/mdn.hpp"
#include "canvi/task.hpp"

namespace canvi {

struct TrainConfig {
  long steps = 5000;
  int batch_size = 128;
  double learning_rate = 1e-3;
  /// 0 disables checkpoint callbacks; otherwise the callback fires at step 0,
  /// every `checkpoint_every` steps, and after the final step.
  long checkpoint_every = 0;
};

using CheckpointFn = std::function<void(long step, const MixtureDensityNetwork&)>;

struct TrainResult {
  /// Negative joint log-density per step (batch mean, measured in the
  /// original parameter space).
  std::vector<double> loss_trace;
};

/// Stochastic forward-KL training: each step draws a fresh joint batch from
/// the task and takes one Adam step on the batch-mean negative log-density.
/// steps = 0 leaves the parameters bit-identical. Throws TrainingError (with
/// the step index) if the loss turns non-finite.
TrainResult train_favi(MixtureDensityNetwork& model, const Task& task,
                       const TrainConfig& config, RngStream rng,
                       const CheckpointFn& on_checkpoint = nullptr);

}  // namespace canvi
