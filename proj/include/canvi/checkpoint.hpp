#pragma once

#include <memory>
#include <string>

#include "canvi/model.hpp"

namespace canvi {

/// Text checkpoint: a self-describing header (family, dims, architecture,
/// transform) followed by the flat parameter array at full decimal
/// precision. Reloading reproduces log_density bit-exactly.
void save_model(const PosteriorModel& model, const std::string& path);

std::unique_ptr<PosteriorModel> load_model(const std::string& path);

}  // namespace canvi
