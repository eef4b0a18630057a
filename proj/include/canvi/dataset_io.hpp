#pragma once

#include <string>
#include <string_view>

#include "canvi/task.hpp"

namespace canvi {

/// Canonical CSV form: one comment header line with the dataset metadata, a
/// column-name line, then one row per sample (theta columns then x columns).
/// Values are printed with 17 significant digits so the round-trip is
/// bit-exact.
std::string dataset_to_csv(const JointDataset& dataset);

/// Throws std::runtime_error on IO failure.
void write_dataset_csv(const JointDataset& dataset, const std::string& path);

/// Parses the canonical CSV form; throws std::runtime_error on IO or format
/// errors.
JointDataset read_dataset_csv(const std::string& path);

std::string sha256_hex(std::string_view bytes);

/// SHA-256 of the canonical CSV serialization.
std::string dataset_fingerprint(const JointDataset& dataset);

/// printf %.17g formatting used across all text artifacts.
std::string format_full(double v);

}  // namespace canvi
