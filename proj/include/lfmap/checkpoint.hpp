#pragma once

#include <string>

#include "lfmap/feature_store.hpp"
#include "lfmap/network.hpp"

namespace lfmap {

/// Versioned binary container for a trained field: architecture, theta,
/// anchor, importance, and the feature store. Round trips are bit-exact.
void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const FeatureStore& store);

struct Checkpoint {
  NetworkParams params;
  FeatureStore store;
};

/// Throws std::runtime_error on missing file, bad magic, or version mismatch.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lfmap
