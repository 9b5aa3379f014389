#pragma once

#include <filesystem>

#include "poprl/mlp.hpp"
#include "poprl/td3.hpp"

namespace poprl {

/// Versioned binary parameter file: network spec, flat parameters, and
/// optionally the optimizer moments.
void save_network(const std::filesystem::path& path, const NetworkSpec& spec,
                  const Vec& params, const AdamState* moments = nullptr);

struct NetworkCheckpoint {
  NetworkSpec spec;
  Vec params;
  AdamState moments;  // zeros when the file carries none
  bool has_moments = false;
};

NetworkCheckpoint load_network(const std::filesystem::path& path);

/// Full learner state: all six networks, optimizer moments, update counter,
/// hyperparameters, action bounds.
void save_learner(const std::filesystem::path& path, const Learner& learner);
Learner load_learner(const std::filesystem::path& path);

}  // namespace poprl
