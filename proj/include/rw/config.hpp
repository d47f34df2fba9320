#pragma once

// Key=value experiment config files; env.* keys address the environment,
// hp.* the learner, the rest the harness. CLI flags override file keys.

#include <string>

#include "rw/harness.hpp"

namespace rw::config {

void apply_experiment_key(harness::ExperimentConfig& cfg, const std::string& key,
                          const std::string& value);

harness::ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace rw::config
