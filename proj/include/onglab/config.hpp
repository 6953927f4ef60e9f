#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "onglab/continual.hpp"

namespace onglab {

/// Fully-resolved experiment description: benchmark choice, training
/// hyperparameters, dataset paths, output location and the seed list.
struct ExperimentConfig {
    std::string benchmark = "permuted";  // permuted | rotated | synthetic
    std::size_t tasks = 5;
    TrainConfig train;  // variant, lr, epochs, batch, memory, ekfac settings
    std::vector<std::uint64_t> seeds = {1};
    std::string mnist_images;
    std::string mnist_labels;
    std::string out_dir;  // resolved from --out, then $ONGLAB_OUT, then "results"
    double rotation_step_degrees = 10.0;
    std::size_t train_subset = 0;  // per-task training-sample cap (0 = all)
    bool identity_first = false;   // make the first permutation the identity
    std::size_t synthetic_dim = 10;
    std::size_t synthetic_classes = 4;
    std::size_t synthetic_samples = 600;
};

/// Parses `--key value` flags plus an optional `--config file` of flat
/// `key = value` lines; flags override file values, unknown keys are
/// rejected. Throws ConfigError with the offending key.
ExperimentConfig parse_config(const std::vector<std::string>& args);

/// The config echo written next to every run's results, reloadable through
/// `--config`.
std::string render_config(const ExperimentConfig& config, std::uint64_t seed);

TaskSequence build_tasks(const ExperimentConfig& config, std::uint64_t seed);

/// Runs every seed of the configured experiment, one output directory per
/// (variant, seed). Returns a process exit status.
int run(const ExperimentConfig& config);

}  // namespace onglab
