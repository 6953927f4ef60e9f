#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "onglab/linalg.hpp"
#include "onglab/model.hpp"

namespace onglab {

struct Dataset {
    Mat images;  // n×d, values in [0,1]
    std::vector<std::uint8_t> labels;
    std::size_t classes = 10;

    std::size_t size() const { return images.rows(); }
    std::size_t dim() const { return images.cols(); }
};

/// Reads an MNIST-style IDX image/label pair. Gzip-compressed files are
/// detected by their magic bytes and inflated transparently. Pixels are
/// scaled to [0,1].
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

struct TaskSpec {
    enum class Kind { Permuted, Rotated, Synthetic };
    Kind kind = Kind::Synthetic;
    std::size_t index = 0;
    std::vector<std::uint32_t> permutation;  // Permuted: bijection on pixels
    double angle_degrees = 0.0;              // Rotated
    std::uint64_t seed = 0;                  // generator stream for this task
};

struct SplitConfig {
    double val_fraction = 0.1;
    std::uint64_t seed = 1;
    std::size_t train_subset = 0;  // 0 = use everything
};

/// An ordered set of tasks over a shared base dataset (or per-task generated
/// data for synthetic sequences), with seeded per-task train/validation
/// splits. Examples are materialized through the task transform on demand.
class TaskSequence {
public:
    std::size_t task_count() const { return specs_.size(); }
    const TaskSpec& spec(std::size_t task) const { return specs_[task]; }
    std::size_t input_dim() const;
    std::size_t classes() const;

    const std::vector<std::uint32_t>& train_indices(std::size_t task) const {
        return train_idx_[task];
    }
    const std::vector<std::uint32_t>& val_indices(std::size_t task) const {
        return val_idx_[task];
    }

    /// Task-transformed example `row` (an index into the task's source data).
    Vec example(std::size_t task, std::uint32_t row) const;
    std::uint8_t label(std::size_t task, std::uint32_t row) const;

    Batch make_batch(std::size_t task, const std::uint32_t* rows, std::size_t count) const;
    Batch make_batch(std::size_t task, const std::vector<std::uint32_t>& rows) const {
        return make_batch(task, rows.data(), rows.size());
    }

    friend TaskSequence make_permuted(Dataset base, std::size_t k_tasks,
                                      std::uint64_t master_seed, const SplitConfig& split,
                                      bool identity_first);
    friend TaskSequence make_rotated(Dataset base, const std::vector<double>& angles_degrees,
                                     const SplitConfig& split);
    friend TaskSequence make_synthetic(std::size_t n_tasks, std::size_t input_dim,
                                       std::size_t n_classes, std::size_t samples_per_task,
                                       std::uint64_t seed, const SplitConfig& split);

private:
    Dataset base_;                       // shared source (empty for synthetic)
    std::vector<Dataset> per_task_;      // synthetic: generated data per task
    std::vector<TaskSpec> specs_;
    std::vector<std::vector<std::uint32_t>> train_idx_;
    std::vector<std::vector<std::uint32_t>> val_idx_;

    const Dataset& source(std::size_t task) const {
        return per_task_.empty() ? base_ : per_task_[task];
    }
    void build_splits(const SplitConfig& split);
};

TaskSequence make_permuted(Dataset base, std::size_t k_tasks, std::uint64_t master_seed,
                           const SplitConfig& split, bool identity_first = false);

TaskSequence make_rotated(Dataset base, const std::vector<double>& angles_degrees,
                          const SplitConfig& split);

TaskSequence make_synthetic(std::size_t n_tasks, std::size_t input_dim, std::size_t n_classes,
                            std::size_t samples_per_task, std::uint64_t seed,
                            const SplitConfig& split);

/// Rotation of a square image about its center by `angle_degrees`, inverse
/// mapping with bilinear interpolation, zero fill, output clamped to [0,1].
Vec rotate_image(const Vec& image, std::size_t side, double angle_degrees);

}  // namespace onglab
