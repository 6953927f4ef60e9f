#pragma once

#include <cstdint>
#include <vector>

#include "onglab/linalg.hpp"
#include "onglab/rng.hpp"

namespace onglab {

/// One fully-connected layer. Hidden layers apply ReLU, the last is linear.
struct Layer {
    Mat weight;  // out×in
    Vec bias;    // out
};

struct ModelParams {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().weight.cols(); }
    std::size_t output_dim() const { return layers.back().weight.rows(); }
    std::size_t param_count() const;
};

/// Flat view over all parameters: per layer, weights row-major then bias.
using GradientVec = Vec;

struct Batch {
    Mat x;                        // n×d, values in [0,1] for image data
    std::vector<std::uint8_t> y;  // class indices
    std::size_t size() const { return x.rows(); }
};

/// Everything the forward pass saw. Activations keep the appended
/// homogeneous 1 so bias gradients ride along with the weight math.
struct ForwardCache {
    std::vector<Mat> a_hom;  // per layer: n×(in+1), last column all 1
    std::vector<Mat> z;      // per layer: n×out pre-activations
    Mat probs;               // n×classes softmax outputs
    const Mat& logits() const { return z.back(); }
};

/// Per-example pre-activation gradients, one n×out matrix per layer.
/// Row i is the gradient of example i's own loss (not the batch mean);
/// together with the cached activations these are the EKFAC statistics.
struct BackwardStats {
    std::vector<Mat> delta;
};

struct BackwardResult {
    double loss = 0.0;
    GradientVec grad;
    BackwardStats stats;
};

ModelParams init_kaiming(const std::vector<std::size_t>& dims, std::uint64_t seed);

ForwardCache forward(const ModelParams& params, const Mat& x);

/// Cross-entropy loss (mean over the batch), its gradient, and the
/// per-example statistics, reusing an existing forward pass.
BackwardResult backward(const ModelParams& params, const ForwardCache& cache,
                        const std::vector<std::uint8_t>& labels);

BackwardResult loss_and_backward(const ModelParams& params, const Batch& batch);

/// Gradient of the single logit f_class(x; w) with respect to all parameters.
GradientVec logit_gradient(const ModelParams& params, const Vec& x, std::size_t class_index);

/// One label per example drawn from the model's own predictive distribution.
std::vector<std::uint8_t> sample_labels(const ForwardCache& cache, Rng& rng);

/// w ← w − lr·direction, direction in flat layout.
void apply_update(ModelParams& params, const GradientVec& direction, double lr);

GradientVec flatten_params(const ModelParams& params);

}  // namespace onglab
