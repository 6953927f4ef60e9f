#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "onglab/ekfac.hpp"
#include "onglab/metrics.hpp"
#include "onglab/model.hpp"
#include "onglab/projection.hpp"
#include "onglab/tasks.hpp"

namespace onglab {

enum class Variant { SGD, OGD, OGDPlus, ONG, ONGPlus };

constexpr bool uses_preconditioning(Variant v) {
    return v == Variant::ONG || v == Variant::ONGPlus;
}
constexpr bool uses_sample_memory(Variant v) {
    return v == Variant::OGDPlus || v == Variant::ONGPlus;
}
constexpr bool uses_projection(Variant v) { return v != Variant::SGD; }

const char* variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);

struct EkfacSettings {
    double decay = 0.95;
    double damping = 1e-3;
    std::size_t refresh_period = 100;  // optimizer steps between eigenbasis refreshes
    bool empirical = false;            // ablation: ground-truth labels instead of sampled
};

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t epochs_per_task = 3;
    std::size_t batch_size = 32;
    std::size_t memory_per_task = 100;
    std::size_t replay_sample_size = 0;  // 0 → memory_per_task
    bool memory_all_logits = false;      // store every class's logit gradient, not
                                         // just the ground-truth one
    std::uint64_t seed = 1;
    std::vector<std::size_t> hidden = {100, 100};
    EkfacSettings ekfac;
    Variant variant = Variant::SGD;

    void validate() const;
    std::size_t replay_size() const {
        return replay_sample_size == 0 ? memory_per_task : replay_sample_size;
    }
};

/// A past-task example kept for the + variants' replay memory S_D.
struct MemorySample {
    Vec x;
    std::uint8_t y = 0;
    std::size_t task = 0;
};

struct SampleMemory {
    std::vector<MemorySample> samples;
};

struct TrainerState {
    ModelParams params;
    FisherApprox fisher;
    OrthoBasis basis;
    SampleMemory sample_memory;
    Rng rng;
    std::size_t task_index = 0;
    std::uint64_t global_step = 0;
    std::uint64_t last_refresh_step = 0;

    TrainerState(ModelParams p, FisherApprox f, std::uint64_t rng_seed)
        : params(std::move(p)), fisher(std::move(f)), basis(), rng(rng_seed) {}
};

TrainerState make_trainer(const std::vector<std::size_t>& dims, const TrainConfig& config);

/// One optimizer step: gradient, Fisher update + preconditioning for the
/// natural-gradient variants, projection against the stored basis, update.
StepRecord train_step(TrainerState& state, const Batch& batch, const TrainConfig& config,
                      RunLog& log);

/// End-of-task memory construction: stores (preconditioned) true-class logit
/// gradients of sampled task examples — plus replayed old samples for the
/// + variants — into the orthogonal basis, and tops up the sample memory.
void finalize_task(TrainerState& state, const TaskSequence& tasks, std::size_t task,
                   const TrainConfig& config, RunLog& log);

struct RunResult {
    AccuracyMatrix accuracy;
    RunLog log;
};

double evaluate_accuracy(const ModelParams& params, const TaskSequence& tasks,
                         std::size_t task);

/// Sequential training over the whole task sequence with per-boundary
/// evaluation of every task seen so far.
RunResult run_experiment(const TaskSequence& tasks, const TrainConfig& config);

}  // namespace onglab
