#include "onglab/continual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace onglab {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::SGD: return "SGD";
        case Variant::OGD: return "OGD";
        case Variant::OGDPlus: return "OGD+";
        case Variant::ONG: return "ONG";
        case Variant::ONGPlus: return "ONG+";
    }
    return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    if (s == "sgd") return Variant::SGD;
    if (s == "ogd") return Variant::OGD;
    if (s == "ogd+" || s == "ogdplus") return Variant::OGDPlus;
    if (s == "ong") return Variant::ONG;
    if (s == "ong+" || s == "ongplus") return Variant::ONGPlus;
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (epochs_per_task == 0) throw ConfigError("epochs_per_task must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(ekfac.damping > 0.0)) throw ConfigError("ekfac damping must be positive");
    if (!(ekfac.decay >= 0.0 && ekfac.decay < 1.0))
        throw ConfigError("ekfac decay must be in [0, 1)");
    if (ekfac.refresh_period == 0) throw ConfigError("ekfac refresh period must be positive");
    if (hidden.empty()) throw ConfigError("at least one hidden layer is required");
}

TrainerState make_trainer(const std::vector<std::size_t>& dims, const TrainConfig& config) {
    config.validate();
    ModelParams params = init_kaiming(dims, config.seed);
    FisherApprox fisher =
        make_fisher(params, config.ekfac.decay, config.ekfac.damping, config.ekfac.empirical);
    return TrainerState(std::move(params), std::move(fisher),
                        Rng::derive(config.seed, 0x7a11));
}

namespace {

// Factor/scaling statistics for the Fisher estimate. True-Fisher mode draws
// the labels from the model's own predictive distribution (one extra
// backward pass); empirical mode reuses the training labels.
BackwardStats fisher_stats(TrainerState& state, const ForwardCache& cache,
                           const BackwardResult& train_backward) {
    if (state.fisher.empirical) return train_backward.stats;
    const std::vector<std::uint8_t> sampled = sample_labels(cache, state.rng);
    return backward(state.params, cache, sampled).stats;
}

}  // namespace

StepRecord train_step(TrainerState& state, const Batch& batch, const TrainConfig& config,
                      RunLog& log) {
    StepRecord rec;
    rec.step = state.global_step;
    rec.task = state.task_index;

    ForwardCache cache;
    BackwardResult back;
    try {
        cache = forward(state.params, batch.x);
        back = backward(state.params, cache, batch.y);
    } catch (const NumericalError& e) {
        std::ostringstream msg;
        msg << "train_step: task " << state.task_index + 1 << ", step " << state.global_step
            << ": " << e.what();
        throw NumericalError(msg.str());
    }
    rec.loss = back.loss;

    GradientVec g = std::move(back.grad);
    if (uses_preconditioning(config.variant)) {
        const BackwardStats stats = fisher_stats(state, cache, back);
        update_factors(state.fisher, cache, stats);
        ++log.counters.fisher_factor_updates;

        const bool due = log.counters.fisher_refreshes == 0 ||
                         state.global_step - state.last_refresh_step >=
                             config.ekfac.refresh_period;
        if (due) {
            refresh_eigenbasis(state.fisher);
            state.last_refresh_step = state.global_step;
            ++log.counters.fisher_refreshes;
        }
        update_scalings(state.fisher, cache, stats);
        ++log.counters.fisher_scaling_updates;

        g = precondition(state.fisher, state.params, g);
        ++log.counters.fisher_preconditions;
    }
    rec.g_norm = std::sqrt(norm2(g));

    GradientVec g_tilde;
    if (uses_projection(config.variant)) {
        g_tilde = state.basis.project_out(g);
        ++log.counters.basis_projections;
    } else {
        g_tilde = g;
    }
    rec.g_tilde_norm = std::sqrt(norm2(g_tilde));

    const DescentCheck dc = descent_check(g, g_tilde);
    rec.descent_inner = dc.inner;
    rec.descent_ok = dc.ok;

    apply_update(state.params, g_tilde, config.learning_rate);
    ++state.global_step;
    ++log.counters.steps;
    log.steps.push_back(rec);
    return rec;
}

void finalize_task(TrainerState& state, const TaskSequence& tasks, std::size_t task,
                   const TrainConfig& config, RunLog& log) {
    const std::vector<std::uint32_t>& train_rows = tasks.train_indices(task);
    if (train_rows.empty()) throw StructuralError("finalize_task: task has no training data");

    // The natural-gradient variants refresh the eigenbasis at the task
    // boundary so memory gradients see the freshest Fisher estimate.
    if (uses_preconditioning(config.variant) && state.fisher.factor_updates > 0) {
        refresh_eigenbasis(state.fisher);
        state.last_refresh_step = state.global_step;
        ++log.counters.fisher_refreshes;
    }

    if (uses_projection(config.variant) && config.memory_per_task > 0) {
        // Candidate pool: the task's own examples, plus a replay draw H from
        // the sample memory for the + variants.
        struct Candidate {
            std::uint32_t row = 0;
            const MemorySample* replay = nullptr;
        };
        std::vector<Candidate> pool;
        pool.reserve(train_rows.size());
        for (std::uint32_t r : train_rows) pool.push_back({r, nullptr});

        if (uses_sample_memory(config.variant) && !state.sample_memory.samples.empty()) {
            std::vector<std::uint32_t> mem_idx(state.sample_memory.samples.size());
            std::iota(mem_idx.begin(), mem_idx.end(), std::uint32_t{0});
            state.rng.shuffle(mem_idx);
            const std::size_t h = std::min<std::size_t>(config.replay_size(), mem_idx.size());
            for (std::size_t i = 0; i < h; ++i)
                pool.push_back({0, &state.sample_memory.samples[mem_idx[i]]});
        }

        state.rng.shuffle(pool);
        const std::size_t take = std::min<std::size_t>(config.memory_per_task, pool.size());
        for (std::size_t i = 0; i < take; ++i) {
            Vec x;
            std::uint8_t y;
            if (pool[i].replay != nullptr) {
                x = pool[i].replay->x;
                y = pool[i].replay->y;
            } else {
                x = tasks.example(task, pool[i].row);
                y = tasks.label(task, pool[i].row);
            }
            const std::size_t classes = state.params.output_dim();
            for (std::size_t c = 0; c < classes; ++c) {
                if (!config.memory_all_logits && c != y) continue;
                GradientVec u = logit_gradient(state.params, x, c);
                if (uses_preconditioning(config.variant)) {
                    u = precondition(state.fisher, state.params, u);
                    ++log.counters.fisher_preconditions;
                }
                u = state.basis.project_out(u);
                ++log.counters.basis_projections;
                if (state.basis.add_direction(std::move(u)))
                    ++log.counters.basis_adds;
                else
                    ++log.counters.basis_rejects;
            }
        }
    }

    if (uses_sample_memory(config.variant)) {
        std::vector<std::uint32_t> rows = train_rows;
        state.rng.shuffle(rows);
        const std::size_t d = std::min<std::size_t>(config.memory_per_task, rows.size());
        for (std::size_t i = 0; i < d; ++i) {
            MemorySample ms;
            ms.x = tasks.example(task, rows[i]);
            ms.y = tasks.label(task, rows[i]);
            ms.task = task;
            state.sample_memory.samples.push_back(std::move(ms));
            ++log.counters.memory_stored;
        }
    }

    ++state.task_index;
}

double evaluate_accuracy(const ModelParams& params, const TaskSequence& tasks,
                         std::size_t task) {
    const std::vector<std::uint32_t>& rows = tasks.val_indices(task);
    std::size_t correct = 0;
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < rows.size(); start += chunk) {
        const std::size_t count = std::min(chunk, rows.size() - start);
        const Batch b = tasks.make_batch(task, rows.data() + start, count);
        const ForwardCache cache = forward(params, b.x);
        const Mat& logits = cache.logits();
        for (std::size_t i = 0; i < count; ++i) {
            const double* row = logits.row(i);
            std::size_t best = 0;
            for (std::size_t c = 1; c < logits.cols(); ++c)
                if (row[c] > row[best]) best = c;
            if (best == b.y[i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

RunResult run_experiment(const TaskSequence& tasks, const TrainConfig& config) {
    config.validate();
    std::vector<std::size_t> dims;
    dims.push_back(tasks.input_dim());
    for (std::size_t h : config.hidden) dims.push_back(h);
    dims.push_back(tasks.classes());

    TrainerState state = make_trainer(dims, config);
    RunResult result;

    for (std::size_t t = 0; t < tasks.task_count(); ++t) {
        std::vector<std::uint32_t> order = tasks.train_indices(t);
        for (std::size_t epoch = 0; epoch < config.epochs_per_task; ++epoch) {
            state.rng.shuffle(order);
            double loss_sum = 0.0;
            std::size_t batches = 0;
            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t count = std::min(config.batch_size, order.size() - start);
                const Batch batch = tasks.make_batch(t, order.data() + start, count);
                const StepRecord rec = train_step(state, batch, config, result.log);
                loss_sum += rec.loss;
                ++batches;
            }
            result.log.epochs.push_back(
                {t, epoch, batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0});
        }

        finalize_task(state, tasks, t, config, result.log);

        std::vector<double> row(t + 1);
        for (std::size_t k = 0; k <= t; ++k)
            row[k] = evaluate_accuracy(state.params, tasks, k);
        result.accuracy.append_row(std::move(row));
    }
    return result;
}

}  // namespace onglab
