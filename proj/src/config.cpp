#include "onglab/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

namespace onglab {

namespace fs = std::filesystem;

ExperimentConfig parse_config(const std::vector<std::string>& args) {
    ExperimentConfig cfg;
    std::string variant = "OGD";

    CLI::App app{"onglab: continual-learning experiments with OGD/ONG variants"};
    app.set_config("--config", "", "flat key = value configuration file");
    app.allow_config_extras(CLI::config_extras_mode::error);

    app.add_option("--benchmark", cfg.benchmark, "permuted | rotated | synthetic")
        ->check(CLI::IsMember({"permuted", "rotated", "synthetic"}));
    app.add_option("--variant", variant, "SGD | OGD | OGD+ | ONG | ONG+");
    app.add_option("--tasks", cfg.tasks, "number of tasks in the sequence");
    app.add_option("--epochs", cfg.train.epochs_per_task, "epochs per task");
    app.add_option("--lr", cfg.train.learning_rate, "learning rate");
    app.add_option("--batch-size", cfg.train.batch_size, "minibatch size");
    app.add_option("--memory-per-task", cfg.train.memory_per_task,
                   "stored gradient directions per task");
    app.add_option("--replay-sample", cfg.train.replay_sample_size,
                   "replay draw size for the + variants (default: memory-per-task)");
    app.add_flag("--memory-all-logits", cfg.train.memory_all_logits,
                 "store gradient directions for every class logit, not just the label's");
    app.add_option("--seed", cfg.seeds, "seed list")->delimiter(',');
    app.add_option("--mnist-images", cfg.mnist_images, "IDX image file (optionally .gz)");
    app.add_option("--mnist-labels", cfg.mnist_labels, "IDX label file (optionally .gz)");
    app.add_option("--out", cfg.out_dir, "output root (default: $ONGLAB_OUT or ./results)");
    app.add_option("--ekfac-damping", cfg.train.ekfac.damping, "EKFAC damping");
    app.add_option("--ekfac-decay", cfg.train.ekfac.decay, "EKFAC running-average decay");
    app.add_option("--ekfac-refresh", cfg.train.ekfac.refresh_period,
                   "steps between eigenbasis refreshes");
    app.add_flag("--ekfac-empirical", cfg.train.ekfac.empirical,
                 "use ground-truth labels for the Fisher estimate");
    app.add_option("--rotation-step-degrees", cfg.rotation_step_degrees,
                   "angle increment per rotated task");
    app.add_option("--train-subset", cfg.train_subset,
                   "per-task training-sample cap for desk-scale runs (0 = all)");
    app.add_flag("--identity-first", cfg.identity_first,
                 "make the first permuted task the identity permutation");
    app.add_option("--synthetic-dim", cfg.synthetic_dim, "synthetic input dimension");
    app.add_option("--synthetic-classes", cfg.synthetic_classes, "synthetic class count");
    app.add_option("--synthetic-samples", cfg.synthetic_samples,
                   "synthetic samples per task");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::Error& e) {
        throw ConfigError(e.what());
    }

    const auto parsed = parse_variant(variant);
    if (!parsed) throw ConfigError("variant: unknown value '" + variant + "'");
    cfg.train.variant = *parsed;

    if (cfg.out_dir.empty()) {
        const char* env = std::getenv("ONGLAB_OUT");
        cfg.out_dir = env != nullptr && *env != '\0' ? env : "results";
    }
    if (cfg.tasks == 0) throw ConfigError("tasks must be positive");
    if (cfg.seeds.empty()) throw ConfigError("seed list must not be empty");
    if (!(cfg.rotation_step_degrees == cfg.rotation_step_degrees))
        throw ConfigError("rotation-step-degrees must be finite");
    cfg.train.validate();
    return cfg;
}

std::string render_config(const ExperimentConfig& cfg, std::uint64_t seed) {
    std::ostringstream out;
    out.precision(17);
    out << "benchmark = " << cfg.benchmark << '\n';
    out << "variant = " << variant_name(cfg.train.variant) << '\n';
    out << "tasks = " << cfg.tasks << '\n';
    out << "epochs = " << cfg.train.epochs_per_task << '\n';
    out << "lr = " << cfg.train.learning_rate << '\n';
    out << "batch-size = " << cfg.train.batch_size << '\n';
    out << "memory-per-task = " << cfg.train.memory_per_task << '\n';
    out << "replay-sample = " << cfg.train.replay_sample_size << '\n';
    out << "memory-all-logits = " << (cfg.train.memory_all_logits ? "true" : "false") << '\n';
    out << "seed = " << seed << '\n';
    if (!cfg.mnist_images.empty()) out << "mnist-images = " << cfg.mnist_images << '\n';
    if (!cfg.mnist_labels.empty()) out << "mnist-labels = " << cfg.mnist_labels << '\n';
    out << "out = " << cfg.out_dir << '\n';
    out << "ekfac-damping = " << cfg.train.ekfac.damping << '\n';
    out << "ekfac-decay = " << cfg.train.ekfac.decay << '\n';
    out << "ekfac-refresh = " << cfg.train.ekfac.refresh_period << '\n';
    out << "ekfac-empirical = " << (cfg.train.ekfac.empirical ? "true" : "false") << '\n';
    out << "rotation-step-degrees = " << cfg.rotation_step_degrees << '\n';
    out << "train-subset = " << cfg.train_subset << '\n';
    out << "identity-first = " << (cfg.identity_first ? "true" : "false") << '\n';
    out << "synthetic-dim = " << cfg.synthetic_dim << '\n';
    out << "synthetic-classes = " << cfg.synthetic_classes << '\n';
    out << "synthetic-samples = " << cfg.synthetic_samples << '\n';
    return out.str();
}

TaskSequence build_tasks(const ExperimentConfig& cfg, std::uint64_t seed) {
    SplitConfig split;
    split.seed = seed;
    split.train_subset = cfg.train_subset;

    if (cfg.benchmark == "synthetic") {
        return make_synthetic(cfg.tasks, cfg.synthetic_dim, cfg.synthetic_classes,
                              cfg.synthetic_samples, seed, split);
    }

    for (const std::string& path : {cfg.mnist_images, cfg.mnist_labels}) {
        if (path.empty())
            throw ConfigError(cfg.benchmark +
                              " benchmark requires --mnist-images and --mnist-labels");
        if (!fs::exists(path)) throw ConfigError("dataset path does not exist: " + path);
    }
    Dataset base = load_mnist_idx(cfg.mnist_images, cfg.mnist_labels);

    if (cfg.benchmark == "permuted")
        return make_permuted(std::move(base), cfg.tasks, seed, split, cfg.identity_first);

    std::vector<double> angles;
    for (std::size_t t = 0; t < cfg.tasks; ++t)
        angles.push_back(cfg.rotation_step_degrees * static_cast<double>(t));
    return make_rotated(std::move(base), angles, split);
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
}

void write_run_log(const fs::path& path, const RunLog& log) {
    std::ostringstream out;
    out.precision(10);
    for (const EpochRecord& e : log.epochs)
        out << "task " << e.task + 1 << " epoch " << e.epoch + 1 << " mean_loss "
            << e.mean_loss << '\n';
    std::size_t descent_violations = 0;
    for (const StepRecord& s : log.steps)
        if (!s.descent_ok) ++descent_violations;
    out << "steps " << log.counters.steps << '\n';
    out << "descent_violations " << descent_violations << '\n';
    out << "fisher_factor_updates " << log.counters.fisher_factor_updates << '\n';
    out << "fisher_refreshes " << log.counters.fisher_refreshes << '\n';
    out << "fisher_preconditions " << log.counters.fisher_preconditions << '\n';
    out << "basis_projections " << log.counters.basis_projections << '\n';
    out << "basis_adds " << log.counters.basis_adds << '\n';
    out << "basis_rejects " << log.counters.basis_rejects << '\n';
    out << "memory_stored " << log.counters.memory_stored << '\n';
    for (const StepRecord& s : log.steps)
        out << "step " << s.step << " task " << s.task + 1 << " loss " << s.loss << " g_norm "
            << s.g_norm << " g_tilde_norm " << s.g_tilde_norm << " descent_inner "
            << s.descent_inner << " descent_ok " << (s.descent_ok ? 1 : 0) << '\n';
    write_text(path, out.str());
}

}  // namespace

int run(const ExperimentConfig& cfg) {
    for (std::uint64_t seed : cfg.seeds) {
        const fs::path dir = fs::path(cfg.out_dir) /
                             (std::string(variant_name(cfg.train.variant)) + "_seed" +
                              std::to_string(seed));
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory " + dir.string());
        write_text(dir / "config_resolved.txt", render_config(cfg, seed));

        try {
            TaskSequence tasks = build_tasks(cfg, seed);
            TrainConfig tc = cfg.train;
            tc.seed = seed;
            const RunResult result = run_experiment(tasks, tc);

            emit_results(result.accuracy, result.log, dir.string(),
                         variant_name(cfg.train.variant));
            write_run_log(dir / "run_log.txt", result.log);

            const std::size_t T = result.accuracy.tasks_completed();
            char line[160];
            std::snprintf(line, sizeof line, "%s seed %llu: average_accuracy %.4f%%",
                          variant_name(cfg.train.variant),
                          static_cast<unsigned long long>(seed),
                          100.0 * average_accuracy(result.accuracy, T));
            std::cout << line;
            if (T >= 2) {
                std::snprintf(line, sizeof line, ", average_forgetting %.4f points",
                              100.0 * average_forgetting(result.accuracy, T));
                std::cout << line;
            }
            std::cout << '\n';
        } catch (const NumericalError& e) {
            write_text(dir / "ABORTED.txt", std::string("numerical abort: ") + e.what() + "\n");
            std::cerr << "error [numerical] seed " << seed << ": " << e.what() << '\n';
            return 3;
        }
    }
    return 0;
}

}  // namespace onglab
