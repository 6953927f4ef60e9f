#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "onglab/errors.hpp"

namespace onglab {

/// Lower-triangular record of a_{t,k}: accuracy on task k after training
/// through task t. Indices are 0-based; row t holds entries for k = 0..t.
class AccuracyMatrix {
public:
    void append_row(std::vector<double> row);
    std::size_t tasks_completed() const { return rows_.size(); }
    double at(std::size_t trained_through, std::size_t eval_task) const;
    const std::vector<std::vector<double>>& rows() const { return rows_; }

    bool operator==(const AccuracyMatrix& other) const = default;

private:
    std::vector<std::vector<double>> rows_;
};

/// A_T for T = `upto` tasks: mean accuracy over tasks 1..T after training
/// through task T.
double average_accuracy(const AccuracyMatrix& m, std::size_t upto);

/// F_T for T = `upto` tasks: mean over past tasks of the peak-minus-final
/// accuracy drop, the peak taken over the recorded history before task T.
double average_forgetting(const AccuracyMatrix& m, std::size_t upto);

struct EpochRecord {
    std::size_t task = 0;   // 0-based
    std::size_t epoch = 0;  // 0-based within the task
    double mean_loss = 0.0;
};

struct StepRecord {
    std::uint64_t step = 0;
    std::size_t task = 0;
    double loss = 0.0;
    double g_norm = 0.0;        // ‖g‖ fed to projection (after preconditioning)
    double g_tilde_norm = 0.0;  // ‖g̃‖ actually applied
    double descent_inner = 0.0;
    bool descent_ok = false;
};

struct RunCounters {
    std::uint64_t steps = 0;
    std::uint64_t fisher_factor_updates = 0;
    std::uint64_t fisher_scaling_updates = 0;
    std::uint64_t fisher_refreshes = 0;
    std::uint64_t fisher_preconditions = 0;
    std::uint64_t basis_projections = 0;
    std::uint64_t basis_adds = 0;
    std::uint64_t basis_rejects = 0;
    std::uint64_t memory_stored = 0;
};

struct RunLog {
    std::vector<EpochRecord> epochs;
    std::vector<StepRecord> steps;
    RunCounters counters;
};

/// Writes accuracy_matrix.csv, metrics.json and curves.csv under `out_dir`.
/// `variant_name` labels the metrics.json entry.
void emit_results(const AccuracyMatrix& m, const RunLog& log, const std::string& out_dir,
                  const std::string& variant_name);

AccuracyMatrix parse_accuracy_matrix_csv(const std::string& path);

}  // namespace onglab
