#include "onglab/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace onglab {

namespace {

std::string full_precision(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

void AccuracyMatrix::append_row(std::vector<double> row) {
    if (row.size() != rows_.size() + 1)
        throw StructuralError("AccuracyMatrix: row length must equal tasks completed + 1");
    for (double a : row)
        if (!(a >= 0.0 && a <= 1.0))
            throw StructuralError("AccuracyMatrix: accuracy outside [0, 1]");
    rows_.push_back(std::move(row));
}

double AccuracyMatrix::at(std::size_t trained_through, std::size_t eval_task) const {
    if (trained_through >= rows_.size() || eval_task > trained_through)
        throw StructuralError("AccuracyMatrix: index outside the recorded triangle");
    return rows_[trained_through][eval_task];
}

double average_accuracy(const AccuracyMatrix& m, std::size_t upto) {
    if (upto < 1 || upto > m.tasks_completed())
        throw StructuralError("average_accuracy: task count out of range");
    double sum = 0.0;
    for (std::size_t k = 0; k < upto; ++k) sum += m.at(upto - 1, k);
    return sum / static_cast<double>(upto);
}

double average_forgetting(const AccuracyMatrix& m, std::size_t upto) {
    if (upto < 2) throw StructuralError("average_forgetting: needs at least two tasks");
    if (upto > m.tasks_completed())
        throw StructuralError("average_forgetting: task count out of range");
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < upto; ++k) {
        double peak = m.at(k, k);  // entries exist only from the task's own row on
        for (std::size_t t = k + 1; t + 1 < upto; ++t) peak = std::max(peak, m.at(t, k));
        sum += peak - m.at(upto - 1, k);
    }
    return sum / static_cast<double>(upto - 1);
}

void emit_results(const AccuracyMatrix& m, const RunLog& log, const std::string& out_dir,
                  const std::string& variant_name) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    const std::size_t T = m.tasks_completed();

    {
        std::ofstream f(fs::path(out_dir) / "accuracy_matrix.csv");
        if (!f) throw IoError("emit_results: cannot write accuracy_matrix.csv in " + out_dir);
        f << "trained_through,eval_task,accuracy\n";
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t k = 0; k <= t; ++k)
                f << (t + 1) << ',' << (k + 1) << ',' << full_precision(m.at(t, k)) << '\n';
    }

    {
        std::ofstream f(fs::path(out_dir) / "curves.csv");
        if (!f) throw IoError("emit_results: cannot write curves.csv in " + out_dir);
        f << "task,checkpoint,accuracy\n";
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t k = 0; k <= t; ++k)
                f << (k + 1) << ',' << (t + 1) << ',' << full_precision(m.at(t, k)) << '\n';
    }

    {
        nlohmann::ordered_json j;
        j["variant"] = variant_name;
        j["tasks"] = T;
        j["average_accuracy"] = average_accuracy(m, T);
        if (T >= 2) j["average_forgetting"] = average_forgetting(m, T);
        std::vector<double> final_row;
        for (std::size_t k = 0; k < T; ++k) final_row.push_back(m.at(T - 1, k));
        j["per_task_final"] = final_row;
        j["steps"] = log.counters.steps;
        std::ofstream f(fs::path(out_dir) / "metrics.json");
        if (!f) throw IoError("emit_results: cannot write metrics.json in " + out_dir);
        f << j.dump(2) << '\n';
    }
}

AccuracyMatrix parse_accuracy_matrix_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("parse_accuracy_matrix_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "trained_through,eval_task,accuracy")
        throw FormatError("parse_accuracy_matrix_csv: bad header in " + path);

    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::size_t t = 0, k = 0;
        double acc = 0.0;
        char c1 = 0, c2 = 0;
        if (!(ss >> t >> c1 >> k >> c2 >> acc) || c1 != ',' || c2 != ',')
            throw FormatError("parse_accuracy_matrix_csv: bad row '" + line + "'");
        if (t == 0 || k == 0 || k > t)
            throw FormatError("parse_accuracy_matrix_csv: indices outside the triangle");
        if (rows.size() < t) rows.resize(t);
        if (rows[t - 1].size() < k) rows[t - 1].resize(k);
        rows[t - 1][k - 1] = acc;
    }
    AccuracyMatrix m;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != t + 1)
            throw FormatError("parse_accuracy_matrix_csv: incomplete row for task " +
                              std::to_string(t + 1));
        m.append_row(std::move(rows[t]));
    }
    return m;
}

}  // namespace onglab
