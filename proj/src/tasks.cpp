#include "onglab/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <zlib.h>

#include "onglab/rng.hpp"

namespace onglab {

namespace {

std::vector<unsigned char> read_file_maybe_gzip(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (raw.size() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b) {
        gzFile gz = gzopen(path.c_str(), "rb");
        if (!gz) throw IoError("cannot reopen gzip file " + path);
        std::vector<unsigned char> out;
        unsigned char buf[1 << 16];
        int n;
        while ((n = gzread(gz, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
        const bool bad = n < 0;
        gzclose(gz);
        if (bad) throw FormatError("gzip stream in " + path + " is corrupt");
        return out;
    }
    return raw;
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::string& path) {
    if (offset + 4 > buf.size()) {
        std::ostringstream msg;
        msg << path << ": truncated at offset " << offset << " (need 4 header bytes)";
        throw FormatError(msg.str());
    }
    return (std::uint32_t(buf[offset]) << 24) | (std::uint32_t(buf[offset + 1]) << 16) |
           (std::uint32_t(buf[offset + 2]) << 8) | std::uint32_t(buf[offset + 3]);
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    const std::vector<unsigned char> img = read_file_maybe_gzip(images_path);
    const std::vector<unsigned char> lab = read_file_maybe_gzip(labels_path);

    const std::uint32_t img_magic = read_be32(img, 0, images_path);
    if (img_magic != 0x00000803) {
        std::ostringstream msg;
        msg << images_path << ": bad images magic 0x" << std::hex << img_magic
            << " at offset 0 (expected 0x803)";
        throw FormatError(msg.str());
    }
    const std::uint32_t n = read_be32(img, 4, images_path);
    const std::uint32_t rows = read_be32(img, 8, images_path);
    const std::uint32_t cols = read_be32(img, 12, images_path);
    const std::size_t d = std::size_t(rows) * cols;
    if (rows == 0 || cols == 0) throw FormatError(images_path + ": zero image dimensions");
    if (img.size() != 16 + std::size_t(n) * d) {
        std::ostringstream msg;
        msg << images_path << ": expected " << 16 + std::size_t(n) * d << " bytes for " << n
            << " images, found " << img.size() << " (payload at offset 16)";
        throw FormatError(msg.str());
    }

    const std::uint32_t lab_magic = read_be32(lab, 0, labels_path);
    if (lab_magic != 0x00000801) {
        std::ostringstream msg;
        msg << labels_path << ": bad labels magic 0x" << std::hex << lab_magic
            << " at offset 0 (expected 0x801)";
        throw FormatError(msg.str());
    }
    const std::uint32_t n_lab = read_be32(lab, 4, labels_path);
    if (n_lab != n) {
        std::ostringstream msg;
        msg << labels_path << ": label count " << n_lab << " does not match image count " << n;
        throw FormatError(msg.str());
    }
    if (lab.size() != 8 + std::size_t(n)) {
        std::ostringstream msg;
        msg << labels_path << ": expected " << 8 + std::size_t(n) << " bytes, found "
            << lab.size() << " (payload at offset 8)";
        throw FormatError(msg.str());
    }

    Dataset ds;
    ds.images = Mat(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* src = img.data() + 16 + i * d;
        double* dst = ds.images.row(i);
        for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] / 255.0;
    }
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char y = lab[8 + i];
        if (y > 9) {
            std::ostringstream msg;
            msg << labels_path << ": label " << int(y) << " at offset " << 8 + i
                << " outside [0, 10)";
            throw FormatError(msg.str());
        }
        ds.labels[i] = y;
    }
    ds.classes = 10;
    return ds;
}

Vec rotate_image(const Vec& image, std::size_t side, double angle_degrees) {
    if (image.size() != side * side)
        throw StructuralError("rotate_image: image is not side×side");
    const double rad = angle_degrees * std::numbers::pi / 180.0;
    const double c = std::cos(rad);
    const double s = std::sin(rad);
    const double center = (static_cast<double>(side) - 1.0) / 2.0;

    Vec out(image.size(), 0.0);
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t col = 0; col < side; ++col) {
            // inverse map: where in the source does this target pixel come from
            const double dx = static_cast<double>(col) - center;
            const double dy = static_cast<double>(r) - center;
            const double sx = c * dx + s * dy + center;
            const double sy = -s * dx + c * dy + center;
            const double fx = std::floor(sx);
            const double fy = std::floor(sy);
            const double wx = sx - fx;
            const double wy = sy - fy;
            double v = 0.0;
            for (int oy = 0; oy <= 1; ++oy) {
                for (int ox = 0; ox <= 1; ++ox) {
                    const long px = static_cast<long>(fx) + ox;
                    const long py = static_cast<long>(fy) + oy;
                    if (px < 0 || py < 0 || px >= static_cast<long>(side) ||
                        py >= static_cast<long>(side))
                        continue;
                    const double w = (ox ? wx : 1.0 - wx) * (oy ? wy : 1.0 - wy);
                    v += w * image[static_cast<std::size_t>(py) * side +
                                   static_cast<std::size_t>(px)];
                }
            }
            out[r * side + col] = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

std::size_t TaskSequence::input_dim() const { return source(0).dim(); }

std::size_t TaskSequence::classes() const { return source(0).classes; }

Vec TaskSequence::example(std::size_t task, std::uint32_t row) const {
    const Dataset& src = source(task);
    const TaskSpec& sp = specs_[task];
    const double* base_row = src.images.row(row);
    Vec x(src.dim());
    switch (sp.kind) {
        case TaskSpec::Kind::Permuted:
            for (std::size_t j = 0; j < x.size(); ++j) x[j] = base_row[sp.permutation[j]];
            break;
        case TaskSpec::Kind::Rotated: {
            Vec tmp(base_row, base_row + src.dim());
            const auto side = static_cast<std::size_t>(std::lround(std::sqrt(
                static_cast<double>(src.dim()))));
            x = rotate_image(tmp, side, sp.angle_degrees);
            break;
        }
        case TaskSpec::Kind::Synthetic:
            std::copy(base_row, base_row + src.dim(), x.begin());
            break;
    }
    return x;
}

std::uint8_t TaskSequence::label(std::size_t task, std::uint32_t row) const {
    return source(task).labels[row];
}

Batch TaskSequence::make_batch(std::size_t task, const std::uint32_t* rows,
                               std::size_t count) const {
    if (count == 0) throw StructuralError("make_batch: empty index set");
    Batch b;
    b.x = Mat(count, source(task).dim());
    b.y.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Vec x = example(task, rows[i]);
        std::copy(x.begin(), x.end(), b.x.row(i));
        b.y[i] = label(task, rows[i]);
    }
    return b;
}

void TaskSequence::build_splits(const SplitConfig& split) {
    if (!(split.val_fraction > 0.0 && split.val_fraction < 1.0))
        throw StructuralError("TaskSequence: val_fraction must be in (0, 1)");
    train_idx_.resize(specs_.size());
    val_idx_.resize(specs_.size());
    for (std::size_t t = 0; t < specs_.size(); ++t) {
        const std::size_t n = source(t).size();
        if (n < 2) throw StructuralError("TaskSequence: task data too small to split");
        std::vector<std::uint32_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::uint32_t{0});
        Rng rng(Rng::derive(split.seed, 0xab5e ^ t));
        rng.shuffle(idx);
        std::size_t use = n;
        if (split.train_subset > 0) use = std::min(use, split.train_subset);
        std::size_t n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(split.val_fraction * static_cast<double>(use))));
        if (n_val >= use) n_val = use - 1;
        train_idx_[t].assign(idx.begin(), idx.begin() + (use - n_val));
        val_idx_[t].assign(idx.begin() + (use - n_val), idx.begin() + use);
    }
}

TaskSequence make_permuted(Dataset base, std::size_t k_tasks, std::uint64_t master_seed,
                           const SplitConfig& split, bool identity_first) {
    if (k_tasks < 1) throw StructuralError("make_permuted: need at least one task");
    TaskSequence seq;
    seq.base_ = std::move(base);
    const std::size_t d = seq.base_.dim();
    for (std::size_t t = 0; t < k_tasks; ++t) {
        TaskSpec sp;
        sp.kind = TaskSpec::Kind::Permuted;
        sp.index = t;
        sp.seed = Rng::derive(master_seed, t);
        sp.permutation.resize(d);
        std::iota(sp.permutation.begin(), sp.permutation.end(), std::uint32_t{0});
        if (!(identity_first && t == 0)) {
            Rng rng(sp.seed);
            rng.shuffle(sp.permutation);
        }
        seq.specs_.push_back(std::move(sp));
    }
    seq.build_splits(split);
    return seq;
}

TaskSequence make_rotated(Dataset base, const std::vector<double>& angles_degrees,
                          const SplitConfig& split) {
    if (angles_degrees.empty()) throw StructuralError("make_rotated: need at least one angle");
    for (double a : angles_degrees)
        if (!std::isfinite(a)) throw StructuralError("make_rotated: non-finite angle");
    TaskSequence seq;
    seq.base_ = std::move(base);
    const auto side = static_cast<std::size_t>(
        std::lround(std::sqrt(static_cast<double>(seq.base_.dim()))));
    if (side * side != seq.base_.dim())
        throw StructuralError("make_rotated: images are not square");
    for (std::size_t t = 0; t < angles_degrees.size(); ++t) {
        TaskSpec sp;
        sp.kind = TaskSpec::Kind::Rotated;
        sp.index = t;
        sp.angle_degrees = angles_degrees[t];
        seq.specs_.push_back(std::move(sp));
    }
    seq.build_splits(split);
    return seq;
}

TaskSequence make_synthetic(std::size_t n_tasks, std::size_t input_dim, std::size_t n_classes,
                            std::size_t samples_per_task, std::uint64_t seed,
                            const SplitConfig& split) {
    if (n_tasks < 1) throw StructuralError("make_synthetic: need at least one task");
    if (input_dim < 2 || n_classes < 2 || n_classes > 2 * input_dim)
        throw StructuralError("make_synthetic: need input_dim >= 2 and 2 <= classes <= 2·dim");
    if (samples_per_task < 2 * n_classes)
        throw StructuralError("make_synthetic: too few samples per task");

    // Well-separated Gaussian clusters: means sit on ±axes, noise is small
    // relative to their spacing, and each task rotates the whole input space.
    const double separation = 4.0;
    const double noise = 0.5;

    TaskSequence seq;
    for (std::size_t t = 0; t < n_tasks; ++t) {
        Rng rng(Rng::derive(seed, 0x57a5 + t));

        // random orthogonal matrix via Gram-Schmidt on a Gaussian matrix
        Mat q(input_dim, input_dim);
        for (std::size_t i = 0; i < input_dim; ++i) {
            Vec v(input_dim);
            for (double& x : v) x = rng.normal();
            for (std::size_t j = 0; j < i; ++j) {
                const double* prev = q.row(j);
                double coeff = 0.0;
                for (std::size_t k = 0; k < input_dim; ++k) coeff += v[k] * prev[k];
                for (std::size_t k = 0; k < input_dim; ++k) v[k] -= coeff * prev[k];
            }
            double nrm = std::sqrt(dot(v, v));
            if (nrm < 1e-8) throw NumericalError("make_synthetic: degenerate rotation draw");
            for (std::size_t k = 0; k < input_dim; ++k) q(i, k) = v[k] / nrm;
        }

        Dataset ds;
        ds.images = Mat(samples_per_task, input_dim);
        ds.labels.resize(samples_per_task);
        ds.classes = n_classes;
        Vec raw(input_dim);
        for (std::size_t i = 0; i < samples_per_task; ++i) {
            const std::size_t cls = i % n_classes;
            for (double& x : raw) x = noise * rng.normal();
            raw[(cls / 2) % input_dim] += (cls % 2 == 0 ? separation : -separation);
            // x = qᵀ·raw (rows of q are the orthonormal directions)
            double* dst = ds.images.row(i);
            for (std::size_t k = 0; k < input_dim; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < input_dim; ++j) acc += q(j, k) * raw[j];
                dst[k] = acc;
            }
            ds.labels[i] = static_cast<std::uint8_t>(cls);
        }

        TaskSpec sp;
        sp.kind = TaskSpec::Kind::Synthetic;
        sp.index = t;
        sp.seed = Rng::derive(seed, 0x57a5 + t);
        seq.per_task_.push_back(std::move(ds));
        seq.specs_.push_back(std::move(sp));
    }
    seq.build_splits(split);
    return seq;
}

}  // namespace onglab
