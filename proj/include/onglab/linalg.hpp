#pragma once

#include <cstddef>
#include <vector>

#include "onglab/errors.hpp"

namespace onglab {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool operator==(const Mat& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct EigenResult {
    Mat q;       // columns are eigenvectors
    Vec lambda;  // sorted descending
};

enum class TransformDir { Forward, Inverse };

Mat mat_mul(const Mat& a, const Mat& b);     // a·b
Mat mat_mul_at(const Mat& a, const Mat& b);  // aᵀ·b
Mat mat_mul_bt(const Mat& a, const Mat& b);  // a·bᵀ
Mat transpose(const Mat& a);

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Input asymmetric beyond 1e-10 relative is rejected; smaller drift is
/// symmetrized away. Throws NumericalError if the off-diagonal norm has not
/// fallen below 1e-12 relative after 100 sweeps.
EigenResult sym_eig(const Mat& m);

/// (1/n)·xᵀx for an n×d matrix of row samples.
Mat gram_matrix(const Mat& x);

/// Forward: qbᵀ·g·qa (into the eigenbasis). Inverse: qb·g·qaᵀ (back out).
Mat eigenbasis_transform(const Mat& qb, const Mat& g, const Mat& qa, TransformDir dir);

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);        // squared Euclidean norm
void axpy(double alpha, const Vec& x, Vec& y);  // y += alpha·x
bool all_finite(const Vec& v);
bool all_finite(const Mat& m);

}  // namespace onglab
