#pragma once

#include <cmath>
#include <functional>

#include "onglab/linalg.hpp"
#include "onglab/model.hpp"
#include "onglab/rng.hpp"

namespace testutil {

using onglab::Mat;
using onglab::ModelParams;
using onglab::Rng;
using onglab::Vec;

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

inline Mat random_mat(std::size_t rows, std::size_t cols, Rng& rng) {
    Mat m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

inline Mat random_symmetric(std::size_t n, Rng& rng) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = rng.normal();
    return m;
}

inline Vec random_vec(std::size_t n, Rng& rng) {
    Vec v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

inline double frob_rel_dist(const Mat& a, const Mat& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        num += d * d;
        den += b.data()[i] * b.data()[i];
    }
    return std::sqrt(num / std::max(den, 1e-300));
}

// Plain Gaussian elimination with partial pivoting. Test-side oracle only,
// so it shares nothing with the code paths it checks.
inline Vec gauss_solve(Mat a, Vec b) {
    const std::size_t n = a.rows();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
            std::swap(b[col], b[piv]);
        }
        const double d = a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / d;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
            b[r] -= f * b[col];
        }
    }
    Vec x(n);
    for (std::size_t r = n; r-- > 0;) {
        double s = b[r];
        for (std::size_t c = r + 1; c < n; ++c) s -= a(r, c) * x[c];
        x[r] = s / a(r, r);
    }
    return x;
}

// Least-squares residual of g against the columns spanned by `basis`
// (rows = vectors), solved through the normal equations.
inline Vec normal_equations_residual(const std::vector<Vec>& basis, const Vec& g) {
    const std::size_t k = basis.size();
    Mat gram(k, k);
    Vec rhs(k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) gram(i, j) = onglab::dot(basis[i], basis[j]);
        rhs[i] = onglab::dot(basis[i], g);
    }
    const Vec coef = gauss_solve(std::move(gram), std::move(rhs));
    Vec r = g;
    for (std::size_t i = 0; i < k; ++i) onglab::axpy(-coef[i], basis[i], r);
    return r;
}

// Central finite difference of a scalar function of the parameters, one
// coordinate at a time.
inline Vec finite_difference_grad(const ModelParams& params,
                                  const std::function<double(const ModelParams&)>& f,
                                  double h = 1e-5) {
    const std::size_t n = params.param_count();
    Vec grad(n);
    Vec e(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        e[i] = 1.0;
        ModelParams plus = params;
        onglab::apply_update(plus, e, -h);  // w_i += h
        ModelParams minus = params;
        onglab::apply_update(minus, e, h);  // w_i -= h
        grad[i] = (f(plus) - f(minus)) / (2.0 * h);
        e[i] = 0.0;
    }
    return grad;
}

}  // namespace testutil
