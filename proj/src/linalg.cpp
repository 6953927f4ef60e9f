#include "onglab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace onglab {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw StructuralError(msg);
}

}  // namespace

Mat mat_mul(const Mat& a, const Mat& b) {
    require(a.cols() == b.rows(), "mat_mul: inner dimensions do not match");
    Mat c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* crow = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Mat mat_mul_at(const Mat& a, const Mat& b) {
    require(a.rows() == b.rows(), "mat_mul_at: row counts do not match");
    Mat c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

Mat mat_mul_bt(const Mat& a, const Mat& b) {
    require(a.cols() == b.cols(), "mat_mul_bt: column counts do not match");
    Mat c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
            crow[j] = s;
        }
    }
    return c;
}

Mat transpose(const Mat& a) {
    Mat t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

EigenResult sym_eig(const Mat& m) {
    require(m.rows() == m.cols(), "sym_eig: matrix is not square");
    require(m.rows() >= 1, "sym_eig: empty matrix");
    const std::size_t n = m.rows();

    double max_abs = 0.0;
    double max_asym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            max_abs = std::max(max_abs, std::abs(m(i, j)));
            max_asym = std::max(max_asym, std::abs(m(i, j) - m(j, i)));
        }
    }
    if (max_abs > 0.0 && max_asym > 1e-10 * max_abs)
        throw StructuralError("sym_eig: input is not symmetric within 1e-10 relative");

    // Work on the symmetrized copy; running-average factors accumulate drift.
    Mat a(n, n);
    double frob2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            a(i, j) = 0.5 * (m(i, j) + m(j, i));
            frob2 += a(i, j) * a(i, j);
        }
    }
    const double off_target = 1e-12 * std::sqrt(frob2);

    // u accumulates rotations with eigenvectors as rows; transposed on exit.
    Mat u = Mat::identity(n);

    const auto off_norm = [&a, n]() {
        double off2 = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off2 += a(i, j) * a(i, j);
        return std::sqrt(2.0 * off2);
    };

    // Rotations are processed per block pair so the expensive column-side
    // updates stay in a small scratch block and the full columns are only
    // mirrored from the rows once per block pair instead of per rotation.
    // With A symmetric, row updates already carry every cross entry; only
    // the block-diagonal scratch needs both sides of the rotation.
    const std::size_t blk = 48;
    const std::size_t n_blocks = (n + blk - 1) / blk;
    const auto block_begin = [&](std::size_t b) { return b * blk; };
    const auto block_end = [&](std::size_t b) { return std::min(n, (b + 1) * blk); };

    std::vector<std::size_t> members;  // rows of the active block pair
    Mat d;                             // scratch copy of A[members][members]
    std::vector<std::size_t> pos(n);   // global row -> scratch index

    const int max_sweeps = 100;
    double off = off_norm();
    for (int sweep = 0; sweep < max_sweeps && off > off_target; ++sweep, off = off_norm()) {
        // Early sweeps skip elements that cannot yet matter (Numerical
        // Recipes threshold schedule); later sweeps rotate everything.
        const double tresh = sweep < 3 ? 0.1 * off / static_cast<double>(n * n) : 0.0;
        for (std::size_t bi = 0; bi < n_blocks; ++bi) {
            for (std::size_t bj = bi; bj < n_blocks; ++bj) {
                members.clear();
                for (std::size_t r = block_begin(bi); r < block_end(bi); ++r)
                    members.push_back(r);
                if (bj != bi)
                    for (std::size_t r = block_begin(bj); r < block_end(bj); ++r)
                        members.push_back(r);
                const std::size_t m = members.size();
                for (std::size_t k = 0; k < m; ++k) pos[members[k]] = k;

                d = Mat(m, m);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < m; ++j) d(i, j) = a(members[i], members[j]);

                const auto rotate = [&](std::size_t p, std::size_t q) {
                    const std::size_t lp = pos[p];
                    const std::size_t lq = pos[q];
                    const double apq = d(lp, lq);
                    if (apq == 0.0) return;
                    const double app = d(lp, lp);
                    const double aqq = d(lq, lq);
                    // Elements too small to move the diagonal are flushed.
                    const double g = 100.0 * std::abs(apq);
                    if (sweep > 4 && std::abs(app) + g == std::abs(app) &&
                        std::abs(aqq) + g == std::abs(aqq)) {
                        d(lp, lq) = d(lq, lp) = 0.0;
                        return;
                    }
                    if (std::abs(apq) <= tresh) return;

                    const double theta = 0.5 * (aqq - app) / apq;
                    double t;
                    if (std::abs(theta) > 1e150) {
                        t = 0.5 / theta;
                    } else {
                        t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                        if (theta < 0.0) t = -t;
                    }
                    const double c = 1.0 / std::sqrt(1.0 + t * t);
                    const double s = t * c;

                    // cross entries: plain row rotation (scratch shadows the
                    // in-block columns, so garbage there is harmless)
                    double* __restrict rowp = a.row(p);
                    double* __restrict rowq = a.row(q);
                    for (std::size_t j = 0; j < n; ++j) {
                        const double ajp = rowp[j];
                        const double ajq = rowq[j];
                        rowp[j] = c * ajp - s * ajq;
                        rowq[j] = s * ajp + c * ajq;
                    }

                    // scratch block gets both sides of the similarity
                    double* __restrict dp = d.row(lp);
                    double* __restrict dq = d.row(lq);
                    for (std::size_t j = 0; j < m; ++j) {
                        const double ajp = dp[j];
                        const double ajq = dq[j];
                        dp[j] = c * ajp - s * ajq;
                        dq[j] = s * ajp + c * ajq;
                    }
                    for (std::size_t i = 0; i < m; ++i) {
                        const double aip = d(i, lp);
                        const double aiq = d(i, lq);
                        d(i, lp) = c * aip - s * aiq;
                        d(i, lq) = s * aip + c * aiq;
                    }
                    d(lp, lp) = app - t * apq;
                    d(lq, lq) = aqq + t * apq;
                    d(lp, lq) = 0.0;
                    d(lq, lp) = 0.0;

                    double* __restrict up = u.row(p);
                    double* __restrict uq = u.row(q);
                    for (std::size_t j = 0; j < n; ++j) {
                        const double vp = up[j];
                        const double vq = uq[j];
                        up[j] = c * vp - s * vq;
                        uq[j] = s * vp + c * vq;
                    }
                };

                if (bi == bj) {
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = i + 1; j < m; ++j)
                            rotate(members[i], members[j]);
                } else {
                    const std::size_t split = block_end(bi) - block_begin(bi);
                    for (std::size_t i = 0; i < split; ++i)
                        for (std::size_t j = split; j < m; ++j)
                            rotate(members[i], members[j]);
                }

                // settle the scratch block and mirror the rows into columns
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < m; ++j) a(members[i], members[j]) = d(i, j);
                for (std::size_t i = 0; i < m; ++i) {
                    const std::size_t r = members[i];
                    const double* __restrict row = a.row(r);
                    for (std::size_t j = 0; j < n; ++j) a(j, r) = row[j];
                }
            }
        }
    }
    if (off > off_target) {
        std::ostringstream msg;
        msg << "sym_eig: off-diagonal residual " << off << " above target " << off_target
            << " after " << max_sweeps << " sweeps";
        throw NumericalError(msg.str());
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    EigenResult out;
    out.lambda.resize(n);
    out.q = Mat(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.lambda[k] = a(order[k], order[k]);
        const double* urow = u.row(order[k]);
        for (std::size_t i = 0; i < n; ++i) out.q(i, k) = urow[i];
    }
    return out;
}

Mat gram_matrix(const Mat& x) {
    if (x.rows() == 0) throw StructuralError("gram_matrix: empty batch");
    Mat g = mat_mul_at(x, x);
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= inv_n;
    return g;
}

Mat eigenbasis_transform(const Mat& qb, const Mat& g, const Mat& qa, TransformDir dir) {
    require(qb.rows() == qb.cols(), "eigenbasis_transform: qb is not square");
    require(qa.rows() == qa.cols(), "eigenbasis_transform: qa is not square");
    require(g.rows() == qb.rows() && g.cols() == qa.rows(),
            "eigenbasis_transform: g does not conform to the bases");
    if (dir == TransformDir::Forward) return mat_mul(mat_mul_at(qb, g), qa);
    return mat_mul_bt(mat_mul(qb, g), qa);
}

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vec& a) { return dot(a, a); }

void axpy(double alpha, const Vec& x, Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

bool all_finite(const Mat& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(m.data()[i])) return false;
    return true;
}

}  // namespace onglab
