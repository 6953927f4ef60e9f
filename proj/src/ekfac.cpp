#include "onglab/ekfac.hpp"

#include <algorithm>
#include <cmath>

#include "onglab/errors.hpp"

namespace onglab {

namespace {

void check_stats_shapes(const FisherApprox& fisher, const ForwardCache& cache,
                        const BackwardStats& stats) {
    if (cache.a_hom.size() != fisher.layers.size() || stats.delta.size() != fisher.layers.size())
        throw StructuralError("ekfac: statistics layer count does not match Fisher state");
    for (std::size_t l = 0; l < fisher.layers.size(); ++l) {
        if (cache.a_hom[l].cols() != fisher.layers[l].factor_a.rows() ||
            stats.delta[l].cols() != fisher.layers[l].factor_b.rows())
            throw StructuralError("ekfac: statistics shape does not match Fisher state");
    }
}

void blend(Mat& acc, const Mat& fresh, double decay) {
    for (std::size_t i = 0; i < acc.size(); ++i)
        acc.data()[i] = decay * acc.data()[i] + (1.0 - decay) * fresh.data()[i];
}

// Gradient slice of layer l as the out×(in+1) matrix [Wgrad | bgrad].
Mat slice_to_matrix(const GradientVec& grad, std::size_t offset, std::size_t out,
                    std::size_t in) {
    Mat g(out, in + 1);
    const double* gw = grad.data() + offset;
    const double* gb = gw + out * in;
    for (std::size_t r = 0; r < out; ++r) {
        double* row = g.row(r);
        for (std::size_t c = 0; c < in; ++c) row[c] = gw[r * in + c];
        row[in] = gb[r];
    }
    return g;
}

void matrix_to_slice(const Mat& g, GradientVec& grad, std::size_t offset, std::size_t out,
                     std::size_t in) {
    double* gw = grad.data() + offset;
    double* gb = gw + out * in;
    for (std::size_t r = 0; r < out; ++r) {
        const double* row = g.row(r);
        for (std::size_t c = 0; c < in; ++c) gw[r * in + c] = row[c];
        gb[r] = row[in];
    }
}

}  // namespace

FisherApprox make_fisher(const ModelParams& params, double decay, double damping,
                         bool empirical) {
    if (!(damping >= 0.0)) throw StructuralError("ekfac: damping must be nonnegative");
    if (!(decay > 0.0 && decay < 1.0) && decay != 0.0)
        throw StructuralError("ekfac: decay must be in [0, 1)");
    FisherApprox fisher;
    fisher.decay = decay;
    fisher.damping = damping;
    fisher.empirical = empirical;
    for (const Layer& layer : params.layers) {
        LayerFisherState state;
        const std::size_t in1 = layer.weight.cols() + 1;
        const std::size_t out = layer.weight.rows();
        state.factor_a = Mat(in1, in1);
        state.factor_b = Mat(out, out);
        fisher.layers.push_back(std::move(state));
    }
    return fisher;
}

void update_factors(FisherApprox& fisher, const ForwardCache& cache,
                    const BackwardStats& stats) {
    check_stats_shapes(fisher, cache, stats);
    // The very first batch seeds the running averages outright; blending
    // into a zero start would leave the estimate underscaled for ~1/(1-decay)
    // steps and the preconditioner would overshoot accordingly.
    const bool first = fisher.factor_updates == 0;
    for (std::size_t l = 0; l < fisher.layers.size(); ++l) {
        LayerFisherState& state = fisher.layers[l];
        if (first) {
            state.factor_a = gram_matrix(cache.a_hom[l]);
            state.factor_b = gram_matrix(stats.delta[l]);
        } else {
            blend(state.factor_a, gram_matrix(cache.a_hom[l]), fisher.decay);
            blend(state.factor_b, gram_matrix(stats.delta[l]), fisher.decay);
        }
    }
    ++fisher.factor_updates;
}

void refresh_eigenbasis(FisherApprox& fisher) {
    if (fisher.factor_updates == 0)
        throw StateError("refresh_eigenbasis: factors have never been updated");
    for (LayerFisherState& state : fisher.layers) {
        EigenResult ea = sym_eig(state.factor_a);
        EigenResult eb = sym_eig(state.factor_b);
        state.q_a = std::move(ea.q);
        state.q_b = std::move(eb.q);
        // Kronecker spectrum as the starting diagonal; PSD factors may show
        // eigenvalues a hair below zero, which are clamped.
        state.scalings = Mat(state.factor_b.rows(), state.factor_a.rows());
        for (std::size_t i = 0; i < eb.lambda.size(); ++i) {
            const double lb = std::max(eb.lambda[i], 0.0);
            for (std::size_t j = 0; j < ea.lambda.size(); ++j)
                state.scalings(i, j) = lb * std::max(ea.lambda[j], 0.0);
        }
    }
}

void update_scalings(FisherApprox& fisher, const ForwardCache& cache,
                     const BackwardStats& stats) {
    if (!fisher.has_eigenbasis())
        throw StateError("update_scalings: eigenbasis has not been computed");
    check_stats_shapes(fisher, cache, stats);
    for (std::size_t l = 0; l < fisher.layers.size(); ++l) {
        LayerFisherState& state = fisher.layers[l];
        // Rows of these products are the per-example eigenbasis coordinates.
        Mat pa = mat_mul(cache.a_hom[l], state.q_a);
        Mat pb = mat_mul(stats.delta[l], state.q_b);
        for (std::size_t i = 0; i < pa.size(); ++i) pa.data()[i] *= pa.data()[i];
        for (std::size_t i = 0; i < pb.size(); ++i) pb.data()[i] *= pb.data()[i];
        // mean over examples of (q_bᵀδ)²·((q_aᵀa)²)ᵀ
        Mat fresh = mat_mul_at(pb, pa);
        const double inv_n = 1.0 / static_cast<double>(pa.rows());
        for (std::size_t i = 0; i < fresh.size(); ++i) fresh.data()[i] *= inv_n;
        blend(state.scalings, fresh, fisher.decay);
    }
}

GradientVec precondition(const FisherApprox& fisher, const ModelParams& params,
                         const GradientVec& grad) {
    if (!fisher.has_eigenbasis())
        throw StateError("precondition: Fisher state is not populated");
    if (grad.size() != params.param_count())
        throw StructuralError("precondition: gradient length does not match model");

    GradientVec out(grad.size());
    std::size_t offset = 0;
    for (std::size_t l = 0; l < fisher.layers.size(); ++l) {
        const LayerFisherState& state = fisher.layers[l];
        const std::size_t n_out = params.layers[l].weight.rows();
        const std::size_t n_in = params.layers[l].weight.cols();

        Mat g = slice_to_matrix(grad, offset, n_out, n_in);
        Mat t = eigenbasis_transform(state.q_b, g, state.q_a, TransformDir::Forward);
        for (std::size_t r = 0; r < t.rows(); ++r) {
            double* trow = t.row(r);
            const double* srow = state.scalings.row(r);
            for (std::size_t c = 0; c < t.cols(); ++c)
                trow[c] /= srow[c] + fisher.damping;
        }
        Mat r = eigenbasis_transform(state.q_b, t, state.q_a, TransformDir::Inverse);
        matrix_to_slice(r, out, offset, n_out, n_in);
        offset += n_out * n_in + n_out;
    }
    if (!all_finite(out)) throw NumericalError("precondition: non-finite result");
    return out;
}

}  // namespace onglab
