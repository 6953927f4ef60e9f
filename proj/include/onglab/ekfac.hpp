#pragma once

#include <cstdint>
#include <vector>

#include "onglab/linalg.hpp"
#include "onglab/model.hpp"

namespace onglab {

/// Per-layer EKFAC state. The layer's Fisher block is approximated as
/// A ⊗ B in the eigenbases q_a, q_b, with `scalings` holding the
/// eigenvalue-corrected second moments on the Kronecker diagonal.
struct LayerFisherState {
    Mat factor_a;  // (in+1)×(in+1) running estimate of E[a aᵀ]
    Mat factor_b;  // out×out running estimate of E[δ δᵀ]
    Mat q_a;       // eigenbasis of factor_a (empty until first refresh)
    Mat q_b;       // eigenbasis of factor_b
    Mat scalings;  // out×(in+1), second moments in the Kronecker eigenbasis
};

struct FisherApprox {
    std::vector<LayerFisherState> layers;
    double decay = 0.95;
    double damping = 1e-3;
    bool empirical = false;  // false: true Fisher via labels sampled from the model
    std::uint64_t factor_updates = 0;

    bool has_eigenbasis() const {
        for (const LayerFisherState& l : layers)
            if (l.q_a.size() == 0) return false;
        return !layers.empty();
    }
};

FisherApprox make_fisher(const ModelParams& params, double decay, double damping,
                         bool empirical);

/// Folds one batch of activation/delta statistics into the running
/// Kronecker factors.
void update_factors(FisherApprox& fisher, const ForwardCache& cache,
                    const BackwardStats& stats);

/// Re-diagonalizes both factors per layer and re-seeds the scalings with the
/// Kronecker products of the factor eigenvalues.
void refresh_eigenbasis(FisherApprox& fisher);

/// Running average of the squared per-example gradients projected into the
/// Kronecker eigenbasis (the eigenvalue correction).
void update_scalings(FisherApprox& fisher, const ForwardCache& cache,
                     const BackwardStats& stats);

/// g ← F⁻¹g through the eigenbasis: per layer, q_b·((q_bᵀ G q_a) ⊘
/// (scalings + damping))·q_aᵀ on the out×(in+1) gradient matrix G.
GradientVec precondition(const FisherApprox& fisher, const ModelParams& params,
                         const GradientVec& grad);

}  // namespace onglab
