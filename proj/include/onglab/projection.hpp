#pragma once

#include <cstddef>
#include <vector>

#include "onglab/linalg.hpp"

namespace onglab {

struct DescentCheck {
    double inner = 0.0;  // ⟨g̃, g_pre⟩
    bool ok = false;     // inner agrees with ‖g̃‖² within 1e-6 relative
};

/// The memory of stored gradient directions, kept mutually orthogonal.
/// Vectors are stored unnormalized; squared norms are cached.
class OrthoBasis {
public:
    /// capacity 0 means unbounded; otherwise the oldest vector is evicted
    /// when a new one would exceed it.
    explicit OrthoBasis(std::size_t capacity = 0, double drop_tolerance = 1e-10)
        : capacity_(capacity), drop_tolerance_(drop_tolerance) {}

    std::size_t size() const { return vectors_.size(); }
    bool empty() const { return vectors_.empty(); }
    std::size_t dim() const { return vectors_.empty() ? 0 : vectors_.front().size(); }
    const std::vector<Vec>& vectors() const { return vectors_; }
    double squared_norm(std::size_t i) const { return sq_norms_[i]; }

    /// g minus its projection onto every stored direction. The result is
    /// orthogonal to the whole basis.
    Vec project_out(const Vec& g) const;

    /// Appends u if its residual against the basis is large enough to be a
    /// genuinely new direction; near-zero residuals are discarded. Returns
    /// whether the vector was stored.
    bool add_direction(Vec u);

private:
    std::vector<Vec> vectors_;
    std::vector<double> sq_norms_;
    std::size_t capacity_;
    double drop_tolerance_;
};

/// The descent-direction identity: after projecting the (natural) gradient
/// g_pre to g̃, the inner product ⟨g̃, g_pre⟩ must equal ‖g̃‖².
DescentCheck descent_check(const Vec& g_pre, const Vec& g_tilde);

}  // namespace onglab
