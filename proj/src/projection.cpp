#include "onglab/projection.hpp"

#include <cmath>

#include "onglab/errors.hpp"

namespace onglab {

Vec OrthoBasis::project_out(const Vec& g) const {
    if (!vectors_.empty() && g.size() != dim())
        throw StructuralError("project_out: dimension does not match basis");
    Vec r = g;
    for (std::size_t i = 0; i < vectors_.size(); ++i) {
        const double coeff = dot(r, vectors_[i]) / sq_norms_[i];
        axpy(-coeff, vectors_[i], r);
    }
    return r;
}

bool OrthoBasis::add_direction(Vec u) {
    if (!vectors_.empty() && u.size() != dim())
        throw StructuralError("add_direction: dimension does not match basis");

    // One reorthogonalization pass keeps the pairwise-orthogonality
    // invariant from drifting over hundreds of additions.
    if (!vectors_.empty()) u = project_out(u);

    const double nrm = std::sqrt(norm2(u));
    double threshold = 1e-10;
    if (!vectors_.empty()) {
        double mean_norm = 0.0;
        for (double sq : sq_norms_) mean_norm += std::sqrt(sq);
        mean_norm /= static_cast<double>(sq_norms_.size());
        threshold = drop_tolerance_ * mean_norm;
    }
    if (!(nrm > threshold)) return false;

    if (capacity_ > 0 && vectors_.size() == capacity_) {
        vectors_.erase(vectors_.begin());
        sq_norms_.erase(sq_norms_.begin());
    }
    sq_norms_.push_back(nrm * nrm);
    vectors_.push_back(std::move(u));
    return true;
}

DescentCheck descent_check(const Vec& g_pre, const Vec& g_tilde) {
    DescentCheck dc;
    dc.inner = dot(g_tilde, g_pre);
    const double sq = norm2(g_tilde);
    dc.ok = std::abs(dc.inner - sq) <= 1e-6 * std::max(1.0, sq);
    return dc;
}

}  // namespace onglab
