#include "onglab/model.hpp"

#include <cmath>
#include <sstream>

namespace onglab {

namespace {

// [W | b] as a single out×(in+1) matrix.
Mat combined(const Layer& layer) {
    const std::size_t out = layer.weight.rows();
    const std::size_t in = layer.weight.cols();
    Mat wb(out, in + 1);
    for (std::size_t r = 0; r < out; ++r) {
        const double* wrow = layer.weight.row(r);
        double* row = wb.row(r);
        for (std::size_t c = 0; c < in; ++c) row[c] = wrow[c];
        row[in] = layer.bias[r];
    }
    return wb;
}

Mat append_ones(const Mat& x) {
    Mat a(x.rows(), x.cols() + 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* src = x.row(i);
        double* dst = a.row(i);
        for (std::size_t j = 0; j < x.cols(); ++j) dst[j] = src[j];
        dst[x.cols()] = 1.0;
    }
    return a;
}

// Backpropagates from an output-layer gradient and accumulates the flat
// parameter gradient scaled by `scale`. Also hands back the per-layer deltas.
BackwardResult backprop(const ModelParams& params, const ForwardCache& cache, Mat delta,
                        double scale) {
    const std::size_t n_layers = params.layers.size();
    BackwardResult out;
    out.grad.assign(params.param_count(), 0.0);
    out.stats.delta.resize(n_layers);

    std::size_t offset = out.grad.size();
    for (std::size_t li = n_layers; li-- > 0;) {
        const Layer& layer = params.layers[li];
        const std::size_t n_out = layer.weight.rows();
        const std::size_t n_in = layer.weight.cols();
        offset -= n_out * n_in + n_out;

        // [Wgrad | bgrad] = scale · δᵀ · a_hom
        Mat wb_grad = mat_mul_at(delta, cache.a_hom[li]);
        double* gw = out.grad.data() + offset;
        double* gb = gw + n_out * n_in;
        for (std::size_t r = 0; r < n_out; ++r) {
            const double* row = wb_grad.row(r);
            for (std::size_t c = 0; c < n_in; ++c) gw[r * n_in + c] = scale * row[c];
            gb[r] = scale * row[n_in];
        }

        out.stats.delta[li] = std::move(delta);
        if (li > 0) {
            delta = mat_mul(out.stats.delta[li], layer.weight);
            const Mat& z_prev = cache.z[li - 1];
            for (std::size_t i = 0; i < delta.size(); ++i) {
                if (z_prev.data()[i] <= 0.0) delta.data()[i] = 0.0;
            }
        }
    }
    return out;
}

}  // namespace

std::size_t ModelParams::param_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

ModelParams init_kaiming(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw StructuralError("init_kaiming: need at least input and output dims");
    for (std::size_t d : dims)
        if (d == 0) throw StructuralError("init_kaiming: zero layer width");

    Rng rng(seed);
    ModelParams params;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.weight = Mat(dims[l + 1], dims[l]);
        const double stddev = std::sqrt(2.0 / static_cast<double>(dims[l]));
        for (std::size_t i = 0; i < layer.weight.size(); ++i)
            layer.weight.data()[i] = stddev * rng.normal();
        layer.bias.assign(dims[l + 1], 0.0);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

ForwardCache forward(const ModelParams& params, const Mat& x) {
    if (x.rows() == 0) throw StructuralError("forward: empty batch");
    if (x.cols() != params.input_dim()) {
        std::ostringstream msg;
        msg << "forward: input width " << x.cols() << " does not match model input "
            << params.input_dim();
        throw StructuralError(msg.str());
    }
    ForwardCache cache;
    Mat act = x;
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        cache.a_hom.push_back(append_ones(act));
        Mat z = mat_mul_bt(cache.a_hom.back(), combined(params.layers[li]));
        if (!all_finite(z)) throw NumericalError("forward: non-finite activations");
        if (li + 1 < params.layers.size()) {
            act = z;
            for (std::size_t i = 0; i < act.size(); ++i)
                if (act.data()[i] < 0.0) act.data()[i] = 0.0;
        }
        cache.z.push_back(std::move(z));
    }

    const Mat& logits = cache.z.back();
    cache.probs = Mat(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const double* zrow = logits.row(i);
        double* prow = cache.probs.row(i);
        double zmax = zrow[0];
        for (std::size_t c = 1; c < logits.cols(); ++c) zmax = std::max(zmax, zrow[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols(); ++c) {
            prow[c] = std::exp(zrow[c] - zmax);
            sum += prow[c];
        }
        for (std::size_t c = 0; c < logits.cols(); ++c) prow[c] /= sum;
    }
    return cache;
}

BackwardResult backward(const ModelParams& params, const ForwardCache& cache,
                        const std::vector<std::uint8_t>& labels) {
    const Mat& logits = cache.logits();
    const std::size_t n = logits.rows();
    const std::size_t classes = logits.cols();
    if (labels.size() != n) throw StructuralError("backward: label count != batch size");
    for (std::uint8_t y : labels)
        if (y >= classes) throw StructuralError("backward: label out of range");

    // δ_L(i) = p(i) − onehot(y_i), the gradient of example i's own loss.
    Mat delta = cache.probs;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        delta(i, labels[i]) -= 1.0;
        const double* zrow = logits.row(i);
        double zmax = zrow[0];
        for (std::size_t c = 1; c < classes; ++c) zmax = std::max(zmax, zrow[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(zrow[c] - zmax);
        loss += std::log(sum) + zmax - zrow[labels[i]];
    }
    loss /= static_cast<double>(n);

    BackwardResult res = backprop(params, cache, std::move(delta), 1.0 / static_cast<double>(n));
    res.loss = loss;
    if (!std::isfinite(res.loss) || !all_finite(res.grad))
        throw NumericalError("backward: non-finite loss or gradient");
    return res;
}

BackwardResult loss_and_backward(const ModelParams& params, const Batch& batch) {
    return backward(params, forward(params, batch.x), batch.y);
}

GradientVec logit_gradient(const ModelParams& params, const Vec& x, std::size_t class_index) {
    if (class_index >= params.output_dim())
        throw StructuralError("logit_gradient: class index out of range");
    Mat xm(1, x.size());
    for (std::size_t j = 0; j < x.size(); ++j) xm(0, j) = x[j];
    ForwardCache cache = forward(params, xm);
    Mat delta(1, params.output_dim());
    delta(0, class_index) = 1.0;
    return backprop(params, cache, std::move(delta), 1.0).grad;
}

std::vector<std::uint8_t> sample_labels(const ForwardCache& cache, Rng& rng) {
    const Mat& p = cache.probs;
    std::vector<std::uint8_t> labels(p.rows());
    for (std::size_t i = 0; i < p.rows(); ++i) {
        const double u = rng.uniform01();
        const double* prow = p.row(i);
        double acc = 0.0;
        std::size_t pick = p.cols() - 1;
        for (std::size_t c = 0; c < p.cols(); ++c) {
            acc += prow[c];
            if (u < acc) {
                pick = c;
                break;
            }
        }
        labels[i] = static_cast<std::uint8_t>(pick);
    }
    return labels;
}

void apply_update(ModelParams& params, const GradientVec& direction, double lr) {
    std::size_t k = 0;
    for (Layer& layer : params.layers) {
        for (std::size_t i = 0; i < layer.weight.size(); ++i)
            layer.weight.data()[i] -= lr * direction[k++];
        for (double& b : layer.bias) b -= lr * direction[k++];
    }
}

GradientVec flatten_params(const ModelParams& params) {
    GradientVec flat;
    flat.reserve(params.param_count());
    for (const Layer& layer : params.layers) {
        flat.insert(flat.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
        flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
    return flat;
}

}  // namespace onglab
