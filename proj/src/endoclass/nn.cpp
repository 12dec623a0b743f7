#include "endoclass/nn.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "endoclass/rng.hpp"

namespace endoclass {
namespace nn {

Arch Arch::parse(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("arch descriptor must look like 'linear:192x10' or 'mlp:192x64x10'");
    std::string kind = text.substr(0, colon);
    Arch arch;
    if (kind == "linear")
        arch.has_hidden = false;
    else if (kind == "mlp")
        arch.has_hidden = true;
    else
        throw std::invalid_argument("unknown arch kind '" + kind + "'");

    std::stringstream ss(text.substr(colon + 1));
    std::string part;
    while (std::getline(ss, part, 'x')) {
        try {
            std::size_t used = 0;
            int d = std::stoi(part, &used);
            if (used != part.size()) throw std::invalid_argument(part);
            arch.dims.push_back(d);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad dimension '" + part + "' in arch descriptor");
        }
    }
    arch.validate();
    return arch;
}

std::string Arch::to_string() const {
    std::string out = has_hidden ? "mlp:" : "linear:";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(dims[i]);
    }
    return out;
}

void Arch::validate() const {
    if (has_hidden ? dims.size() < 3 : dims.size() != 2)
        throw std::invalid_argument("arch '" + std::string(has_hidden ? "mlp" : "linear") +
                                    "' has the wrong number of dimensions");
    for (int d : dims)
        if (d <= 0) throw std::invalid_argument("arch dimensions must be positive");
}

std::size_t Arch::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        n += static_cast<std::size_t>(dims[l + 1]) * (static_cast<std::size_t>(dims[l]) + 1);
    return n;
}

ModelParams::ModelParams(Arch a, std::vector<double> values) : arch(std::move(a)), flat(std::move(values)) {
    arch.validate();
    if (flat.size() != arch.param_count())
        throw std::invalid_argument("parameter vector length does not match the arch descriptor");
}

std::size_t ModelParams::weight_offset(int layer) const {
    std::size_t off = 0;
    for (int l = 0; l < layer; ++l)
        off += static_cast<std::size_t>(arch.dims[l + 1]) * (static_cast<std::size_t>(arch.dims[l]) + 1);
    return off;
}

std::size_t ModelParams::bias_offset(int layer) const {
    return weight_offset(layer) +
           static_cast<std::size_t>(arch.dims[layer + 1]) * static_cast<std::size_t>(arch.dims[layer]);
}

std::span<const double> ModelParams::weight(int layer) const {
    return {flat.data() + weight_offset(layer),
            static_cast<std::size_t>(arch.dims[layer + 1]) * static_cast<std::size_t>(arch.dims[layer])};
}

std::span<const double> ModelParams::bias(int layer) const {
    return {flat.data() + bias_offset(layer), static_cast<std::size_t>(arch.dims[layer + 1])};
}

std::vector<double> featurize(const ImageBuffer& img, int out_h, int out_w) {
    if (!img.normalized) throw std::invalid_argument("featurize expects a normalized image");
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("featurize: pool size must be positive");
    const int w = img.width, h = img.height;
    const double cell_w = static_cast<double>(w) / out_w;
    const double cell_h = static_cast<double>(h) / out_h;
    std::vector<double> out(static_cast<std::size_t>(3) * out_h * out_w, 0.0);
    for (int c = 0; c < 3; ++c) {
        for (int oy = 0; oy < out_h; ++oy) {
            double y0 = oy * cell_h, y1 = (oy + 1) * cell_h;
            int iy0 = static_cast<int>(std::floor(y0));
            int iy1 = std::min(h, static_cast<int>(std::ceil(y1)));
            for (int ox = 0; ox < out_w; ++ox) {
                double x0 = ox * cell_w, x1 = (ox + 1) * cell_w;
                int ix0 = static_cast<int>(std::floor(x0));
                int ix1 = std::min(w, static_cast<int>(std::ceil(x1)));
                double acc = 0.0;
                for (int iy = iy0; iy < iy1; ++iy) {
                    double wy = std::min(y1, static_cast<double>(iy + 1)) - std::max(y0, static_cast<double>(iy));
                    for (int ix = ix0; ix < ix1; ++ix) {
                        double wx = std::min(x1, static_cast<double>(ix + 1)) -
                                    std::max(x0, static_cast<double>(ix));
                        acc += wx * wy * img.at(ix, iy, c);
                    }
                }
                out[(static_cast<std::size_t>(c) * out_h + oy) * out_w + ox] = acc / (cell_w * cell_h);
            }
        }
    }
    return out;
}

LogitMatrix forward(const ModelParams& params, const Matrix& features) {
    const Arch& arch = params.arch;
    if (features.cols != static_cast<std::size_t>(arch.in_dim()))
        throw std::invalid_argument("forward: feature length does not match arch input dim");
    Matrix out(features.rows, static_cast<std::size_t>(arch.out_dim()));
    const int layers = arch.layer_count();
    std::vector<double> cur, next;
    for (std::size_t r = 0; r < features.rows; ++r) {
        cur.assign(features.row_ptr(r), features.row_ptr(r) + features.cols);
        for (int l = 0; l < layers; ++l) {
            const int in = arch.dims[l], on = arch.dims[l + 1];
            auto w = params.weight(l);
            auto b = params.bias(l);
            next.assign(static_cast<std::size_t>(on), 0.0);
            for (int j = 0; j < on; ++j) {
                double acc = b[static_cast<std::size_t>(j)];
                const double* wrow = w.data() + static_cast<std::size_t>(j) * in;
                for (int i = 0; i < in; ++i) acc += wrow[i] * cur[static_cast<std::size_t>(i)];
                next[static_cast<std::size_t>(j)] = l + 1 < layers && acc < 0.0 ? 0.0 : acc;
            }
            cur.swap(next);
        }
        for (std::size_t c = 0; c < out.cols; ++c) out(r, c) = cur[c];
    }
    return out;
}

ProbMatrix softmax(const LogitMatrix& logits) {
    ProbMatrix probs(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        double m = logits(r, 0);
        for (std::size_t c = 1; c < logits.cols; ++c) m = std::max(m, logits(r, c));
        if (std::isnan(m)) throw std::invalid_argument("softmax: NaN logit");
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c) {
            double e = std::exp(logits(r, c) - m);
            probs(r, c) = e;
            sum += e;
        }
        for (std::size_t c = 0; c < logits.cols; ++c) probs(r, c) /= sum;
    }
    return probs;
}

std::vector<double> backward(const ModelParams& params, const Matrix& features,
                             const Matrix& dloss_dlogits) {
    const Arch& arch = params.arch;
    const int layers = arch.layer_count();
    if (features.cols != static_cast<std::size_t>(arch.in_dim()))
        throw std::invalid_argument("backward: feature length does not match arch input dim");
    if (dloss_dlogits.rows != features.rows ||
        dloss_dlogits.cols != static_cast<std::size_t>(arch.out_dim()))
        throw std::invalid_argument("backward: dL/dlogits shape mismatch");

    std::vector<double> grads(params.flat.size(), 0.0);
    // activations[l] is the input to layer l; pre_relu[l] its affine output.
    std::vector<std::vector<double>> activations(static_cast<std::size_t>(layers) + 1);
    std::vector<std::vector<double>> pre_relu(static_cast<std::size_t>(layers));
    std::vector<double> delta, delta_prev;

    for (std::size_t r = 0; r < features.rows; ++r) {
        activations[0].assign(features.row_ptr(r), features.row_ptr(r) + features.cols);
        for (int l = 0; l < layers; ++l) {
            const int in = arch.dims[l], on = arch.dims[l + 1];
            auto w = params.weight(l);
            auto b = params.bias(l);
            auto& z = pre_relu[static_cast<std::size_t>(l)];
            z.assign(static_cast<std::size_t>(on), 0.0);
            for (int j = 0; j < on; ++j) {
                double acc = b[static_cast<std::size_t>(j)];
                const double* wrow = w.data() + static_cast<std::size_t>(j) * in;
                const auto& a = activations[static_cast<std::size_t>(l)];
                for (int i = 0; i < in; ++i) acc += wrow[i] * a[static_cast<std::size_t>(i)];
                z[static_cast<std::size_t>(j)] = acc;
            }
            auto& a_next = activations[static_cast<std::size_t>(l) + 1];
            a_next = z;
            if (l + 1 < layers)
                for (double& v : a_next) v = v < 0.0 ? 0.0 : v;
        }

        delta.assign(dloss_dlogits.row_ptr(r), dloss_dlogits.row_ptr(r) + dloss_dlogits.cols);
        for (int l = layers - 1; l >= 0; --l) {
            const int in = arch.dims[l], on = arch.dims[l + 1];
            double* gw = grads.data() + params.weight_offset(l);
            double* gb = grads.data() + params.bias_offset(l);
            const auto& a = activations[static_cast<std::size_t>(l)];
            for (int j = 0; j < on; ++j) {
                double d = delta[static_cast<std::size_t>(j)];
                gb[j] += d;
                double* gwrow = gw + static_cast<std::size_t>(j) * in;
                for (int i = 0; i < in; ++i) gwrow[i] += d * a[static_cast<std::size_t>(i)];
            }
            if (l > 0) {
                auto w = params.weight(l);
                delta_prev.assign(static_cast<std::size_t>(in), 0.0);
                for (int j = 0; j < on; ++j) {
                    double d = delta[static_cast<std::size_t>(j)];
                    const double* wrow = w.data() + static_cast<std::size_t>(j) * in;
                    for (int i = 0; i < in; ++i) delta_prev[static_cast<std::size_t>(i)] += d * wrow[i];
                }
                const auto& z = pre_relu[static_cast<std::size_t>(l) - 1];
                for (int i = 0; i < in; ++i)
                    if (z[static_cast<std::size_t>(i)] <= 0.0) delta_prev[static_cast<std::size_t>(i)] = 0.0;
                delta.swap(delta_prev);
            }
        }
    }
    return grads;
}

ModelParams init_params(const Arch& arch, std::uint64_t seed) {
    arch.validate();
    std::vector<double> flat(arch.param_count(), 0.0);
    Rng rng(seed);
    std::size_t off = 0;
    for (int l = 0; l + 1 < static_cast<int>(arch.dims.size()); ++l) {
        const int fan_in = arch.dims[l], fan_out = arch.dims[l + 1];
        double bound = std::sqrt(6.0 / (static_cast<double>(fan_in) + static_cast<double>(fan_out)));
        std::size_t n_w = static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(fan_out);
        for (std::size_t i = 0; i < n_w; ++i) flat[off + i] = rng.uniform(-bound, bound);
        off += n_w + static_cast<std::size_t>(fan_out);  // biases stay 0
    }
    return ModelParams(arch, std::move(flat));
}

}  // namespace nn
}  // namespace endoclass
