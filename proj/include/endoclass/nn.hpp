#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "endoclass/image.hpp"
#include "endoclass/matrix.hpp"

namespace endoclass {
namespace nn {

// Architecture descriptor. Text form: "linear:192x10" (single affine layer)
// or "mlp:192x64x10" (affine chain with ReLU between layers).
struct Arch {
    bool has_hidden = false;
    std::vector<int> dims;  // [in, hidden..., out]

    static Arch parse(const std::string& text);
    std::string to_string() const;

    int layer_count() const { return static_cast<int>(dims.size()) - 1; }
    int in_dim() const { return dims.front(); }
    int out_dim() const { return dims.back(); }
    std::size_t param_count() const;
    void validate() const;
};

// Flat parameter vector with per-layer views. Layout, per layer l:
// weight matrix (out x in, row-major) followed by the bias vector.
struct ModelParams {
    Arch arch;
    std::vector<double> flat;

    ModelParams() = default;
    ModelParams(Arch a, std::vector<double> values);

    std::size_t weight_offset(int layer) const;
    std::size_t bias_offset(int layer) const;
    std::span<const double> weight(int layer) const;
    std::span<const double> bias(int layer) const;
};

// Area-average pool a normalized image to (out_h, out_w), then flatten
// channel-major: out[c*out_h*out_w + y*out_w + x]. Length 3*out_h*out_w.
std::vector<double> featurize(const ImageBuffer& img, int out_h, int out_w);

// Affine(+ReLU) chain over a batch of feature rows. Rows are processed
// independently with a fixed accumulation order, so batched and one-row-at-a-
// time execution agree bit for bit.
LogitMatrix forward(const ModelParams& params, const Matrix& features);

// Row-wise stable softmax: exp(z - max(z)) / sum.
ProbMatrix softmax(const LogitMatrix& logits);

// Reverse-mode gradients of the affine/ReLU chain given dL/dlogits.
// Returned flat vector matches the ModelParams layout; per-sample
// contributions are summed in row order.
std::vector<double> backward(const ModelParams& params, const Matrix& features,
                             const Matrix& dloss_dlogits);

// Xavier-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
ModelParams init_params(const Arch& arch, std::uint64_t seed);

}  // namespace nn
}  // namespace endoclass
