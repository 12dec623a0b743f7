#pragma once

#include <cstdint>
#include <vector>

#include "endoclass/catalog.hpp"

namespace endoclass {
namespace sampling {

// N_i = number of manifest records with label i.
std::vector<std::int64_t> class_counts(const LabeledManifest& manifest, std::size_t k);

// w_i = 1/N_i; empty classes get weight 0 (they have no samples to draw).
std::vector<double> inverse_frequency_weights(const std::vector<std::int64_t>& counts);

// Per-sample draw weights. Weights must be finite and non-negative; at least
// one must be positive by the time indices are drawn.
struct SamplerSpec {
    std::vector<double> per_sample_weights;
    bool replacement = true;
    std::uint64_t seed = 0;

    void validate() const;
};

// Draws n indices with replacement, P(j) proportional to weight_j, via Vose's
// alias method (two uniforms per draw, deterministic for a given seed).
std::vector<std::size_t> draw_epoch_indices(const SamplerSpec& spec, std::size_t n);

// Survival function of the chi-square distribution (regularized upper
// incomplete gamma). Used to turn goodness-of-fit statistics into p-values.
double chi_square_pvalue(double statistic, int dof);

}  // namespace sampling
}  // namespace endoclass
