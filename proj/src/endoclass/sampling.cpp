#include "endoclass/sampling.hpp"

#include <cmath>
#include <stdexcept>

#include "endoclass/rng.hpp"

namespace endoclass {
namespace sampling {

std::vector<std::int64_t> class_counts(const LabeledManifest& manifest, std::size_t k) {
    std::vector<std::int64_t> counts(k, 0);
    for (const auto& rec : manifest.records) {
        if (rec.label < 0 || static_cast<std::size_t>(rec.label) >= k)
            throw std::invalid_argument("class_counts: label out of range");
        counts[static_cast<std::size_t>(rec.label)]++;
    }
    return counts;
}

std::vector<double> inverse_frequency_weights(const std::vector<std::int64_t>& counts) {
    std::vector<double> w(counts.size(), 0.0);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] < 0) throw std::invalid_argument("inverse_frequency_weights: negative count");
        if (counts[i] > 0) w[i] = 1.0 / static_cast<double>(counts[i]);
    }
    return w;
}

void SamplerSpec::validate() const {
    for (double w : per_sample_weights) {
        if (!std::isfinite(w)) throw std::invalid_argument("sampler weights must be finite");
        if (w < 0.0) throw std::invalid_argument("sampler weights must be non-negative");
    }
}

std::vector<std::size_t> draw_epoch_indices(const SamplerSpec& spec, std::size_t n) {
    spec.validate();
    if (!spec.replacement)
        throw std::invalid_argument("weighted sampling without replacement is not supported");
    if (n == 0) throw std::invalid_argument("draw_epoch_indices: n must be positive");
    const std::size_t k = spec.per_sample_weights.size();
    if (k == 0) throw std::invalid_argument("draw_epoch_indices: empty weight vector");

    double total = 0.0;
    for (double w : spec.per_sample_weights) total += w;
    if (total <= 0.0) throw std::invalid_argument("draw_epoch_indices: all-zero weights");

    // Vose alias table. Worklists are processed LIFO so construction is
    // deterministic.
    std::vector<double> prob(k, 0.0);
    std::vector<std::size_t> alias(k, 0);
    std::vector<double> scaled(k);
    for (std::size_t i = 0; i < k; ++i)
        scaled[i] = spec.per_sample_weights[i] / total * static_cast<double>(k);

    std::vector<std::size_t> small, large;
    small.reserve(k);
    large.reserve(k);
    for (std::size_t i = 0; i < k; ++i) (scaled[i] < 1.0 ? small : large).push_back(i);

    while (!small.empty() && !large.empty()) {
        std::size_t s = small.back();
        small.pop_back();
        std::size_t l = large.back();
        large.pop_back();
        prob[s] = scaled[s];
        alias[s] = l;
        scaled[l] = (scaled[l] + scaled[s]) - 1.0;
        (scaled[l] < 1.0 ? small : large).push_back(l);
    }
    while (!large.empty()) {
        prob[large.back()] = 1.0;
        large.pop_back();
    }
    while (!small.empty()) {  // leftovers from rounding
        prob[small.back()] = 1.0;
        small.pop_back();
    }

    Rng rng(spec.seed);
    std::vector<std::size_t> out(n);
    for (std::size_t d = 0; d < n; ++d) {
        std::size_t bucket = rng.uniform_index(k);
        double coin = rng.uniform();
        out[d] = coin < prob[bucket] ? bucket : alias[bucket];
    }
    return out;
}

namespace {

// Regularized incomplete gamma P(a,x) by series, Q(a,x) by continued
// fraction; standard Lentz/series evaluation.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi_square_pvalue(double statistic, int dof) {
    if (dof <= 0) throw std::invalid_argument("chi_square_pvalue: dof must be positive");
    if (statistic < 0.0) throw std::invalid_argument("chi_square_pvalue: negative statistic");
    if (statistic == 0.0) return 1.0;
    double a = 0.5 * static_cast<double>(dof);
    double x = 0.5 * statistic;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_contfrac(a, x);
}

}  // namespace sampling
}  // namespace endoclass
