#pragma once

#include <cstdint>
#include <vector>

#include "endoclass/matrix.hpp"

namespace endoclass {
namespace loss {

enum class Reduction { mean, sum };

// Multi-class focal loss configuration: per-class balancing factors alpha and
// focusing parameter gamma. gamma = 0 with uniform alpha = 1 recovers plain
// cross-entropy.
struct FocalConfig {
    std::vector<double> alpha;  // length K, all > 0
    double gamma = 2.0;
    Reduction reduction = Reduction::mean;

    static FocalConfig uniform(std::size_t k, double gamma = 2.0,
                               Reduction reduction = Reduction::mean);
    void validate() const;
};

struct FocalLossResult {
    double total = 0.0;
    std::vector<double> per_sample;
};

// Per-sample loss -alpha_t * (1 - p_t)^gamma * log(p_t) where p_t is the
// softmax probability of the true class, computed through log-softmax with
// p_t clamped to >= 1e-12 before the log.
FocalLossResult focal_loss(const LogitMatrix& logits, const std::vector<int>& targets,
                           const FocalConfig& cfg);

// Analytic gradient of the reduced focal loss w.r.t. the logits:
// dL/dz_j = alpha_t * (1-p_t)^(gamma-1) * (gamma * p_t * log p_t - (1-p_t))
//           * (onehot_j - p_j)
// scaled by 1/N under mean reduction. With gamma = 0 and alpha = 1 this is
// exactly softmax(z) - onehot(target) (per sample).
Matrix focal_loss_grad(const LogitMatrix& logits, const std::vector<int>& targets,
                       const FocalConfig& cfg);

}  // namespace loss

namespace optim {

struct AdamWConfig {
    double lr = 1e-4;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

// First/second moment accumulators plus the step counter.
struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;

    static AdamWState init(std::size_t n) { return AdamWState{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

// One decoupled-weight-decay Adam update, in place:
//   t += 1;  m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
//   theta -= lr * mhat/(sqrt(vhat)+eps) + lr * weight_decay * theta_old
// The decay term uses the incoming parameter value, outside the adaptive
// update.
void adamw_step(std::vector<double>& params, const std::vector<double>& grads, AdamWState& state,
                const AdamWConfig& cfg);

}  // namespace optim
}  // namespace endoclass
