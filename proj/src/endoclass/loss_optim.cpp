#include "endoclass/loss_optim.hpp"

#include <cmath>
#include <stdexcept>

namespace endoclass {
namespace loss {

namespace {
const double kLogPtMin = std::log(1e-12);
}

FocalConfig FocalConfig::uniform(std::size_t k, double gamma, Reduction reduction) {
    FocalConfig cfg;
    cfg.alpha.assign(k, 1.0);
    cfg.gamma = gamma;
    cfg.reduction = reduction;
    return cfg;
}

void FocalConfig::validate() const {
    if (gamma < 0.0) throw std::invalid_argument("focal loss: gamma must be >= 0");
    if (alpha.empty()) throw std::invalid_argument("focal loss: alpha vector is empty");
    for (double a : alpha)
        if (!(a > 0.0) || !std::isfinite(a))
            throw std::invalid_argument("focal loss: alpha entries must be positive");
}

namespace {

void check_inputs(const LogitMatrix& logits, const std::vector<int>& targets,
                  const FocalConfig& cfg) {
    cfg.validate();
    if (cfg.alpha.size() != logits.cols)
        throw std::invalid_argument("focal loss: alpha length != number of classes");
    if (targets.size() != logits.rows)
        throw std::invalid_argument("focal loss: targets length != batch size");
    for (int t : targets)
        if (t < 0 || static_cast<std::size_t>(t) >= logits.cols)
            throw std::invalid_argument("focal loss: invalid target index");
    for (double z : logits.data)
        if (!std::isfinite(z)) throw std::invalid_argument("focal loss: non-finite logit");
}

double row_logsumexp(const LogitMatrix& logits, std::size_t r) {
    double m = logits(r, 0);
    for (std::size_t c = 1; c < logits.cols; ++c) m = std::max(m, logits(r, c));
    double s = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) s += std::exp(logits(r, c) - m);
    return m + std::log(s);
}

}  // namespace

FocalLossResult focal_loss(const LogitMatrix& logits, const std::vector<int>& targets,
                           const FocalConfig& cfg) {
    check_inputs(logits, targets, cfg);
    FocalLossResult res;
    res.per_sample.resize(logits.rows);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        double lse = row_logsumexp(logits, r);
        int t = targets[r];
        double log_pt = std::max(logits(r, static_cast<std::size_t>(t)) - lse, kLogPtMin);
        double pt = std::exp(log_pt);
        double a = cfg.alpha[static_cast<std::size_t>(t)];
        res.per_sample[r] = -a * std::pow(1.0 - pt, cfg.gamma) * log_pt;
    }
    double total = 0.0;
    for (double l : res.per_sample) total += l;
    if (cfg.reduction == Reduction::mean && !res.per_sample.empty())
        total /= static_cast<double>(res.per_sample.size());
    res.total = total;
    return res;
}

Matrix focal_loss_grad(const LogitMatrix& logits, const std::vector<int>& targets,
                       const FocalConfig& cfg) {
    check_inputs(logits, targets, cfg);
    Matrix grad(logits.rows, logits.cols);
    double scale =
        cfg.reduction == Reduction::mean && logits.rows > 0 ? 1.0 / static_cast<double>(logits.rows) : 1.0;

    std::vector<double> p(logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        double lse = row_logsumexp(logits, r);
        for (std::size_t c = 0; c < logits.cols; ++c) p[c] = std::exp(logits(r, c) - lse);
        int t = targets[r];
        double log_pt = std::max(logits(r, static_cast<std::size_t>(t)) - lse, kLogPtMin);
        double pt = std::exp(log_pt);
        double u = 1.0 - pt;
        double a = cfg.alpha[static_cast<std::size_t>(t)];

        double s;
        if (cfg.gamma == 0.0) {
            s = -a;
        } else if (u <= 0.0) {
            // p_t == 1 in floating point: the (1-p_t)^gamma factor kills the
            // whole row.
            continue;
        } else {
            s = a * (cfg.gamma * pt * log_pt * std::pow(u, cfg.gamma - 1.0) - std::pow(u, cfg.gamma));
        }
        for (std::size_t c = 0; c < logits.cols; ++c) {
            double onehot = c == static_cast<std::size_t>(t) ? 1.0 : 0.0;
            grad(r, c) = scale * s * (onehot - p[c]);
        }
    }
    return grad;
}

}  // namespace loss

namespace optim {

void AdamWConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("adamw: lr must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("adamw: betas must be in [0,1)");
    if (!(eps > 0.0)) throw std::invalid_argument("adamw: eps must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("adamw: weight_decay must be >= 0");
}

void adamw_step(std::vector<double>& params, const std::vector<double>& grads, AdamWState& state,
                const AdamWConfig& cfg) {
    cfg.validate();
    if (grads.size() != params.size() || state.m.size() != params.size() ||
        state.v.size() != params.size())
        throw std::invalid_argument("adamw_step: shape mismatch");
    if (state.t < 0) throw std::invalid_argument("adamw_step: negative step counter");

    state.t += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        double theta = params[i];
        params[i] = theta - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps) -
                    cfg.lr * cfg.weight_decay * theta;
    }
}

}  // namespace optim
}  // namespace endoclass
