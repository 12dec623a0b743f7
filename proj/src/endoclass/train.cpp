#include "endoclass/train.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "endoclass/rng.hpp"
#include "endoclass/sampling.hpp"

namespace endoclass {
namespace train {

namespace {

constexpr std::uint64_t kInitStreamTag = 0x696e6974u;
constexpr std::uint64_t kSamplerStreamTag = 0x73616d70u;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    return mix64(mix64(seed) ^ mix64(tag ^ mix64(index)));
}

std::string join_path(const std::string& root, const std::string& rel) {
    if (root.empty()) return rel;
    if (root.back() == '/') return root + rel;
    return root + "/" + rel;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. fn must only touch
// state owned by index i; any exception is rethrown on the caller, lowest
// index group first.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    int t = std::max(1, threads);
    if (n < 2 || t == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    t = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(t), n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(t));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(t));
    for (int w = 0; w < t; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = static_cast<std::size_t>(w); i < n;
                     i += static_cast<std::size_t>(t))
                    fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& worker : workers) worker.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

void check_labels(const LabeledManifest& manifest, std::size_t k, const char* which) {
    for (const auto& rec : manifest.records)
        if (rec.label < 0 || static_cast<std::size_t>(rec.label) >= k)
            throw std::invalid_argument(std::string("train: ") + which +
                                        " manifest label out of catalog range");
}

}  // namespace

loss::FocalConfig LossSpec::resolve(const std::vector<std::int64_t>& class_counts) const {
    loss::FocalConfig cfg;
    cfg.gamma = gamma;
    cfg.reduction = reduction;
    const std::size_t k = class_counts.size();
    switch (alpha_mode) {
        case AlphaMode::uniform:
            cfg.alpha.assign(k, alpha_scalar);
            break;
        case AlphaMode::explicit_list:
            cfg.alpha = alpha_list;
            break;
        case AlphaMode::inverse_frequency: {
            double inv_sum = 0.0;
            std::size_t nonempty = 0;
            for (auto c : class_counts)
                if (c > 0) {
                    inv_sum += 1.0 / static_cast<double>(c);
                    ++nonempty;
                }
            if (nonempty == 0)
                throw std::invalid_argument("loss: inverse-frequency alpha needs a non-empty dataset");
            // rescale 1/N_i so the mean over non-empty classes is 1
            const double scale = static_cast<double>(nonempty) / inv_sum;
            cfg.alpha.assign(k, 1.0);
            for (std::size_t i = 0; i < k; ++i)
                if (class_counts[i] > 0)
                    cfg.alpha[i] = scale / static_cast<double>(class_counts[i]);
            break;
        }
    }
    cfg.validate();
    return cfg;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
    if (!(improvement_tolerance >= 0.0))
        throw std::invalid_argument("train: improvement_tolerance must be >= 0");
    if (threads < 1) throw std::invalid_argument("train: threads must be >= 1");
    if (!(loss.gamma >= 0.0) || !std::isfinite(loss.gamma))
        throw std::invalid_argument("loss: gamma must be finite and >= 0");
    if (loss.alpha_mode == AlphaMode::uniform && !(loss.alpha_scalar > 0.0))
        throw std::invalid_argument("loss: alpha must be > 0");
    if (loss.alpha_mode == AlphaMode::explicit_list && loss.alpha_list.empty())
        throw std::invalid_argument("loss: explicit alpha list is empty");
    optimizer.validate();
    augment.validate();
}

StopperDecision stopper_update(EarlyStopper& stopper, double score) {
    if (std::isnan(score)) throw std::invalid_argument("early stopper: NaN score");
    StopperDecision d;
    if (score > stopper.best_score + stopper.tolerance) {
        stopper.best_score = score;
        stopper.epochs_since_improvement = 0;
        d.improved = true;
    } else {
        ++stopper.epochs_since_improvement;
    }
    d.stop = stopper.epochs_since_improvement >= stopper.patience;
    return d;
}

int pool_side_for_arch(const nn::Arch& arch) {
    const int in = arch.in_dim();
    int s = static_cast<int>(std::lround(std::sqrt(in / 3.0)));
    if (s < 1 || 3 * s * s != in)
        throw std::invalid_argument("arch input dim must be 3*s^2 for pooled image features, got " +
                                    std::to_string(in));
    return s;
}

ProbMatrix predict_probs(const nn::ModelParams& params, const LabeledManifest& manifest,
                         const std::string& root, const augment::AugmentConfig& aug, int threads) {
    const int s = pool_side_for_arch(params.arch);
    Matrix feats(manifest.size(), static_cast<std::size_t>(params.arch.in_dim()));
    parallel_for(manifest.size(), threads, [&](std::size_t i) {
        ImageBuffer img = data_io::decode_image(join_path(root, manifest.records[i].image_id));
        ImageBuffer ready = augment::eval_transform(img, aug);
        std::vector<double> feat = nn::featurize(ready, s, s);
        std::memcpy(feats.row_ptr(i), feat.data(), feat.size() * sizeof(double));
    });
    return nn::softmax(nn::forward(params, feats));
}

metrics::MetricsReport validate(const nn::ModelParams& params, const LabeledManifest& manifest,
                                const std::string& root, const ClassCatalog& catalog,
                                const augment::AugmentConfig& aug, int threads) {
    if (manifest.empty()) throw std::invalid_argument("validate: empty manifest");
    check_labels(manifest, catalog.size(), "validation");
    ProbMatrix probs = predict_probs(params, manifest, root, aug, threads);
    return metrics::evaluate(probs, manifest.labels(), catalog);
}

TrainResult train(const LabeledManifest& train_manifest, const std::string& train_root,
                  const LabeledManifest& val_manifest, const std::string& val_root,
                  const nn::Arch& arch, const ClassCatalog& catalog, const TrainConfig& cfg,
                  void (*epoch_sink)(const EpochRecord&, void*), void* sink_ctx) {
    cfg.validate();
    arch.validate();
    catalog.validate();
    if (train_manifest.empty() || val_manifest.empty())
        throw std::invalid_argument("train: empty manifest");
    const std::size_t k = catalog.size();
    check_labels(train_manifest, k, "training");
    check_labels(val_manifest, k, "validation");
    if (arch.out_dim() != static_cast<int>(k))
        throw std::invalid_argument("train: arch output dim does not match catalog size");
    const int side = pool_side_for_arch(arch);
    const std::size_t n_train = train_manifest.size();

    const auto counts = sampling::class_counts(train_manifest, k);
    const loss::FocalConfig focal = cfg.loss.resolve(counts);
    if (focal.alpha.size() != k)
        throw std::invalid_argument("loss: alpha list length does not match catalog size");

    const auto class_weights = sampling::inverse_frequency_weights(counts);
    std::vector<double> sample_weights(n_train);
    for (std::size_t i = 0; i < n_train; ++i)
        sample_weights[i] = class_weights[static_cast<std::size_t>(train_manifest.records[i].label)];

    nn::ModelParams params = nn::init_params(arch, derive_seed(cfg.seed, kInitStreamTag, 0));
    optim::AdamWState opt_state = optim::AdamWState::init(params.flat.size());
    EarlyStopper stopper;
    stopper.patience = cfg.patience;
    stopper.tolerance = cfg.improvement_tolerance;

    TrainResult result;
    std::uint64_t sample_counter = 0;  // global augment stream index
    const std::size_t in_dim = static_cast<std::size_t>(arch.in_dim());

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        sampling::SamplerSpec spec{sample_weights, true,
                                   derive_seed(cfg.seed, kSamplerStreamTag,
                                               static_cast<std::uint64_t>(epoch))};
        const auto indices = sampling::draw_epoch_indices(spec, n_train);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t bn = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                         n_train - start);
            Matrix feats(bn, in_dim);
            std::vector<int> targets(bn);
            parallel_for(bn, cfg.threads, [&](std::size_t i) {
                const auto& rec = train_manifest.records[indices[start + i]];
                ImageBuffer img = data_io::decode_image(join_path(train_root, rec.image_id));
                ImageBuffer augd = augment::apply_pipeline(img, cfg.augment, cfg.seed,
                                                           sample_counter + i);
                std::vector<double> feat = nn::featurize(augd, side, side);
                std::memcpy(feats.row_ptr(i), feat.data(), feat.size() * sizeof(double));
                targets[i] = rec.label;
            });
            sample_counter += bn;

            LogitMatrix logits = nn::forward(params, feats);
            loss::FocalLossResult lres = loss::focal_loss(logits, targets, focal);
            for (double v : lres.per_sample) loss_sum += v;
            Matrix dlogits = loss::focal_loss_grad(logits, targets, focal);
            std::vector<double> grads = nn::backward(params, feats, dlogits);
            optim::adamw_step(params.flat, grads, opt_state, cfg.optimizer);
        }

        metrics::MetricsReport report =
            validate(params, val_manifest, val_root, catalog, cfg.augment, cfg.threads);
        StopperDecision decision = stopper_update(stopper, report.combined_score);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n_train);
        rec.val_balanced_accuracy = report.balanced_accuracy;
        rec.val_mean_auc = report.mean_auc;
        rec.val_combined_score = report.combined_score;
        rec.improved = decision.improved;
        rec.wall_time_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(rec);
        if (epoch_sink) epoch_sink(rec, sink_ctx);

        if (decision.improved) {
            result.best.format_version = data_io::kCheckpointFormatVersion;
            result.best.params = params;
            result.best.epoch = epoch;
            result.best.best_combined_score = report.combined_score;
            result.best.rng_seed = cfg.seed;
            result.best.catalog = catalog;
        }
        if (decision.stop) break;
    }
    return result;
}

std::string history_to_jsonl(const std::vector<EpochRecord>& history) {
    std::string out;
    for (const auto& rec : history) {
        nlohmann::ordered_json j;
        j["epoch"] = rec.epoch;
        j["train_loss"] = rec.train_loss;
        j["val_balanced_accuracy"] = rec.val_balanced_accuracy;
        j["val_mean_auc"] = rec.val_mean_auc;
        j["val_combined_score"] = rec.val_combined_score;
        j["improved"] = rec.improved;
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace train
}  // namespace endoclass
