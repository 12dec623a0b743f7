#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "endoclass/augment.hpp"
#include "endoclass/data_io.hpp"
#include "endoclass/loss_optim.hpp"
#include "endoclass/metrics.hpp"
#include "endoclass/nn.hpp"

namespace endoclass {
namespace train {

// How the focal alpha vector is materialized once class counts are known.
enum class AlphaMode { uniform, inverse_frequency, explicit_list };

struct LossSpec {
    double gamma = 2.0;
    AlphaMode alpha_mode = AlphaMode::uniform;
    double alpha_scalar = 1.0;          // uniform mode
    std::vector<double> alpha_list;     // explicit_list mode
    loss::Reduction reduction = loss::Reduction::mean;

    // uniform: alpha_i = alpha_scalar. inverse_frequency: alpha_i = 1/N_i
    // rescaled to mean 1 over non-empty classes (empty classes get the mean).
    loss::FocalConfig resolve(const std::vector<std::int64_t>& class_counts) const;
};

struct TrainConfig {
    int batch_size = 32;
    int max_epochs = 20;
    int patience = 5;
    double improvement_tolerance = 1e-4;
    std::uint64_t seed = 0;
    int threads = 1;
    optim::AdamWConfig optimizer;
    LossSpec loss;
    augment::AugmentConfig augment;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_balanced_accuracy = 0.0;
    double val_mean_auc = 0.0;
    double val_combined_score = 0.0;
    bool improved = false;
    double wall_time_sec = 0.0;  // informational; excluded from serialized
                                 // history so reruns are byte-identical
};

struct EarlyStopper {
    double best_score = -std::numeric_limits<double>::infinity();
    int epochs_since_improvement = 0;
    int patience = 5;
    double tolerance = 1e-4;
};

struct StopperDecision {
    bool stop = false;
    bool improved = false;
};

// improved iff score > best + tolerance; resets the counter on improvement,
// stop fires when the counter reaches patience. Throws on NaN.
StopperDecision stopper_update(EarlyStopper& stopper, double score);

struct TrainResult {
    data_io::Checkpoint best;
    std::vector<EpochRecord> history;
};

// Deterministic evaluation-path probabilities: decode each manifest image
// under `root`, apply resize+normalize, featurize to the arch input size and
// run the model. Row order follows the manifest.
ProbMatrix predict_probs(const nn::ModelParams& params, const LabeledManifest& manifest,
                         const std::string& root, const augment::AugmentConfig& aug,
                         int threads = 1);

// Deterministic validation: predict_probs + metrics::evaluate.
metrics::MetricsReport validate(const nn::ModelParams& params, const LabeledManifest& manifest,
                                const std::string& root, const ClassCatalog& catalog,
                                const augment::AugmentConfig& aug, int threads = 1);

// Full training loop: every epoch draws |train| weighted indices, batches
// them, augments per-sample (seeded by cfg.seed and a global sample counter),
// takes focal-loss AdamW steps, then validates and updates the early stopper.
// A checkpoint is captured iff the combined score improved. Fully
// deterministic for a fixed cfg.seed, independent of cfg.threads.
// epoch_sink, when set, is called with each EpochRecord as it is produced.
TrainResult train(const LabeledManifest& train_manifest, const std::string& train_root,
                  const LabeledManifest& val_manifest, const std::string& val_root,
                  const nn::Arch& arch, const ClassCatalog& catalog, const TrainConfig& cfg,
                  void (*epoch_sink)(const EpochRecord&, void*) = nullptr,
                  void* sink_ctx = nullptr);

// JSON-lines history serialization (one EpochRecord per line, wall time
// omitted).
std::string history_to_jsonl(const std::vector<EpochRecord>& history);

// Pooling side for an arch whose input is 3*s*s; throws when in_dim is not of
// that form.
int pool_side_for_arch(const nn::Arch& arch);

}  // namespace train
}  // namespace endoclass
