#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "endoclass/catalog.hpp"
#include "endoclass/image.hpp"
#include "endoclass/matrix.hpp"
#include "endoclass/metrics.hpp"
#include "endoclass/nn.hpp"

namespace endoclass {
namespace data_io {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

// Serialized model snapshot. Binary layout (all integers and doubles
// little-endian):
//   "ECKP" | u32 format_version | catalog (u32 count, length-prefixed names)
//   | length-prefixed arch descriptor | i64 epoch | f64 best_combined_score
//   | u64 rng_seed | u64 param_count | f64[param_count]
struct Checkpoint {
    std::uint32_t format_version = kCheckpointFormatVersion;
    nn::ModelParams params;
    std::int64_t epoch = 0;
    double best_combined_score = 0.0;
    std::uint64_t rng_seed = 0;
    ClassCatalog catalog;
};

// Reads a manifest CSV (header `image_path,label`, comma separated, no
// quoting). Labels are catalog names; row order is preserved. Errors name the
// offending 1-based file row.
LabeledManifest load_manifest(const std::string& path, const ClassCatalog& catalog);

// Decodes a PNG or JPEG file (detected by magic bytes) to an RGB buffer with
// values in [0,1]. Grayscale inputs are replicated to 3 channels.
ImageBuffer decode_image(const std::string& path);

// Writes a raw (not normalized) image as PNG or JPEG depending on the path
// extension (.jpg/.jpeg -> JPEG, anything else -> PNG), 8-bit per channel.
void write_image(const std::string& path, const ImageBuffer& img);

// Predictions CSV: header `image_path,<class names...>`, probabilities at
// 6 decimal places, image ids reduced to basename, input row order kept.
void write_predictions_csv(const std::string& path, const std::vector<std::string>& image_ids,
                           const ProbMatrix& probs, const ClassCatalog& catalog);

struct Predictions {
    ClassCatalog catalog;  // parsed from the header
    std::vector<std::string> image_ids;
    ProbMatrix probs;
};

// Parses a predictions CSV. Rows whose sum drifts from 1 by more than 1e-12
// (6-decimal rounding) are renormalized; rows off by more than 1e-3 are
// rejected.
Predictions read_predictions_csv(const std::string& path);

// Metrics JSON: {"per_class": {name: {precision, recall, f1, specificity,
// auc}}, "aggregate": {balanced_accuracy, mean_auc, combined_score,
// macro_precision, macro_f1, macro_specificity}}. Keys follow catalog order;
// an undefined per-class AUC is written as null.
void write_metrics_json(const std::string& path, const metrics::MetricsReport& report);
std::string metrics_report_to_json(const metrics::MetricsReport& report);
metrics::MetricsReport read_metrics_json(const std::string& path);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Final path component of an id ("dir/x.jpg" -> "x.jpg").
std::string basename_of(const std::string& path);

}  // namespace data_io
}  // namespace endoclass
