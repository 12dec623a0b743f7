#pragma once

#include <string>

#include "endoclass/catalog.hpp"
#include "endoclass/train.hpp"

namespace endoclass {
namespace config {

// Everything a run can configure. The config file is JSON mirroring these
// groups; CLI flags (--seed, --arch, --threads) override file values.
struct RunConfig {
    train::TrainConfig train;
    std::string arch = "linear:192x10";
    ClassCatalog catalog = default_catalog();
};

// Parses a JSON config file. Unknown keys are rejected. Recognized keys:
//   seed, threads, arch, classes (list of names),
//   train.{batch_size, max_epochs, patience, improvement_tolerance},
//   optim.{lr, weight_decay, betas, eps},
//   loss.{gamma, alpha, reduction}   alpha: number | "inverse_frequency" | list,
//   augment.{target_size, p_hflip, p_vflip, max_rotation_deg,
//            max_translate_frac, scale_range, p_perspective,
//            perspective_distortion, jitter, norm_mean, norm_std, p_erase,
//            erase_area_frac, p_blur, blur_sigma_range}
RunConfig load_config_file(const std::string& path);

// Applies the same keys from a JSON string onto an existing config.
void apply_config_json(RunConfig& cfg, const std::string& json_text);

// Fully resolved config as pretty JSON; printed before every CLI run.
std::string resolved_config_json(const RunConfig& cfg);

}  // namespace config
}  // namespace endoclass
