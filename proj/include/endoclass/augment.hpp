#pragma once

#include <array>
#include <cstdint>

#include "endoclass/image.hpp"
#include "endoclass/rng.hpp"

namespace endoclass {
namespace augment {

// Training-time augmentation configuration. Probabilities gate whole stages;
// the remaining fields bound the sampled magnitudes.
struct AugmentConfig {
    int target_w = 224;
    int target_h = 224;
    double p_hflip = 0.5;
    double p_vflip = 0.3;
    double max_rotation_deg = 15.0;
    double max_translate_frac = 0.10;
    double scale_lo = 0.90;
    double scale_hi = 1.10;
    double p_perspective = 0.5;
    double perspective_distortion = 0.2;
    double jitter_brightness = 0.2;
    double jitter_contrast = 0.2;
    double jitter_saturation = 0.2;
    double jitter_hue = 0.05;  // turns
    std::array<double, 3> norm_mean = {0.5, 0.5, 0.5};
    std::array<double, 3> norm_std = {0.5, 0.5, 0.5};
    double p_erase = 0.2;
    double erase_area_lo = 0.02;
    double erase_area_hi = 0.10;
    double p_blur = 0.3;
    double blur_sigma_lo = 0.1;
    double blur_sigma_hi = 2.0;

    void validate() const;
};

// Everything drawn for one pipeline invocation; written to the
// augment-preview sidecar and handy in tests.
struct SampledParams {
    bool hflip = false;
    bool vflip = false;
    double angle_deg = 0.0;
    double translate_x = 0.0;  // fractions of width/height
    double translate_y = 0.0;
    double scale = 1.0;
    bool perspective = false;
    std::array<std::array<double, 2>, 4> corner_disp{};  // px, corner order TL,TR,BR,BL
    double brightness = 1.0;
    double contrast = 1.0;
    double saturation = 1.0;
    double hue = 0.0;  // turns
    bool erase = false;
    int erase_x = 0, erase_y = 0, erase_w = 0, erase_h = 0;
    bool blur = false;
    double blur_sigma = 0.0;
};

// Bilinear resize, pixel-center convention, edges clamped. Resizing to the
// input size is an exact copy.
ImageBuffer resize_bilinear(const ImageBuffer& img, int w, int h);

ImageBuffer hflip(const ImageBuffer& img);
ImageBuffer vflip(const ImageBuffer& img);

// Rotation/translation/scaling about the image center, inverse-mapped
// bilinear resample with black fill. Accepted ranges (wider than the training
// sampler's): |angle| <= 360, |translate| <= 0.3, scale in [0.1, 10].
// Translation is a fraction of width/height. The identity parameter set is a
// bit-exact copy.
ImageBuffer rotate_affine(const ImageBuffer& img, double angle_deg, double translate_x,
                          double translate_y, double scale);

// Homography warp that drags each image corner by corner_disp (pixels, order
// TL,TR,BR,BL); inverse-mapped bilinear resample with black fill. Throws on a
// degenerate (e.g. collinear) corner set.
ImageBuffer perspective(const ImageBuffer& img,
                        const std::array<std::array<double, 2>, 4>& corner_disp);

// Brightness (multiply), contrast (blend with the global mean luma),
// saturation (blend with per-pixel luma), hue (HSV rotation by `hue` turns),
// applied in that order, each step clamped to [0,1]. Identity factors are a
// bit-exact no-op.
ImageBuffer color_jitter(const ImageBuffer& img, double brightness, double contrast,
                         double saturation, double hue);

// v' = (v - mean_c) / std_c per channel. Throws on double normalization.
ImageBuffer normalize(const ImageBuffer& img, const std::array<double, 3>& mean,
                      const std::array<double, 3>& std_dev);

// Overwrites one rectangle (area fraction in [area_lo, area_hi], log-uniform
// aspect in [0.3, 3.3], fully inside the image) with uniform noise. Noise is
// drawn in raw intensity [0,1] and re-expressed through (mean, std) so the
// fill matches the buffer's normalization state; pass the defaults for raw
// images. Returns the drawn rectangle via *out if given.
ImageBuffer random_erase(const ImageBuffer& img, Rng& rng, double area_lo, double area_hi,
                         const std::array<double, 3>& mean = {0.0, 0.0, 0.0},
                         const std::array<double, 3>& std_dev = {1.0, 1.0, 1.0},
                         SampledParams* out = nullptr);

// Separable Gaussian, kernel radius ceil(3*sigma), reflect padding.
ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma);

// Full training pipeline: resize -> hflip? -> vflip? -> rotate_affine ->
// perspective? -> color_jitter -> normalize -> random_erase? -> gaussian_blur?.
// All draws come from a stream derived from (seed, sample_index): gates and
// magnitudes up front in stage order, then the erase stage draws its rectangle
// and noise at fill time. Results are bit-reproducible and independent of any
// parallel execution order across samples.
ImageBuffer apply_pipeline(const ImageBuffer& img, const AugmentConfig& cfg, std::uint64_t seed,
                           std::uint64_t sample_index, SampledParams* out_params = nullptr);

// Deterministic evaluation transform: resize to target + normalize.
ImageBuffer eval_transform(const ImageBuffer& img, const AugmentConfig& cfg);

}  // namespace augment
}  // namespace endoclass
