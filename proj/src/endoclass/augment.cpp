#include "endoclass/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace endoclass {
namespace augment {

namespace {

constexpr std::uint64_t kAugmentStreamTag = 0x61756774u;  // per-sample augment streams

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// Bilinear read at continuous (sx, sy); caller guarantees both lie inside
// [0, w-1] x [0, h-1].
double sample_bilinear(const ImageBuffer& img, double sx, double sy, int c) {
    int x0 = static_cast<int>(std::floor(sx));
    int y0 = static_cast<int>(std::floor(sy));
    x0 = std::clamp(x0, 0, img.width - 1);
    y0 = std::clamp(y0, 0, img.height - 1);
    int x1 = std::min(x0 + 1, img.width - 1);
    int y1 = std::min(y0 + 1, img.height - 1);
    double fx = std::clamp(sx - x0, 0.0, 1.0);
    double fy = std::clamp(sy - y0, 0.0, 1.0);
    double top = img.at(x0, y0, c) * (1.0 - fx) + img.at(x1, y0, c) * fx;
    double bot = img.at(x0, y1, c) * (1.0 - fx) + img.at(x1, y1, c) * fx;
    return top * (1.0 - fy) + bot * fy;
}

// Bilinear sample where taps outside the frame contribute the black fill.
// Warps use this so the output is continuous in the warp parameters: a sample
// a rounding error past the border blends, rather than dropping to fill.
double sample_bilinear_fill(const ImageBuffer& img, double sx, double sy, int c) {
    int x0 = static_cast<int>(std::floor(sx));
    int y0 = static_cast<int>(std::floor(sy));
    double fx = sx - x0;
    double fy = sy - y0;
    auto tap = [&](int x, int y) {
        return (x < 0 || x >= img.width || y < 0 || y >= img.height) ? 0.0 : img.at(x, y, c);
    };
    double top = tap(x0, y0) * (1.0 - fx) + tap(x0 + 1, y0) * fx;
    double bot = tap(x0, y0 + 1) * (1.0 - fx) + tap(x0 + 1, y0 + 1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    double maxc = std::max({r, g, b});
    double minc = std::min({r, g, b});
    v = maxc;
    double d = maxc - minc;
    s = maxc == 0.0 ? 0.0 : d / maxc;
    if (d == 0.0) {
        h = 0.0;
        return;
    }
    if (maxc == r)
        h = (g - b) / d;
    else if (maxc == g)
        h = 2.0 + (b - r) / d;
    else
        h = 4.0 + (r - g) / d;
    h /= 6.0;
    if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    if (s == 0.0) {
        r = g = b = v;
        return;
    }
    double hh = (h - std::floor(h)) * 6.0;
    int i = static_cast<int>(std::floor(hh)) % 6;
    double f = hh - std::floor(hh);
    double p = v * (1.0 - s);
    double q = v * (1.0 - s * f);
    double t = v * (1.0 - s * (1.0 - f));
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

// Mirror an index into [0, n) without duplicating the edge sample.
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

}  // namespace

void AugmentConfig::validate() const {
    require(target_w > 0 && target_h > 0, "augment: target size must be positive");
    for (double p : {p_hflip, p_vflip, p_perspective, p_erase, p_blur})
        require(p >= 0.0 && p <= 1.0, "augment: probabilities must lie in [0,1]");
    require(max_rotation_deg >= 0.0 && max_rotation_deg <= 15.0,
            "augment: max_rotation_deg must lie in [0,15]");
    require(max_translate_frac >= 0.0 && max_translate_frac <= 0.10,
            "augment: max_translate_frac must lie in [0,0.10]");
    require(scale_lo <= scale_hi && scale_lo >= 0.9 && scale_hi <= 1.1,
            "augment: scale range must be ordered and lie within [0.9,1.1]");
    require(perspective_distortion >= 0.0 && perspective_distortion <= 1.0,
            "augment: perspective_distortion must lie in [0,1]");
    require(jitter_brightness >= 0.0 && jitter_brightness <= 1.0 && jitter_contrast >= 0.0 &&
                jitter_contrast <= 1.0 && jitter_saturation >= 0.0 && jitter_saturation <= 1.0,
            "augment: jitter deltas must lie in [0,1]");
    require(jitter_hue >= 0.0 && jitter_hue <= 0.5, "augment: hue delta must lie in [0,0.5]");
    for (double s : norm_std) require(s > 0.0, "augment: norm_std must be strictly positive");
    require(erase_area_lo >= 0.0 && erase_area_lo <= erase_area_hi && erase_area_hi <= 1.0,
            "augment: erase area range must be ordered and lie in [0,1]");
    require(blur_sigma_lo > 0.0 && blur_sigma_lo <= blur_sigma_hi,
            "augment: blur sigma range must be positive and ordered");
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int w, int h) {
    require(!img.normalized, "resize_bilinear expects a raw image");
    require(w > 0 && h > 0, "resize_bilinear: target dimensions must be positive");
    if (w == img.width && h == img.height) return img;
    ImageBuffer out(w, h);
    const double sx_step = static_cast<double>(img.width) / w;
    const double sy_step = static_cast<double>(img.height) / h;
    for (int y = 0; y < h; ++y) {
        double sy = (y + 0.5) * sy_step - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
        for (int x = 0; x < w; ++x) {
            double sx = (x + 0.5) * sx_step - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = sample_bilinear(img, sx, sy, c);
        }
    }
    return out;
}

ImageBuffer hflip(const ImageBuffer& img) {
    ImageBuffer out(img.width, img.height, 0.0, img.normalized);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
    return out;
}

ImageBuffer vflip(const ImageBuffer& img) {
    ImageBuffer out(img.width, img.height, 0.0, img.normalized);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, img.height - 1 - y, c);
    return out;
}

ImageBuffer rotate_affine(const ImageBuffer& img, double angle_deg, double translate_x,
                          double translate_y, double scale) {
    require(std::abs(angle_deg) <= 360.0, "rotate_affine: |angle| must be <= 360");
    require(std::abs(translate_x) <= 0.3 && std::abs(translate_y) <= 0.3,
            "rotate_affine: |translate| must be <= 0.3");
    require(scale >= 0.1 && scale <= 10.0, "rotate_affine: scale must lie in [0.1,10]");
    if (angle_deg == 0.0 && translate_x == 0.0 && translate_y == 0.0 && scale == 1.0) return img;

    const double cx = (img.width - 1) * 0.5;
    const double cy = (img.height - 1) * 0.5;
    const double tx = translate_x * img.width;
    const double ty = translate_y * img.height;
    const double rad = angle_deg * std::acos(-1.0) / 180.0;
    const double ca = std::cos(rad), sa = std::sin(rad);

    ImageBuffer out(img.width, img.height, 0.0, img.normalized);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            // invert: forward is p' = scale*R(angle)*(p - c) + c + t
            double dx = (x - cx - tx) / scale;
            double dy = (y - cy - ty) / scale;
            double sx = ca * dx + sa * dy + cx;
            double sy = -sa * dx + ca * dy + cy;
            if (sx <= -1.0 || sx >= img.width || sy <= -1.0 || sy >= img.height) continue;
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = sample_bilinear_fill(img, sx, sy, c);
        }
    }
    return out;
}

namespace {

// Solve the 8x8 homography fit G(src_k) = dst_k by Gaussian elimination with
// partial pivoting. Coefficients: [a b c d e f g h], G(x,y) =
// ((ax+by+c)/(gx+hy+1), (dx+ey+f)/(gx+hy+1)).
std::array<double, 8> fit_homography(const std::array<std::array<double, 2>, 4>& src,
                                     const std::array<std::array<double, 2>, 4>& dst) {
    double m[8][9] = {};
    for (int k = 0; k < 4; ++k) {
        double x = src[k][0], y = src[k][1];
        double u = dst[k][0], v = dst[k][1];
        double* r0 = m[2 * k];
        double* r1 = m[2 * k + 1];
        r0[0] = x; r0[1] = y; r0[2] = 1; r0[6] = -x * u; r0[7] = -y * u; r0[8] = u;
        r1[3] = x; r1[4] = y; r1[5] = 1; r1[6] = -x * v; r1[7] = -y * v; r1[8] = v;
    }
    for (int col = 0; col < 8; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 8; ++r)
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        if (std::abs(m[pivot][col]) < 1e-9)
            throw std::invalid_argument("perspective: degenerate corner set");
        if (pivot != col)
            for (int c = col; c < 9; ++c) std::swap(m[pivot][c], m[col][c]);
        for (int r = col + 1; r < 8; ++r) {
            double f = m[r][col] / m[col][col];
            for (int c = col; c < 9; ++c) m[r][c] -= f * m[col][c];
        }
    }
    std::array<double, 8> coef{};
    for (int r = 7; r >= 0; --r) {
        double acc = m[r][8];
        for (int c = r + 1; c < 8; ++c) acc -= m[r][c] * coef[static_cast<std::size_t>(c)];
        coef[static_cast<std::size_t>(r)] = acc / m[r][r];
    }
    return coef;
}

double triangle_area2(const std::array<double, 2>& a, const std::array<double, 2>& b,
                      const std::array<double, 2>& c) {
    return std::abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

}  // namespace

ImageBuffer perspective(const ImageBuffer& img,
                        const std::array<std::array<double, 2>, 4>& corner_disp) {
    const double w1 = img.width - 1, h1 = img.height - 1;
    const std::array<std::array<double, 2>, 4> corners = {{{0, 0}, {w1, 0}, {w1, h1}, {0, h1}}};
    std::array<std::array<double, 2>, 4> moved{};
    for (int k = 0; k < 4; ++k) {
        moved[k][0] = corners[k][0] + corner_disp[k][0];
        moved[k][1] = corners[k][1] + corner_disp[k][1];
    }
    const double area_eps = 1e-9 * std::max(1.0, w1 * h1);
    for (int k = 0; k < 4; ++k)
        if (triangle_area2(moved[k], moved[(k + 1) % 4], moved[(k + 2) % 4]) < area_eps)
            throw std::invalid_argument("perspective: degenerate corner set");

    // For each output pixel p, sample the input at G(p), where G maps the
    // displaced corner back onto the original one.
    auto coef = fit_homography(moved, corners);
    ImageBuffer out(img.width, img.height, 0.0, img.normalized);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double denom = coef[6] * x + coef[7] * y + 1.0;
            if (std::abs(denom) < 1e-12) continue;
            double sx = (coef[0] * x + coef[1] * y + coef[2]) / denom;
            double sy = (coef[3] * x + coef[4] * y + coef[5]) / denom;
            if (sx <= -1.0 || sx >= img.width || sy <= -1.0 || sy >= img.height) continue;
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = sample_bilinear_fill(img, sx, sy, c);
        }
    }
    return out;
}

ImageBuffer color_jitter(const ImageBuffer& img, double brightness, double contrast,
                         double saturation, double hue) {
    require(!img.normalized, "color_jitter expects a raw image");
    require(brightness >= 0.0 && contrast >= 0.0 && saturation >= 0.0,
            "color_jitter: factors must be non-negative");
    require(std::abs(hue) <= 0.5, "color_jitter: |hue| must be <= 0.5 turns");
    if (brightness == 1.0 && contrast == 1.0 && saturation == 1.0 && hue == 0.0) return img;

    ImageBuffer out = img;
    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };

    if (brightness != 1.0)
        for (double& v : out.data) v = clamp01(v * brightness);

    if (contrast != 1.0) {
        double mean = 0.0;
        for (std::size_t p = 0; p < out.pixel_count(); ++p)
            mean += luma(out.data[p * 3], out.data[p * 3 + 1], out.data[p * 3 + 2]);
        mean /= static_cast<double>(out.pixel_count());
        for (double& v : out.data) v = clamp01(contrast * v + (1.0 - contrast) * mean);
    }

    if (saturation != 1.0) {
        for (std::size_t p = 0; p < out.pixel_count(); ++p) {
            double l = luma(out.data[p * 3], out.data[p * 3 + 1], out.data[p * 3 + 2]);
            for (int c = 0; c < 3; ++c)
                out.data[p * 3 + c] = clamp01(saturation * out.data[p * 3 + c] + (1.0 - saturation) * l);
        }
    }

    if (hue != 0.0) {
        for (std::size_t p = 0; p < out.pixel_count(); ++p) {
            double h, s, v;
            rgb_to_hsv(out.data[p * 3], out.data[p * 3 + 1], out.data[p * 3 + 2], h, s, v);
            h += hue;
            h -= std::floor(h);
            double r, g, b;
            hsv_to_rgb(h, s, v, r, g, b);
            out.data[p * 3] = clamp01(r);
            out.data[p * 3 + 1] = clamp01(g);
            out.data[p * 3 + 2] = clamp01(b);
        }
    }
    return out;
}

ImageBuffer normalize(const ImageBuffer& img, const std::array<double, 3>& mean,
                      const std::array<double, 3>& std_dev) {
    if (img.normalized) throw std::invalid_argument("normalize: image already normalized");
    for (double s : std_dev) require(s > 0.0, "normalize: std must be strictly positive");
    ImageBuffer out = img;
    for (std::size_t p = 0; p < out.pixel_count(); ++p)
        for (int c = 0; c < 3; ++c)
            out.data[p * 3 + c] = (out.data[p * 3 + c] - mean[static_cast<std::size_t>(c)]) /
                                  std_dev[static_cast<std::size_t>(c)];
    out.normalized = true;
    return out;
}

ImageBuffer random_erase(const ImageBuffer& img, Rng& rng, double area_lo, double area_hi,
                         const std::array<double, 3>& mean, const std::array<double, 3>& std_dev,
                         SampledParams* out_params) {
    require(area_lo >= 0.0 && area_lo <= area_hi && area_hi <= 1.0,
            "random_erase: area range must be ordered and lie in [0,1]");
    for (double s : std_dev) require(s > 0.0, "random_erase: std must be strictly positive");

    const double area_px = rng.uniform(area_lo, area_hi) * static_cast<double>(img.pixel_count());
    const double aspect = std::exp(rng.uniform(std::log(0.3), std::log(3.3)));  // w/h
    int rw = std::clamp(static_cast<int>(std::lround(std::sqrt(area_px * aspect))), 1, img.width);
    int rh = std::clamp(static_cast<int>(std::lround(std::sqrt(area_px / aspect))), 1, img.height);
    int rx = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(img.width - rw + 1)));
    int ry = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(img.height - rh + 1)));

    ImageBuffer out = img;
    for (int y = ry; y < ry + rh; ++y)
        for (int x = rx; x < rx + rw; ++x)
            for (int c = 0; c < 3; ++c)
                // noise is uniform in raw intensity, re-expressed to match the
                // buffer's normalization state
                out.at(x, y, c) = (rng.uniform() - mean[static_cast<std::size_t>(c)]) /
                                  std_dev[static_cast<std::size_t>(c)];
    if (out_params) {
        out_params->erase = true;
        out_params->erase_x = rx;
        out_params->erase_y = ry;
        out_params->erase_w = rw;
        out_params->erase_h = rh;
    }
    return out;
}

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
    require(sigma > 0.0, "gaussian_blur: sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double k = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        kernel[static_cast<std::size_t>(i + radius)] = k;
        sum += k;
    }
    for (double& k : kernel) k /= sum;

    ImageBuffer tmp(img.width, img.height, 0.0, img.normalized);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[static_cast<std::size_t>(i + radius)] *
                           img.at(reflect_index(x + i, img.width), y, c);
                tmp.at(x, y, c) = acc;
            }
    ImageBuffer out(img.width, img.height, 0.0, img.normalized);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[static_cast<std::size_t>(i + radius)] *
                           tmp.at(x, reflect_index(y + i, img.height), c);
                out.at(x, y, c) = acc;
            }
    return out;
}

ImageBuffer apply_pipeline(const ImageBuffer& img, const AugmentConfig& cfg, std::uint64_t seed,
                           std::uint64_t sample_index, SampledParams* out_params) {
    cfg.validate();
    ImageBuffer work = resize_bilinear(img, cfg.target_w, cfg.target_h);

    Rng rng = Rng::derive(seed, kAugmentStreamTag, sample_index);
    SampledParams sp;
    sp.hflip = rng.bernoulli(cfg.p_hflip);
    sp.vflip = rng.bernoulli(cfg.p_vflip);
    sp.angle_deg = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
    sp.translate_x = rng.uniform(-cfg.max_translate_frac, cfg.max_translate_frac);
    sp.translate_y = rng.uniform(-cfg.max_translate_frac, cfg.max_translate_frac);
    sp.scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    sp.perspective = rng.bernoulli(cfg.p_perspective);
    const double disp = 0.5 * cfg.perspective_distortion * std::min(cfg.target_w, cfg.target_h);
    for (auto& corner : sp.corner_disp) {
        corner[0] = rng.uniform(-disp, disp);
        corner[1] = rng.uniform(-disp, disp);
    }
    sp.brightness = rng.uniform(std::max(0.0, 1.0 - cfg.jitter_brightness), 1.0 + cfg.jitter_brightness);
    sp.contrast = rng.uniform(std::max(0.0, 1.0 - cfg.jitter_contrast), 1.0 + cfg.jitter_contrast);
    sp.saturation = rng.uniform(std::max(0.0, 1.0 - cfg.jitter_saturation), 1.0 + cfg.jitter_saturation);
    sp.hue = rng.uniform(-cfg.jitter_hue, cfg.jitter_hue);
    sp.erase = rng.bernoulli(cfg.p_erase);
    sp.blur = rng.bernoulli(cfg.p_blur);
    sp.blur_sigma = rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
    if (!sp.perspective) sp.corner_disp = {};
    if (!sp.blur) sp.blur_sigma = 0.0;

    if (sp.hflip) work = hflip(work);
    if (sp.vflip) work = vflip(work);
    work = rotate_affine(work, sp.angle_deg, sp.translate_x, sp.translate_y, sp.scale);
    if (sp.perspective) work = perspective(work, sp.corner_disp);
    work = color_jitter(work, sp.brightness, sp.contrast, sp.saturation, sp.hue);
    work = normalize(work, cfg.norm_mean, cfg.norm_std);
    if (sp.erase)
        work = random_erase(work, rng, cfg.erase_area_lo, cfg.erase_area_hi, cfg.norm_mean,
                            cfg.norm_std, &sp);
    if (sp.blur) work = gaussian_blur(work, sp.blur_sigma);

    if (out_params) *out_params = sp;
    return work;
}

ImageBuffer eval_transform(const ImageBuffer& img, const AugmentConfig& cfg) {
    cfg.validate();
    return normalize(resize_bilinear(img, cfg.target_w, cfg.target_h), cfg.norm_mean, cfg.norm_std);
}

}  // namespace augment
}  // namespace endoclass
