#include <doctest.h>

#include <cmath>
#include <numeric>

#include "endoclass/augment.hpp"
#include "testutil.hpp"

using namespace endoclass;
using namespace endoclass::augment;
using testutil::catch_message;
using testutil::contains;

namespace {

ImageBuffer gradient_image(int w, int h) {
    ImageBuffer img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = (x + 0.5) / w;
            img.at(x, y, 1) = (y + 0.5) / h;
            img.at(x, y, 2) = ((x ^ y) & 7) / 7.0;
        }
    return img;
}

double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
    REQUIRE(a.data.size() == b.data.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

double mean_of(const ImageBuffer& img) {
    return std::accumulate(img.data.begin(), img.data.end(), 0.0) / img.data.size();
}

}  // namespace

TEST_CASE("resize: 2x1 ramp upsamples to the hand-computed 4x1 row") {
    ImageBuffer img(2, 1);
    img.at(0, 0, 0) = img.at(0, 0, 1) = img.at(0, 0, 2) = 0.0;
    img.at(1, 0, 0) = img.at(1, 0, 1) = img.at(1, 0, 2) = 1.0;
    auto out = resize_bilinear(img, 4, 1);
    double want[4] = {0.0, 0.25, 0.75, 1.0};
    for (int x = 0; x < 4; ++x)
        for (int c = 0; c < 3; ++c) CHECK(out.at(x, 0, c) == doctest::Approx(want[x]).epsilon(1e-12));
}

TEST_CASE("resize: constants stay constant and same-size is a bit-exact copy") {
    ImageBuffer flat(5, 4, 0.37);
    auto up = resize_bilinear(flat, 11, 9);
    for (double v : up.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));

    auto img = testutil::random_image(6, 5, 3);
    auto same = resize_bilinear(img, 6, 5);
    CHECK(testutil::images_equal(img, same));

    CHECK(contains(catch_message([&] { resize_bilinear(img, 0, 5); }), "resize"));
}

TEST_CASE("flips are involutions and move the expected pixel") {
    auto img = gradient_image(7, 5);
    auto h = hflip(img);
    CHECK(h.at(0, 2, 0) == img.at(6, 2, 0));
    CHECK(testutil::images_equal(hflip(h), img));
    auto v = vflip(img);
    CHECK(v.at(3, 0, 1) == img.at(3, 4, 1));
    CHECK(testutil::images_equal(vflip(v), img));
}

TEST_CASE("rotate_affine: identity parameters are a bit-exact copy") {
    auto img = testutil::random_image(9, 9, 11);
    auto out = rotate_affine(img, 0.0, 0.0, 0.0, 1.0);
    CHECK(testutil::images_equal(img, out));
}

TEST_CASE("rotate_affine: four quarter turns compose to the identity") {
    auto img = gradient_image(16, 16);
    auto out = img;
    for (int i = 0; i < 4; ++i) out = rotate_affine(out, 90.0, 0.0, 0.0, 1.0);
    CHECK(max_abs_diff(out, img) < 1e-3);
}

TEST_CASE("rotate_affine: translation shifts content and fills with black") {
    ImageBuffer img(8, 8, 1.0);
    auto out = rotate_affine(img, 0.0, 0.25, 0.0, 1.0);  // shift right by 2 px
    CHECK(out.at(7, 4, 0) == doctest::Approx(1.0));
    CHECK(out.at(0, 4, 0) == doctest::Approx(0.0));
    CHECK(out.at(1, 4, 0) == doctest::Approx(0.0));
    CHECK(out.at(2, 4, 0) == doctest::Approx(1.0));
}

TEST_CASE("rotate_affine: out-of-range arguments are rejected") {
    auto img = testutil::random_image(4, 4, 5);
    CHECK(contains(catch_message([&] { rotate_affine(img, 400.0, 0, 0, 1); }), "rotate_affine"));
    CHECK(contains(catch_message([&] { rotate_affine(img, 0.0, 0.5, 0, 1); }), "rotate_affine"));
    CHECK(contains(catch_message([&] { rotate_affine(img, 0.0, 0, 0, 0.05); }), "rotate_affine"));
}

TEST_CASE("perspective: zero displacement is the identity") {
    auto img = gradient_image(12, 10);
    std::array<std::array<double, 2>, 4> disp{};
    auto out = perspective(img, disp);
    CHECK(max_abs_diff(out, img) < 1e-6);
}

TEST_CASE("perspective: collinear corners are rejected") {
    auto img = gradient_image(10, 10);
    // collapse everything onto the top edge
    std::array<std::array<double, 2>, 4> disp{{{0, 0}, {0, 0}, {0, -9}, {0, -9}}};
    CHECK(contains(catch_message([&] { perspective(img, disp); }), "perspective"));
}

TEST_CASE("perspective: same displacement twice gives the same image") {
    auto img = gradient_image(14, 11);
    std::array<std::array<double, 2>, 4> disp{{{1.5, -0.75}, {-1.0, 0.5}, {0.25, 1.25}, {-0.5, -1.0}}};
    auto a = perspective(img, disp);
    auto b = perspective(img, disp);
    CHECK(testutil::images_equal(a, b));
    CHECK(max_abs_diff(a, img) > 1e-4);  // it actually warped something
}

TEST_CASE("color_jitter: identity factors are a bit-exact no-op") {
    auto img = testutil::random_image(8, 6, 21);
    auto out = color_jitter(img, 1.0, 1.0, 1.0, 0.0);
    CHECK(testutil::images_equal(img, out));
}

TEST_CASE("color_jitter: brightness scales and zero blacks out") {
    ImageBuffer img(2, 2, 0.4);
    auto half = color_jitter(img, 0.5, 1.0, 1.0, 0.0);
    for (double v : half.data) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
    auto black = color_jitter(img, 0.0, 1.0, 1.0, 0.0);
    for (double v : black.data) CHECK(v == doctest::Approx(0.0));
    auto capped = color_jitter(ImageBuffer(2, 2, 0.9), 2.0, 1.0, 1.0, 0.0);
    for (double v : capped.data) CHECK(v == doctest::Approx(1.0));  // clamped at 1
}

TEST_CASE("color_jitter: gray images are fixed points of saturation and hue") {
    ImageBuffer img(3, 3, 0.6);
    auto sat = color_jitter(img, 1.0, 1.0, 1.7, 0.0);
    CHECK(max_abs_diff(sat, img) < 1e-12);
    auto hue = color_jitter(img, 1.0, 1.0, 1.0, 0.31);
    CHECK(max_abs_diff(hue, img) < 1e-12);
}

TEST_CASE("color_jitter: saturation 0 collapses to per-pixel luma") {
    ImageBuffer img(1, 1);
    img.at(0, 0, 0) = 1.0;
    img.at(0, 0, 1) = 0.0;
    img.at(0, 0, 2) = 0.0;
    auto out = color_jitter(img, 1.0, 1.0, 0.0, 0.0);
    for (int c = 0; c < 3; ++c) CHECK(out.at(0, 0, c) == doctest::Approx(0.299).epsilon(1e-9));
}

TEST_CASE("color_jitter: contrast 0 collapses to the global mean luma") {
    ImageBuffer img(2, 1);
    for (int c = 0; c < 3; ++c) {
        img.at(0, 0, c) = 0.2;
        img.at(1, 0, c) = 0.8;
    }
    auto out = color_jitter(img, 1.0, 0.0, 1.0, 0.0);
    for (double v : out.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("color_jitter: hue rotations invert and large shifts are rejected") {
    auto img = testutil::random_image(5, 5, 77);
    auto a = color_jitter(img, 1.0, 1.0, 1.0, 0.3);
    auto b = color_jitter(a, 1.0, 1.0, 1.0, -0.3);
    CHECK(max_abs_diff(b, img) < 1e-9);

    auto quarters = img;
    for (int i = 0; i < 4; ++i) quarters = color_jitter(quarters, 1.0, 1.0, 1.0, 0.25);
    CHECK(max_abs_diff(quarters, img) < 1e-9);

    CHECK(testutil::contains(
        testutil::catch_message([&] { color_jitter(img, 1.0, 1.0, 1.0, 0.75); }), "hue"));
}

TEST_CASE("normalize: maps values and flags the buffer") {
    ImageBuffer img(1, 1);
    img.at(0, 0, 0) = 1.0;
    img.at(0, 0, 1) = 0.5;
    img.at(0, 0, 2) = 0.0;
    auto out = normalize(img, {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5});
    CHECK(out.normalized);
    CHECK(out.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(out.at(0, 0, 1) == doctest::Approx(0.0));
    CHECK(out.at(0, 0, 2) == doctest::Approx(-1.0));
    CHECK(catch_message([&] { normalize(out, {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}); }) ==
          "normalize: image already normalized");
}

TEST_CASE("random_erase: rectangle size tracks the area range, rest untouched") {
    ImageBuffer img(100, 100, 0.5);
    Rng rng(31);
    SampledParams sp;
    auto out = random_erase(img, rng, 0.02, 0.02, {0, 0, 0}, {1, 1, 1}, &sp);
    int changed = 0;
    for (int y = 0; y < 100; ++y)
        for (int x = 0; x < 100; ++x) {
            bool touched = false;
            for (int c = 0; c < 3; ++c) touched |= out.at(x, y, c) != img.at(x, y, c);
            bool inside = x >= sp.erase_x && x < sp.erase_x + sp.erase_w && y >= sp.erase_y &&
                          y < sp.erase_y + sp.erase_h;
            if (!inside) CHECK(!touched);
            if (touched) ++changed;
        }
    CHECK(sp.erase_w * sp.erase_h >= 150);
    CHECK(sp.erase_w * sp.erase_h <= 260);  // 200 px target, slack for rounding
    CHECK(changed > 0);
    double aspect = double(sp.erase_w) / sp.erase_h;
    CHECK(aspect >= 0.2);
    CHECK(aspect <= 4.0);
}

TEST_CASE("random_erase: identical rng state reproduces the rectangle") {
    ImageBuffer img(40, 30, 0.25);
    Rng a(7), b(7);
    auto x = random_erase(img, a, 0.02, 0.1);
    auto y = random_erase(img, b, 0.02, 0.1);
    CHECK(testutil::images_equal(x, y));
}

TEST_CASE("random_erase: normalized fill stays within the re-expressed range") {
    ImageBuffer img(20, 20, 0.0, true);  // normalized buffer, all zeros
    Rng rng(5);
    SampledParams sp;
    std::array<double, 3> mean = {0.5, 0.5, 0.5}, stdv = {0.5, 0.5, 0.5};
    auto out = random_erase(img, rng, 0.05, 0.1, mean, stdv, &sp);
    for (int y = sp.erase_y; y < sp.erase_y + sp.erase_h; ++y)
        for (int x = sp.erase_x; x < sp.erase_x + sp.erase_w; ++x)
            for (int c = 0; c < 3; ++c) {
                CHECK(out.at(x, y, c) >= -1.0 - 1e-12);
                CHECK(out.at(x, y, c) <= 1.0 + 1e-12);
            }
}

TEST_CASE("gaussian_blur: constants are fixed points") {
    ImageBuffer img(9, 9, 0.42);
    auto out = gaussian_blur(img, 1.3);
    for (double v : out.data) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));
    CHECK(contains(catch_message([&] { gaussian_blur(img, 0.0); }), "sigma"));
}

TEST_CASE("gaussian_blur: matches a dense 2-d convolution oracle") {
    auto img = testutil::random_image(11, 11, 13);
    double sigma = 0.8;
    auto out = gaussian_blur(img, sigma);

    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i)
        ksum += (k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma)));
    for (double& v : k) v /= ksum;
    auto reflect = [&](int i, int n) {
        while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
        return i;
    };
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx)
                        acc += k[dx + radius] * k[dy + radius] *
                               img.at(reflect(x + dx, 11), reflect(y + dy, 11), c);
                CHECK(out.at(x, y, c) == doctest::Approx(acc).epsilon(1e-9));
            }
}

TEST_CASE("gaussian_blur: interior mean is preserved") {
    auto img = testutil::random_image(32, 32, 17);
    auto out = gaussian_blur(img, 1.0);
    CHECK(mean_of(out) == doctest::Approx(mean_of(img)).epsilon(1e-2));
    // away from borders the kernel is fully supported, so mass moves around
    // but bounded values stay bounded
    for (double v : out.data) {
        CHECK(v >= -1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
}

TEST_CASE("pipeline: same (seed, index) gives bit-identical output, different index differs") {
    auto img = testutil::random_image(20, 16, 3);
    AugmentConfig cfg;
    cfg.target_w = 12;
    cfg.target_h = 12;
    SampledParams pa, pb;
    auto a = apply_pipeline(img, cfg, 123, 5, &pa);
    auto b = apply_pipeline(img, cfg, 123, 5, &pb);
    CHECK(testutil::images_equal(a, b));
    CHECK(pa.angle_deg == pb.angle_deg);
    CHECK(pa.scale == pb.scale);
    CHECK(pa.hflip == pb.hflip);

    auto c = apply_pipeline(img, cfg, 123, 6);
    CHECK(!testutil::images_equal(a, c));
    auto d = apply_pipeline(img, cfg, 124, 5);
    CHECK(!testutil::images_equal(a, d));
}

TEST_CASE("pipeline: sampled parameters respect the configured ranges") {
    auto img = testutil::random_image(10, 10, 9);
    AugmentConfig cfg;
    cfg.target_w = 8;
    cfg.target_h = 8;
    for (std::uint64_t i = 0; i < 200; ++i) {
        SampledParams sp;
        apply_pipeline(img, cfg, 42, i, &sp);
        CHECK(std::abs(sp.angle_deg) <= cfg.max_rotation_deg);
        CHECK(std::abs(sp.translate_x) <= cfg.max_translate_frac);
        CHECK(std::abs(sp.translate_y) <= cfg.max_translate_frac);
        CHECK(sp.scale >= cfg.scale_lo);
        CHECK(sp.scale <= cfg.scale_hi);
        CHECK(sp.brightness >= 1.0 - cfg.jitter_brightness);
        CHECK(sp.brightness <= 1.0 + cfg.jitter_brightness);
        CHECK(std::abs(sp.hue) <= cfg.jitter_hue);
        if (sp.blur) {
            CHECK(sp.blur_sigma >= cfg.blur_sigma_lo);
            CHECK(sp.blur_sigma <= cfg.blur_sigma_hi);
        } else {
            CHECK(sp.blur_sigma == 0.0);
        }
        if (!sp.perspective)
            for (const auto& corner : sp.corner_disp)
                for (double v : corner) CHECK(v == 0.0);
        if (sp.erase) {
            CHECK(sp.erase_w >= 1);
            CHECK(sp.erase_h >= 1);
            CHECK(sp.erase_x + sp.erase_w <= cfg.target_w);
            CHECK(sp.erase_y + sp.erase_h <= cfg.target_h);
        }
    }
}

TEST_CASE("pipeline: gate frequencies match their probabilities") {
    auto img = testutil::random_image(4, 4, 1);
    AugmentConfig cfg;
    cfg.target_w = 8;
    cfg.target_h = 8;
    const int n = 10000;
    int hflips = 0, vflips = 0, persp = 0, erase = 0, blur = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        SampledParams sp;
        apply_pipeline(img, cfg, 999, i, &sp);
        hflips += sp.hflip;
        vflips += sp.vflip;
        persp += sp.perspective;
        erase += sp.erase;
        blur += sp.blur;
    }
    auto within = [&](int count, double p) {
        double tol = 4.0 * std::sqrt(p * (1.0 - p) / n);
        return std::abs(double(count) / n - p) <= tol;
    };
    CHECK(within(hflips, cfg.p_hflip));
    CHECK(within(vflips, cfg.p_vflip));
    CHECK(within(persp, cfg.p_perspective));
    CHECK(within(erase, cfg.p_erase));
    CHECK(within(blur, cfg.p_blur));
}

TEST_CASE("pipeline: with every stage disabled it equals the eval transform exactly") {
    auto img = testutil::random_image(10, 7, 55);
    AugmentConfig cfg;
    cfg.target_w = 6;
    cfg.target_h = 6;
    cfg.p_hflip = cfg.p_vflip = cfg.p_perspective = cfg.p_erase = cfg.p_blur = 0.0;
    cfg.max_rotation_deg = 0.0;
    cfg.max_translate_frac = 0.0;
    cfg.scale_lo = cfg.scale_hi = 1.0;
    cfg.jitter_brightness = cfg.jitter_contrast = cfg.jitter_saturation = cfg.jitter_hue = 0.0;

    auto train = apply_pipeline(img, cfg, 77, 0);
    auto eval = eval_transform(img, cfg);
    CHECK(train.normalized);
    CHECK(eval.normalized);
    CHECK(testutil::images_equal(train, eval));
}

TEST_CASE("eval_transform resizes then normalizes") {
    ImageBuffer img(4, 4, 0.75);
    AugmentConfig cfg;
    cfg.target_w = 2;
    cfg.target_h = 2;
    auto out = eval_transform(img, cfg);
    REQUIRE(out.width == 2);
    REQUIRE(out.height == 2);
    CHECK(out.normalized);
    for (double v : out.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("config validation rejects out-of-range fields") {
    AugmentConfig cfg;
    cfg.p_hflip = 1.5;
    CHECK(contains(catch_message([&] { cfg.validate(); }), "probabilities"));
    cfg = AugmentConfig{};
    cfg.max_rotation_deg = 30.0;
    CHECK(contains(catch_message([&] { cfg.validate(); }), "rotation"));
    cfg = AugmentConfig{};
    cfg.scale_lo = 1.2;
    cfg.scale_hi = 0.9;
    CHECK(contains(catch_message([&] { cfg.validate(); }), "scale"));
    cfg = AugmentConfig{};
    cfg.target_w = 0;
    CHECK(contains(catch_message([&] { cfg.validate(); }), "target"));
    cfg = AugmentConfig{};
    CHECK_NOTHROW(cfg.validate());
}
