#include "rawburst/metrics/metrics.hpp"
#include "rawburst/register/features.hpp"
#include "rawburst/register/lk.hpp"
#include "rawburst/register/phase_correlation.hpp"
#include "rawburst/register/pyramid.hpp"
#include "rawburst/register/register.hpp"
#include "rawburst/synth/synth.hpp"
#include "rawburst/util/errors.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace rawburst;

namespace {

// Smooth band-limited texture evaluated at arbitrary points.
double smooth_texture(double x, double y) {
    return 0.5 + 0.12 * std::sin(0.23 * x + 0.11 * y) + 0.1 * std::cos(0.09 * x - 0.31 * y + 0.4) +
           0.08 * std::sin(0.17 * x + 0.27 * y + 1.3) + 0.06 * std::cos(0.05 * x + 0.04 * y);
}

Image sample_texture(int h, int w, const Affine& t, double freq = 0.4) {
    Image img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Point p = t.apply({static_cast<double>(x), static_cast<double>(y)});
            img(y, x) = smooth_texture(freq * p.x, freq * p.y);
        }
    return img;
}

Image circular_shift(const Image& img, int dy, int dx) {
    Image out(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const int sy = ((y - dy) % img.height() + img.height()) % img.height();
            const int sx = ((x - dx) % img.width() + img.width()) % img.width();
            out(y, x) = img(sy, sx);
        }
    return out;
}

SynthConfig still_config(int frames, double max_translation, double max_rotation) {
    SynthConfig c;
    c.frames = frames;
    c.crop = 128;
    c.noise.enabled = false;
    c.ev_min = c.ev_max = 0.0;
    c.gt_gain_ev_min = c.gt_gain_ev_max = -1.0;
    c.max_translation = max_translation;
    c.max_rotation_deg = max_rotation;
    c.seed = 21;
    return c;
}

double mean_error(const RegistrationResult& r, const std::vector<AffineWarpField>& truth) {
    double sum = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) sum += geometric_error(r.fields[k], truth[k]);
    return sum / truth.size();
}

} // namespace

TEST_CASE("mtb") {
    SUBCASE("constant image") {
        Image c(8, 8, 1, 0.3);
        const Bitmap b = mtb(c);
        CHECK(b.median == 0.3);
        CHECK(max_value(b.bits) == 0.0);
        CHECK(min_value(b.excluded) == 1.0);
    }
    SUBCASE("ramp splits at its midpoint") {
        Image r(4, 8);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 8; ++x) r(y, x) = (y * 8 + x) / 127.0;
        const Bitmap b = mtb(r);
        for (int i = 0; i < 32; ++i) CHECK(b.bits.values()[i] == (i >= 16 ? 1.0 : 0.0));
        // 15/127 and 16/127 sit within 4/255 of the 15.5/127 median.
        CHECK(b.excluded.values()[15] == 1.0);
        CHECK(b.excluded.values()[10] == 0.0);
    }
    SUBCASE("bitmap is invariant to a gain") {
        const Image t = oracle::textured(20, 24, 0.3);
        CHECK(mtb(t).bits == mtb(t * 2.0).bits);
    }
    SUBCASE("median of even and odd counts") {
        Image a(1, 4);
        a(0, 0) = 4;
        a(0, 1) = 1;
        a(0, 2) = 3;
        a(0, 3) = 2;
        CHECK(median_value(a) == 2.5);
        Image b(1, 3);
        b(0, 0) = 9;
        b(0, 1) = 1;
        b(0, 2) = 5;
        CHECK(median_value(b) == 5.0);
    }
}

TEST_CASE("feature extractors") {
    RawFrame f;
    f.data = Image(4, 4, 1, 0.2);
    f.data(0, 0) = 1.0;  // saturates the top-left block
    f.data(2, 2) = 0.6;
    const FeatureMap p = PlainLuma().extract(f);
    CHECK(p.values.height() == 2);
    CHECK(p.mask(0, 0) == 0.0);
    CHECK(p.mask(1, 1) == 1.0);
    // Unsaturated block means 0.2, 0.2, 0.3 -> mean 0.7/3.
    CHECK(p.values(0, 1) == doctest::Approx(0.2 / (0.7 / 3.0)));
    CHECK(p.values(1, 1) == doctest::Approx(0.3 / (0.7 / 3.0)));

    const FeatureMap m = MtbFeature().extract(f);
    for (double v : m.values.values()) CHECK((v == 0.5 || v == -0.5 || v == 0.0));

    CHECK(make_extractor("plain")->name() == "plain");
    CHECK(make_extractor("mtb")->name() == "mtb");
    CHECK_THROWS_AS(make_extractor("cnn"), ValidationError);
}

TEST_CASE("pyramid") {
    const Image base = oracle::textured(64, 48);
    const GaussianPyramid p(base, Image(64, 48, 1, 1.0), 4);
    REQUIRE(p.levels() == 4);
    CHECK(p.image(0) == base);
    CHECK(p.image(1).height() == 32);
    CHECK(p.image(3).width() == 6);
    CHECK(min_value(p.mask(3)) == 1.0);

    // Constant images stay constant; the kernel sums to one.
    const GaussianPyramid c(Image(17, 9, 1, 0.7), Image(17, 9, 1, 1.0), 2);
    CHECK(c.image(1).height() == 8);
    for (double v : c.image(1).values()) CHECK(v == doctest::Approx(0.7));

    // A masked sample invalidates the coarse samples whose kernel covers it.
    Image mask(32, 32, 1, 1.0);
    mask(10, 10) = 0.0;
    const GaussianPyramid m(oracle::textured(32, 32), mask, 2);
    CHECK(m.mask(1)(5, 5) == 0.0);
    CHECK(m.mask(1)(4, 4) == 0.0);
    CHECK(m.mask(1)(7, 7) == 1.0);

    const Affine a{{1.01, 0.02, 3.0, -0.01, 0.99, -1.5}};
    const Affine up = GaussianPyramid::upscale_affine(a);
    CHECK(up.m[0] == a.m[0]);
    CHECK(up.m[2] == 6.0);
    CHECK(up.m[5] == -3.0);
    const Affine back = GaussianPyramid::downscale_affine(up);
    for (int i = 0; i < 6; ++i) CHECK(back.m[i] == doctest::Approx(a.m[i]));
}

TEST_CASE("phase correlation") {
    // Broadband texture: lightly smoothed white noise.
    std::mt19937_64 rng(17);
    const Image ref = binomial_blur(oracle::random_image(64, 64, 1, rng, 0.0, 1.0));

    SUBCASE("identical inputs") {
        const Shift s = phase_correlate(ref, ref);
        CHECK(std::abs(s.dy) < 0.02);
        CHECK(std::abs(s.dx) < 0.02);
    }
    SUBCASE("integer circular shift") {
        const Shift s = phase_correlate(ref, circular_shift(ref, 3, -2));
        CHECK(std::abs(s.dy - 3.0) < 0.05);
        CHECK(std::abs(s.dx + 2.0) < 0.05);
    }
    SUBCASE("half-pixel shift through bilinear resampling") {
        Image mov(64, 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) mov(y, x) = 0.5 * (ref(y, x) + ref(y, (x + 63) % 64));
        const Shift s = phase_correlate(ref, mov);
        CHECK(std::abs(s.dx - 0.5) <= 0.15);
        CHECK(std::abs(s.dy) <= 0.15);
    }
    SUBCASE("no signal") {
        CHECK_THROWS_AS(phase_correlate(Image(16, 16), Image(16, 16, 1, 1.0)), NoSignalError);
        CHECK_THROWS_AS(phase_correlate(Image(8, 8), Image(8, 9)), ValidationError);
    }
    SUBCASE("masked samples are neutralised") {
        Image mask(4, 4, 1, 1.0);
        Image v(4, 4, 1, 2.0);
        v(1, 1) = 100.0;
        mask(1, 1) = 0.0;
        const Image filled = fill_masked(v, mask);
        CHECK(filled(1, 1) == 2.0);
    }
}

TEST_CASE("lucas-kanade") {
    const int n = 96;
    const Image ref = sample_texture(n, n, Affine::identity());

    SUBCASE("fixed point at identity") {
        const LkResult r = lk_affine(ref, ref, Affine::identity(), 3);
        CHECK(r.diag.first_increment < 1e-8);
        CHECK(r.warp.is_identity());
        CHECK(r.diag.iterations == 3);
    }
    SUBCASE("exact init is a fixed point") {
        // ref(u) = texture(u), mov(v) = texture(truth^-1 v), so mov(truth(u)) = ref(u).
        // With an integer shift the samples land on the grid and interpolation is exact.
        const Affine shift = Affine::translation(3.0, -2.0);
        const LkResult exact = lk_affine(ref, sample_texture(n, n, shift.inverse()), shift, 3);
        CHECK(exact.diag.first_increment < 1e-3);
        // A general affine only moves by the bilinear interpolation error.
        const Affine truth{{1.004, -0.012, 1.3, 0.009, 0.997, -0.8}};
        const LkResult r = lk_affine(ref, sample_texture(n, n, truth.inverse()), truth, 3);
        CHECK(r.diag.first_increment < 0.05);
    }
    SUBCASE("translation recovered through the pyramid") {
        const Affine truth = Affine::translation(1.2, -0.7);
        const Image mov = sample_texture(n, n, truth.inverse());
        const Image ones(n, n, 1, 1.0);
        const GaussianPyramid pr(ref, ones, 3), pm(mov, ones, 3);
        Affine p = Affine::identity();
        for (int l = 2; l >= 0; --l) {
            const Image& t = pr.image(l);
            p = lk_affine(t, pr.mask(l), pm.image(l), pm.mask(l), p, 3, {0, t.height(), 0, t.width()}).warp;
            if (l > 0) p = GaussianPyramid::upscale_affine(p);
        }
        CHECK(std::abs(p.m[2] - 1.2) < 0.1);
        CHECK(std::abs(p.m[5] + 0.7) < 0.1);
    }
    SUBCASE("objective never increases") {
        const Affine truth{{1.01, 0.02, 2.0, -0.015, 1.0, 1.5}};
        const Image mov = sample_texture(n, n, truth.inverse());
        const LkResult r0 = lk_affine(ref, mov, Affine::identity(), 0);
        double prev = r0.diag.residual;
        for (int it = 1; it <= 5; ++it) {
            const LkResult r = lk_affine(ref, mov, Affine::identity(), it);
            CHECK(r.diag.residual <= prev + 1e-15);
            prev = r.diag.residual;
        }
        CHECK(prev < 0.1 * r0.diag.residual);
    }
    SUBCASE("degenerate input is flagged and returns the init") {
        const Image flat(n, n, 1, 0.5);
        const Affine init = Affine::translation(0.3, 0.1);
        const LkResult r = lk_affine(flat, flat, init, 3);
        CHECK(r.diag.singular);
        CHECK(r.warp == init);
    }
    SUBCASE("region restricts the samples") {
        const LkResult r = lk_affine(ref, Image(n, n, 1, 1.0), ref, Image(n, n, 1, 1.0), Affine::identity(), 1,
                                     {10, 20, 30, 45});
        CHECK(r.diag.samples == 150);
        CHECK_THROWS_AS(lk_affine(ref, Image(n, n, 1, 1.0), ref, Image(n, n, 1, 1.0), Affine::identity(), 1,
                                  {10, 5, 0, 4}),
                        ValidationError);
    }
}

TEST_CASE("harmonize clips both frames at a common scene level") {
    RawFrame bright, dark;
    bright.data = Image(2, 3);
    dark.data = Image(2, 3);
    const double scene[6] = {0.05, 0.1, 0.2, 0.3, 0.6, 0.9};
    for (int i = 0; i < 6; ++i) {
        bright.data.values()[i] = std::min(1.0, 2.0 * scene[i]);
        dark.data.values()[i] = scene[i];
    }
    const HarmonizedPair p = harmonize(bright, dark);
    REQUIRE(p.ok);
    CHECK(p.gain == doctest::Approx(2.0));
    for (int i = 0; i < 6; ++i)
        CHECK(p.reference.data.values()[i] == doctest::Approx(2.0 * p.frame.data.values()[i]));
    CHECK(max_value(p.reference.data) < kDefaultSaturationThreshold);

    RawFrame full;
    full.data = Image(2, 3, 1, 1.0);
    CHECK_FALSE(harmonize(full, dark).ok);
}

TEST_CASE("unit conversion between feature and high-resolution pixels") {
    for (int s : {1, 2, 4}) {
        const Affine t = Affine::translation(1.0, -2.0);
        const Affine hr = feature_to_hr(t, s);
        CHECK(hr.m[2] == doctest::Approx(2.0 * s));
        CHECK(hr.m[5] == doctest::Approx(-4.0 * s));
        const Affine a{{1.01, 0.02, 3.0, -0.01, 0.99, -1.5}};
        const Affine round = hr_to_feature(feature_to_hr(a, s), s);
        for (int i = 0; i < 6; ++i) CHECK(round.m[i] == doctest::Approx(a.m[i]));
    }
}

TEST_CASE("register_burst") {
    SUBCASE("identical frames register to identity") {
        const BurstSample s = synthesize_random_burst(still_config(3, 0.0, 0.0));
        const RegistrationResult r = register_burst(s.burst, PlainLuma());
        REQUIRE(r.fields.size() == 3);
        for (const AffineWarpField& f : r.fields) CHECK(geometric_error(f, s.gt_fields[0]) < 0.05);
        CHECK(r.fields[1].is_identity());
        CHECK(r.tiles.size() == 2);
    }
    SUBCASE("moving frames are recovered") {
        SynthConfig c = still_config(5, 6.0, 1.0);
        c.ev_min = -2.0;
        c.ev_max = 2.0;
        const BurstSample s = synthesize_random_burst(c);
        const RegistrationResult r = register_burst(s.burst, PlainLuma());
        CHECK(mean_error(r, s.gt_fields) < 0.5);
        CHECK(r.fields[2].is_identity());

        RegistrationConfig pc_only;
        pc_only.lucas_kanade = false;
        const RegistrationResult p = register_burst(s.burst, MtbFeature(), pc_only);
        CHECK(mean_error(p, s.gt_fields) < 4.5);

        const RegistrationResult again = register_burst(s.burst, PlainLuma());
        for (int k = 0; k < 5; ++k) CHECK(again.fields[k].tiles() == r.fields[k].tiles());
    }
    SUBCASE("exposure robustness") {
        const BurstSample s = synthesize_random_burst(still_config(3, 4.0, 0.5));
        Burst doubled = s.burst;
        for (double& v : doubled.frames[0].data.values())
            if (v < kDefaultSaturationThreshold) v = std::min(1.0, 2.0 * v);
        const RegistrationResult a = register_burst(s.burst, PlainLuma());
        const RegistrationResult b = register_burst(doubled, PlainLuma());
        CHECK(geometric_error(a.fields[0], b.fields[0]) < 0.05);
    }
    SUBCASE("tiles refine independently at high resolution") {
        SynthConfig c = still_config(3, 3.0, 0.5);
        c.crop = 128;
        c.scale = 2;
        c.tile_size = 64;
        const BurstSample s = synthesize_random_burst(c);
        RegistrationConfig rc;
        rc.tile_size = 64;
        const RegistrationResult r = register_burst(s.burst, PlainLuma(), rc);
        CHECK(r.fields[0].tiles_y() == 2);
        CHECK(r.tiles.size() == 8);
        CHECK(mean_error(r, s.gt_fields) < 1.0);
    }
    SUBCASE("a frame without signal falls back to identity") {
        BurstSample s = synthesize_random_burst(still_config(3, 2.0, 0.0));
        s.burst.frames[0].data.fill(0.0);
        const RegistrationResult r = register_burst(s.burst, PlainLuma());
        CHECK(r.frames[0].no_signal);
        CHECK(r.fields[0].is_identity());
    }
    SUBCASE("needs two frames") {
        BurstSample s = synthesize_random_burst(still_config(1, 0.0, 0.0));
        CHECK_THROWS_AS(register_burst(s.burst, PlainLuma()), ValidationError);
    }
}
