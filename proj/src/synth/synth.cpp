#include "rawburst/synth/synth.hpp"

#include "rawburst/model/operators.hpp"
#include "rawburst/util/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rawburst {

LogLinearNoise::Params LogLinearNoise::sample(Rng& rng) const {
    if (!enabled) return {};
    const double log_alpha = rng.uniform(log_alpha_min, log_alpha_max);
    const double log_beta = slope * log_alpha + intercept;
    return {std::pow(10.0, log_alpha), std::pow(10.0, log_beta)};
}

void LogLinearNoise::validate() const {
    require(log_alpha_min <= log_alpha_max, "noise: log_alpha range must be ordered");
    require(std::isfinite(slope) && std::isfinite(intercept), "noise: coefficients must be finite");
}

void SynthConfig::validate() const {
    require(frames >= 1, "synth: need at least one frame");
    require(scale == 1 || scale == 2 || scale == 4, "synth: scale must be 1, 2 or 4");
    require(crop > 0 && crop % (2 * scale) == 0, "synth: crop must be a positive multiple of 2 * scale");
    require(max_translation >= 0 && max_rotation_deg >= 0, "synth: motion ranges must be non-negative");
    require(ev_min <= ev_max && gt_gain_ev_min <= gt_gain_ev_max, "synth: EV ranges must be ordered");
    require(white_balance[0] > 0 && white_balance[1] > 0 && white_balance[2] > 0, "synth: white balance gains must be > 0");
    require(tile_size > 0, "synth: tile size must be positive");
    noise.validate();
    SensorConfig s = sensor;
    s.alpha = s.beta = 0.0;
    s.validate();
}

int SynthConfig::margin() const {
    const double half_diag = crop / std::numbers::sqrt2;
    const double rot = 2.0 * half_diag * std::sin(0.5 * max_rotation_deg * std::numbers::pi / 180.0);
    return static_cast<int>(std::ceil(std::numbers::sqrt2 * max_translation + rot)) + 2;
}

namespace {

double smooth_noise(double x, double y, const double* phases) {
    return std::sin(0.011 * x + phases[0]) * std::cos(0.017 * y + phases[1]) +
           0.5 * std::sin(0.031 * (x + y) + phases[2]) + 0.25 * std::cos(0.047 * (x - 0.6 * y) + phases[3]);
}

} // namespace

Image procedural_scene(int height, int width, std::uint64_t seed) {
    require(height > 0 && width > 0, "procedural_scene: empty size");
    Rng rng(seed);
    Image img(height, width, 3);

    double phases[4];
    for (double& p : phases) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double base[3], tint[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(60.0, 190.0);
        tint[c] = rng.uniform(-50.0, 50.0);
    }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double n = smooth_noise(x, y, phases);
            for (int c = 0; c < 3; ++c) img(y, x, c) = base[c] + tint[c] * n;
        }

    // Dead leaves: radii with density ~ r^-3 on [r_min, r_max], later leaves occlude earlier ones.
    const double size = std::max(height, width);
    const double r_min = 2.0, r_max = size / 5.0;
    const int leaves = static_cast<int>(5.0 * height * width / (r_min * r_max * std::numbers::pi)) + 20;
    for (int l = 0; l < leaves; ++l) {
        const double u = rng.uniform();
        const double r = 1.0 / std::sqrt(1.0 / (r_min * r_min) - u * (1.0 / (r_min * r_min) - 1.0 / (r_max * r_max)));
        const double cx = rng.uniform(-r, width + r), cy = rng.uniform(-r, height + r);
        const bool square = rng.uniform() < 0.3;
        const double orient = rng.uniform(0.0, std::numbers::pi);
        const int texture = rng.index(3);
        const double freq = rng.uniform(0.15, 0.9);
        const double tex_dir = rng.uniform(0.0, std::numbers::pi);
        const double amp = rng.uniform(15.0, 60.0);
        double col[3], col2[3];
        for (int c = 0; c < 3; ++c) {
            col[c] = rng.uniform(10.0, 245.0);
            col2[c] = rng.uniform(10.0, 245.0);
        }
        const double co = std::cos(orient), so = std::sin(orient);
        const double ct = std::cos(tex_dir), st = std::sin(tex_dir);
        const int y0 = std::max(0, static_cast<int>(cy - r * 1.5)), y1 = std::min(height - 1, static_cast<int>(cy + r * 1.5));
        const int x0 = std::max(0, static_cast<int>(cx - r * 1.5)), x1 = std::min(width - 1, static_cast<int>(cx + r * 1.5));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - cx, dy = y - cy;
                const double a = co * dx + so * dy, b = -so * dx + co * dy;
                const bool in = square ? (std::abs(a) <= r && std::abs(b) <= 0.6 * r) : (a * a + b * b <= r * r);
                if (!in) continue;
                const double t = ct * dx + st * dy;
                for (int c = 0; c < 3; ++c) {
                    double v = col[c];
                    if (texture == 1) v += amp * std::sin(freq * t);
                    else if (texture == 2) v = std::sin(freq * t) > 0.0 ? col[c] : col2[c];
                    img(y, x, c) = v;
                }
            }
    }

    // Mild [1 2 1] optical smoothing, then 8-bit quantization.
    Image tmp = img;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c)
                tmp(y, x, c) = 0.25 * img(y, reflect_index(x - 1, width), c) + 0.5 * img(y, x, c) +
                               0.25 * img(y, reflect_index(x + 1, width), c);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = 0.25 * tmp(reflect_index(y - 1, height), x, c) + 0.5 * tmp(y, x, c) +
                                 0.25 * tmp(reflect_index(y + 1, height), x, c);
                img(y, x, c) = std::clamp(std::round(v), 0.0, 255.0);
            }
    return img;
}

double srgb_to_linear(double v) {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

Image unprocess(const Image& srgb8, double gain_ev, const std::array<double, 3>& white_balance) {
    require(srgb8.channels() == 3, "unprocess: expects an RGB image");
    const double gain = std::exp2(gain_ev);
    Image out(srgb8.height(), srgb8.width(), 3);
    for (int y = 0; y < srgb8.height(); ++y)
        for (int x = 0; x < srgb8.width(); ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(srgb8(y, x, c), 0.0, 255.0) / 255.0;
                out(y, x, c) = srgb_to_linear(v) / white_balance[c] * gain;
            }
    return out;
}

AffineWarpField random_warp(Rng& rng, const SynthConfig& config, int height, int width) {
    const double tx = rng.uniform(-config.max_translation, config.max_translation);
    const double ty = rng.uniform(-config.max_translation, config.max_translation);
    const double theta = rng.uniform(-config.max_rotation_deg, config.max_rotation_deg) * std::numbers::pi / 180.0;
    if (tx == 0.0 && ty == 0.0 && theta == 0.0) return AffineWarpField::identity(height, width, config.tile_size);
    const Point center{0.5 * (width - 1), 0.5 * (height - 1)};
    const Affine a = Affine::translation(tx, ty).compose(Affine::rotation(theta, center));
    return AffineWarpField(height, width, config.tile_size, a);
}

Image bilinear_downscale(const Image& img, int scale) {
    require(scale >= 1, "bilinear_downscale: scale must be >= 1");
    if (scale == 1) return img;
    require(img.height() % scale == 0 && img.width() % scale == 0, "bilinear_downscale: size not divisible");
    const int h = img.height() / scale, w = img.width() / scale;
    Image out(h, w, img.channels());
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int c = 0; c < img.channels(); ++c)
                out(i, j, c) = sample_bilinear(img, lr_to_hr(j, scale), lr_to_hr(i, scale), c);
    return out;
}

BurstSample synthesize_burst(const Image& scene, const SynthConfig& config) {
    config.validate();
    require(scene.channels() == 3, "synthesize_burst: scene must be RGB");
    require(scene.height() >= config.crop && scene.width() >= config.crop,
            "synthesize_burst: scene is smaller than the requested crop");
    const int crop = config.crop;
    const int oy = (scene.height() - crop) / 2, ox = (scene.width() - crop) / 2;

    BurstSample out;
    out.seed = config.seed;
    out.gt = Image(crop, crop, 3);
    for (int y = 0; y < crop; ++y)
        for (int x = 0; x < crop; ++x)
            for (int c = 0; c < 3; ++c) out.gt(y, x, c) = scene(y + oy, x + ox, c);

    Rng rng(derive_seed(config.seed, 2));
    out.noise = config.noise.sample(rng);
    const int k0 = config.reference_index();
    const int s = config.scale;
    const BayerPattern pattern = config.sensor.pattern;

    SensorConfig sensor = config.sensor;
    sensor.alpha = out.noise.alpha;
    sensor.beta = out.noise.beta;

    out.burst.meta.frame_count = config.frames;
    out.burst.meta.reference = k0;
    out.burst.meta.scale = s;
    out.burst.meta.exposures.clear();

    for (int k = 0; k < config.frames; ++k) {
        AffineWarpField field = random_warp(rng, config, crop, crop);
        double ev = rng.uniform(config.ev_min, config.ev_max);
        if (k == k0) {
            field = AffineWarpField::identity(crop, crop, config.tile_size);
            ev = 0.0;
        }
        const double exposure = std::exp2(ev);

        AffineWarpField scene_field(crop, crop, config.tile_size,
                                    Affine::translation(ox, oy).compose(field.tile(0, 0)));
        const Image warped = warp_apply(scene, scene_field).image;
        const Image lr = bilinear_downscale(warped, s);
        Image analog = cfa_apply(lr, pattern);
        analog *= exposure;
        analog = add_noise(analog, out.noise.alpha, out.noise.beta, config.seed, static_cast<std::uint64_t>(k));
        DnImage dn = quantize(analog, 1.0, sensor);

        RawFrame frame;
        frame.data = normalize(dn, sensor);
        frame.exposure = exposure;
        frame.sensor = sensor;

        out.raw.push_back(std::move(dn));
        out.burst.frames.push_back(std::move(frame));
        out.burst.meta.exposures.push_back(exposure);
        out.gt_fields.push_back(std::move(field));
        out.evs.push_back(ev);
    }
    return out;
}

BurstSample synthesize_random_burst(const SynthConfig& config) {
    config.validate();
    const int size = config.crop + 2 * config.margin();
    const Image srgb = procedural_scene(size, size, derive_seed(config.seed, 1));
    Rng rng(derive_seed(config.seed, 3));
    const double gain_ev = rng.uniform(config.gt_gain_ev_min, config.gt_gain_ev_max);
    BurstSample sample = synthesize_burst(unprocess(srgb, gain_ev, config.white_balance), config);
    sample.gt_gain_ev = gain_ev;
    return sample;
}

} // namespace rawburst
