#pragma once

#include "rawburst/model/burst.hpp"
#include "rawburst/model/warp.hpp"
#include "rawburst/util/random.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace rawburst {

/// log10(beta) = slope * log10(alpha) + intercept, log10(alpha) uniform on [min, max].
struct LogLinearNoise {
    double slope = 2.0;
    double intercept = 1.25;
    double log_alpha_min = -4.0;
    double log_alpha_max = -2.0;
    bool enabled = true;

    struct Params {
        double alpha = 0.0;
        double beta = 0.0;
    };
    Params sample(Rng& rng) const;
    void validate() const;
};

struct SynthConfig {
    int frames = 11;
    int crop = 256;              // high-resolution ground-truth size (square)
    int scale = 1;               // super-resolution factor, one of {1, 2, 4}
    double max_translation = 6;  // high-resolution pixels
    double max_rotation_deg = 1;
    double ev_min = -3.0;
    double ev_max = 3.0;
    double gt_gain_ev_min = -5.0;
    double gt_gain_ev_max = 5.0;
    std::array<double, 3> white_balance{2.0, 1.0, 1.7};
    LogLinearNoise noise{};
    SensorConfig sensor{};       // alpha and beta are filled per burst from `noise`
    int tile_size = 200;
    std::uint64_t seed = 0;

    void validate() const;
    int reference_index() const { return frames / 2; }
    /// Scene margin needed so warped frames never sample outside the scene.
    int margin() const;
};

struct BurstSample {
    Image gt;                                 // crop x crop x 3 irradiance
    Burst burst;                              // normalized frames + metadata
    std::vector<DnImage> raw;                 // quantized DN frames
    std::vector<AffineWarpField> gt_fields;   // high-resolution units, reference is identity
    std::vector<double> evs;
    double gt_gain_ev = 0.0;
    LogLinearNoise::Params noise{};
    std::uint64_t seed = 0;
};

/// sRGB-encoded 8-bit procedural scene (values 0..255, 3 channels): textured dead leaves
/// over a smooth background.
Image procedural_scene(int height, int width, std::uint64_t seed);

/// Inverse sRGB curve on a [0, 1] value.
double srgb_to_linear(double v);

/// 8-bit sRGB -> linear irradiance: /255, inverse gamma, divide by white balance, times 2^gain_ev.
Image unprocess(const Image& srgb8, double gain_ev, const std::array<double, 3>& white_balance = {2.0, 1.0, 1.7});

/// Global rigid motion (translation + rotation about the image center) replicated over tiles.
AffineWarpField random_warp(Rng& rng, const SynthConfig& config, int height, int width);

/// Full synthesis from a linear scene that is at least crop + 2 * margin on each side
/// (a scene of exactly crop size is accepted; warped borders are then zero-padded).
BurstSample synthesize_burst(const Image& scene, const SynthConfig& config);

/// procedural_scene -> unprocess with a random gain -> synthesize_burst, all keyed on config.seed.
BurstSample synthesize_random_burst(const SynthConfig& config);

/// Bilinear downscale by an integer factor: output pixel i samples s*i + (s - 1) / 2.
Image bilinear_downscale(const Image& img, int scale);

} // namespace rawburst
