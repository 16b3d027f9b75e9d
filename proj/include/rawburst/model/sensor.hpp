#pragma once

#include "rawburst/util/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rawburst {

enum class BayerLayout { RGGB, BGGR, GRBG, GBRG };

/// 2x2 color filter tile. Channel indices are 0=R, 1=G, 2=B.
class BayerPattern {
public:
    BayerPattern() = default;
    explicit BayerPattern(BayerLayout layout);

    BayerLayout layout() const { return layout_; }
    int channel_at(int y, int x) const { return tile_[(y & 1) * 2 + (x & 1)]; }
    std::string name() const;

    static BayerPattern parse(const std::string& name);
    static std::vector<BayerLayout> all_layouts();

private:
    BayerLayout layout_ = BayerLayout::RGGB;
    int tile_[4] = {0, 1, 1, 2};
};

struct SensorConfig {
    int bit_depth = 12;
    int black_level = 0;
    int white_level = 4095;
    double alpha = 0.0;  // shot-noise variance coefficient
    double beta = 0.0;   // read-noise variance
    BayerPattern pattern{};

    /// Throws ValidationError when 0 <= b < c <= 2^q - 1, alpha >= 0, beta >= 0 does not hold.
    void validate() const;
    int max_dn() const { return (1 << bit_depth) - 1; }
};

/// Raw DN mosaic with integer samples.
struct DnImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint16_t> data;

    std::uint16_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint16_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    bool operator==(const DnImage&) const = default;
};

/// One mosaicked burst member, normalized to [0, 1].
struct RawFrame {
    Image data;               // h x w, single channel
    double exposure = 1.0;    // relative exposure time
    SensorConfig sensor{};
};

/// S(dt * analog): scale, round, add black level, clamp to [b, c].
DnImage quantize(const Image& analog, double exposure, const SensorConfig& sensor);
std::uint16_t quantize_value(double analog, double exposure, const SensorConfig& sensor);

/// (dn - b) / (c - b). Throws ValidationError on samples outside [b, c].
Image normalize(const DnImage& raw, const SensorConfig& sensor);

double noise_std(double y, double alpha, double beta);

/// m * y / sqrt(alpha * y + beta), zero where masked or where the denominator vanishes.
Image snr_map(const Image& y, const Image& mask, double alpha, double beta);

inline constexpr double kDefaultSaturationThreshold = 0.98;

/// 0 where y >= threshold, 1 elsewhere.
Image saturation_mask(const Image& y, double threshold = kDefaultSaturationThreshold);

/// y + N(0, alpha*y + beta), with a counter-based generator keyed on (seed, frame, pixel).
Image add_noise(const Image& y, double alpha, double beta, std::uint64_t seed, std::uint64_t frame);

/// Standard normal draw addressed by (seed, frame, index). Exposed for reproducibility tests.
double counter_normal(std::uint64_t seed, std::uint64_t frame, std::uint64_t index);

} // namespace rawburst
