#include "rawburst/model/sensor.hpp"

#include "rawburst/util/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rawburst {

BayerPattern::BayerPattern(BayerLayout layout) : layout_(layout) {
    switch (layout) {
    case BayerLayout::RGGB: tile_[0] = 0; tile_[1] = 1; tile_[2] = 1; tile_[3] = 2; break;
    case BayerLayout::BGGR: tile_[0] = 2; tile_[1] = 1; tile_[2] = 1; tile_[3] = 0; break;
    case BayerLayout::GRBG: tile_[0] = 1; tile_[1] = 0; tile_[2] = 2; tile_[3] = 1; break;
    case BayerLayout::GBRG: tile_[0] = 1; tile_[1] = 2; tile_[2] = 0; tile_[3] = 1; break;
    }
}

std::string BayerPattern::name() const {
    switch (layout_) {
    case BayerLayout::RGGB: return "RGGB";
    case BayerLayout::BGGR: return "BGGR";
    case BayerLayout::GRBG: return "GRBG";
    case BayerLayout::GBRG: return "GBRG";
    }
    return "RGGB";
}

BayerPattern BayerPattern::parse(const std::string& name) {
    for (BayerLayout l : all_layouts()) {
        BayerPattern p(l);
        if (p.name() == name) return p;
    }
    throw ValidationError("unknown Bayer pattern '" + name + "'");
}

std::vector<BayerLayout> BayerPattern::all_layouts() {
    return {BayerLayout::RGGB, BayerLayout::BGGR, BayerLayout::GRBG, BayerLayout::GBRG};
}

void SensorConfig::validate() const {
    require(bit_depth >= 8 && bit_depth <= 16, "sensor: bit depth must be in [8, 16]");
    require(black_level >= 0 && black_level < white_level && white_level <= max_dn(),
            "sensor: need 0 <= black_level < white_level <= 2^q - 1");
    require(alpha >= 0.0 && std::isfinite(alpha), "sensor: alpha must be >= 0");
    require(beta >= 0.0 && std::isfinite(beta), "sensor: beta must be >= 0");
}

std::uint16_t quantize_value(double analog, double exposure, const SensorConfig& sensor) {
    // Full scale is (c - b) so that normalize() inverts this exactly up to rounding.
    const double range = sensor.white_level - sensor.black_level;
    const double v = std::round(exposure * analog * range);
    const double dn = std::clamp(v + sensor.black_level, static_cast<double>(sensor.black_level),
                                 static_cast<double>(sensor.white_level));
    return static_cast<std::uint16_t>(dn);
}

DnImage quantize(const Image& analog, double exposure, const SensorConfig& sensor) {
    require(analog.channels() == 1, "quantize: expects a single-channel mosaic");
    DnImage out{analog.height(), analog.width(), {}};
    out.data.resize(analog.size());
    const double* src = analog.data();
    for (std::size_t i = 0; i < analog.size(); ++i) out.data[i] = quantize_value(src[i], exposure, sensor);
    return out;
}

Image normalize(const DnImage& raw, const SensorConfig& sensor) {
    Image out(raw.height, raw.width, 1);
    const double b = sensor.black_level;
    const double range = sensor.white_level - sensor.black_level;
    double* dst = out.data();
    for (std::size_t i = 0; i < raw.data.size(); ++i) {
        const int dn = raw.data[i];
        if (dn < sensor.black_level || dn > sensor.white_level)
            throw ValidationError("normalize: DN " + std::to_string(dn) + " outside [black, white]");
        dst[i] = (dn - b) / range;
    }
    return out;
}

double noise_std(double y, double alpha, double beta) {
    return std::sqrt(std::max(0.0, alpha * y + beta));
}

Image snr_map(const Image& y, const Image& mask, double alpha, double beta) {
    require(y.same_shape(mask), "snr_map: mask shape mismatch");
    Image out(y.height(), y.width(), y.channels());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double m = mask.data()[i];
        const double v = y.data()[i];
        const double s = noise_std(v, alpha, beta);
        out.data()[i] = (m == 0.0 || s == 0.0) ? 0.0 : m * v / s;
    }
    return out;
}

Image saturation_mask(const Image& y, double threshold) {
    require(threshold > 0.0 && threshold <= 1.0, "saturation_mask: threshold must be in (0, 1]");
    Image out(y.height(), y.width(), y.channels());
    for (std::size_t i = 0; i < y.size(); ++i) out.data()[i] = y.data()[i] >= threshold ? 0.0 : 1.0;
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double to_unit_open(std::uint64_t bits) {
    // 53 random bits mapped to (0, 1).
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace

double counter_normal(std::uint64_t seed, std::uint64_t frame, std::uint64_t index) {
    const std::uint64_t key = splitmix64(splitmix64(seed) ^ splitmix64(frame + 0x632be59bd9b4e019ULL));
    const std::uint64_t h1 = splitmix64(key ^ (2 * index));
    const std::uint64_t h2 = splitmix64(key ^ (2 * index + 1));
    const double u1 = to_unit_open(h1);
    const double u2 = to_unit_open(h2);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Image add_noise(const Image& y, double alpha, double beta, std::uint64_t seed, std::uint64_t frame) {
    require(alpha >= 0.0 && beta >= 0.0, "add_noise: alpha and beta must be >= 0");
    Image out = y;
    if (alpha == 0.0 && beta == 0.0) return out;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = y.data()[i];
        out.data()[i] = v + noise_std(v, alpha, beta) * counter_normal(seed, frame, i);
    }
    return out;
}

} // namespace rawburst
