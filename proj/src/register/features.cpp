#include "rawburst/register/features.hpp"

#include "rawburst/util/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rawburst {

Image block_mean(const Image& mosaic) {
    require(mosaic.channels() == 1, "block_mean: expects a single-channel mosaic");
    require(mosaic.height() >= 2 && mosaic.width() >= 2, "block_mean: mosaic smaller than one block");
    const int h = mosaic.height() / 2, w = mosaic.width() / 2;
    Image out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out(y, x) = 0.25 * (mosaic(2 * y, 2 * x) + mosaic(2 * y, 2 * x + 1) + mosaic(2 * y + 1, 2 * x) +
                                mosaic(2 * y + 1, 2 * x + 1));
    return out;
}

double median_value(const Image& img) {
    require(!img.empty(), "median_value: empty image");
    std::vector<double> v(img.values().begin(), img.values().end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    const double hi = v[mid];
    if (v.size() % 2) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lo + hi);
}

Bitmap mtb(const Image& gray, double exclusion) {
    require(gray.channels() == 1, "mtb: expects a single-channel image");
    Bitmap b;
    b.median = median_value(gray);
    b.bits = Image(gray.height(), gray.width());
    b.excluded = Image(gray.height(), gray.width());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        const double v = gray.values()[i];
        b.bits.values()[i] = v > b.median ? 1.0 : 0.0;
        b.excluded.values()[i] = std::abs(v - b.median) <= exclusion ? 1.0 : 0.0;
    }
    return b;
}

namespace {

Image block_saturation_mask(const Image& mosaic, double threshold) {
    const int h = mosaic.height() / 2, w = mosaic.width() / 2;
    Image mask(h, w, 1, 1.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (std::max({mosaic(2 * y, 2 * x), mosaic(2 * y, 2 * x + 1), mosaic(2 * y + 1, 2 * x),
                          mosaic(2 * y + 1, 2 * x + 1)}) >= threshold)
                mask(y, x) = 0.0;
    return mask;
}

} // namespace

FeatureMap PlainLuma::extract(const RawFrame& frame) const {
    FeatureMap f;
    f.values = block_mean(frame.data);
    f.mask = block_saturation_mask(frame.data, threshold_);
    double sum = 0.0;
    double count = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        sum += f.mask.values()[i] * f.values.values()[i];
        count += f.mask.values()[i];
    }
    const double mean = count > 0.0 ? sum / count : 0.0;
    if (mean > 0.0) f.values *= 1.0 / mean;
    else f.mask.fill(0.0);
    return f;
}

FeatureMap MtbFeature::extract(const RawFrame& frame) const {
    Image gray = block_mean(frame.data);
    const double peak = max_value(gray);
    if (peak > 0.0) gray *= 1.0 / peak;
    const Bitmap b = mtb(gray, exclusion_);
    FeatureMap f;
    f.values = Image(gray.height(), gray.width());
    f.mask = Image(gray.height(), gray.width());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        const bool keep = b.excluded.values()[i] == 0.0;
        f.values.values()[i] = keep ? b.bits.values()[i] - 0.5 : 0.0;
        f.mask.values()[i] = keep ? 1.0 : 0.0;
    }
    return f;
}

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& name) {
    if (name == "plain") return std::make_unique<PlainLuma>();
    if (name == "mtb") return std::make_unique<MtbFeature>();
    throw ValidationError("unknown feature extractor '" + name + "' (expected plain or mtb)");
}

} // namespace rawburst
