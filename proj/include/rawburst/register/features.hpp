#pragma once

#include "rawburst/model/sensor.hpp"
#include "rawburst/util/image.hpp"

#include <memory>
#include <string>

namespace rawburst {

/// Single-channel feature map at half the mosaic resolution. `mask` is 1 where the
/// value may be used for matching (unsaturated), 0 elsewhere.
struct FeatureMap {
    Image values;
    Image mask;
};

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual FeatureMap extract(const RawFrame& frame) const = 0;
    virtual std::string name() const = 0;
};

/// 2x2 Bayer-block mean divided by the mean over unsaturated blocks. A block is
/// saturated when any of its four samples reaches the threshold.
class PlainLuma : public FeatureExtractor {
public:
    explicit PlainLuma(double saturation_threshold = kDefaultSaturationThreshold) : threshold_(saturation_threshold) {}
    FeatureMap extract(const RawFrame& frame) const override;
    std::string name() const override { return "plain"; }

private:
    double threshold_;
};

/// Median threshold bitmap of the block-mean image (scaled to a unit maximum), centred as
/// bitmap - 0.5 with pixels near the median set to 0 and masked out.
class MtbFeature : public FeatureExtractor {
public:
    explicit MtbFeature(double exclusion = 4.0 / 255.0) : exclusion_(exclusion) {}
    FeatureMap extract(const RawFrame& frame) const override;
    std::string name() const override { return "mtb"; }

private:
    double exclusion_;
};

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& name);

struct Bitmap {
    Image bits;      // 1 where value > median, else 0
    Image excluded;  // 1 where |value - median| <= exclusion
    double median = 0.0;
};

Bitmap mtb(const Image& gray, double exclusion = 4.0 / 255.0);

/// Mean of each 2x2 block of a single-channel mosaic (odd trailing row/column dropped).
Image block_mean(const Image& mosaic);

/// Median of all samples (mean of the two middle ones for even counts).
double median_value(const Image& img);

} // namespace rawburst
