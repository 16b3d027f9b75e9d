#pragma once

#include "rawburst/model/operators.hpp"
#include "rawburst/model/sensor.hpp"

#include <vector>

namespace rawburst {

/// A registered-or-not set of raw frames sharing one sensor layout.
struct Burst {
    std::vector<RawFrame> frames;
    BurstMeta meta;

    const BayerPattern& pattern() const { return frames.front().sensor.pattern; }
    int lr_height() const { return frames.front().data.height(); }
    int lr_width() const { return frames.front().data.width(); }
    int hr_height() const { return lr_height() * meta.scale; }
    int hr_width() const { return lr_width() * meta.scale; }

    /// Throws ValidationError on inconsistent sizes, odd dimensions or bad metadata.
    void validate() const;
};

} // namespace rawburst
