#include "rawburst/model/burst.hpp"

#include "rawburst/util/errors.hpp"

namespace rawburst {

void Burst::validate() const {
    require(!frames.empty(), "burst: no frames");
    meta.validate();
    require(static_cast<int>(frames.size()) == meta.frame_count, "burst: frame count does not match metadata");
    const int h = frames.front().data.height(), w = frames.front().data.width();
    require(h > 0 && w > 0 && h % 2 == 0 && w % 2 == 0, "burst: frames must have even, non-zero dimensions");
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const RawFrame& f = frames[k];
        require(f.data.height() == h && f.data.width() == w && f.data.channels() == 1,
                "burst: frame " + std::to_string(k) + " has a different shape");
        require(f.exposure == meta.exposures[k], "burst: frame exposure disagrees with metadata");
        require(f.sensor.pattern.layout() == pattern().layout(), "burst: mixed Bayer layouts");
        f.sensor.validate();
    }
}

} // namespace rawburst
