#pragma once

#include "rawburst/model/sensor.hpp"
#include "rawburst/util/image.hpp"

#include <string>

namespace rawburst {

/// Per-channel bilinear interpolation from same-channel neighbours; measured samples
/// are kept as is. Borders are mirrored, which preserves the Bayer phase.
Image demosaic_bilinear(const Image& raw, const BayerPattern& pattern);

/// 5x5 gradient-corrected linear filters (coefficients in eighths), mirrored borders.
Image demosaic_malvar(const Image& raw, const BayerPattern& pattern);

Image demosaic(const Image& raw, const BayerPattern& pattern, const std::string& method);

} // namespace rawburst
