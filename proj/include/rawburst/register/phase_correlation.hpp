#pragma once

#include "rawburst/util/image.hpp"

namespace rawburst {

struct Shift {
    double dy = 0.0;
    double dx = 0.0;
};

/// Sub-pixel translation d such that mov(u) ~ ref(u - d), in pixels of the inputs.
/// Both inputs are mean-subtracted and Hann-windowed; the peak of the normalized
/// cross-power spectrum is refined with a 3x3 least-squares quadratic fit.
/// Throws NoSignalError when either input carries no energy.
Shift phase_correlate(const Image& ref, const Image& mov);

/// Replace masked-out samples with the mean of the kept ones, so they vanish after mean removal.
Image fill_masked(const Image& values, const Image& mask);

} // namespace rawburst
