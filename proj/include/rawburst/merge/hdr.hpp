#pragma once

#include "rawburst/model/warp.hpp"
#include "rawburst/util/image.hpp"

#include <vector>

namespace rawburst {

/// Resample a low-resolution frame onto the reference low-resolution grid, given the
/// frame -> reference field in high-resolution units. Zero padding; `validity` marks
/// samples that landed inside the frame.
WarpResult align_to_reference(const Image& frame, const AffineWarpField& hr_field, int scale);

/// Inverse-variance merge of aligned linear frames. Frame k estimates y_k / dt_k with
/// variance (alpha y_k + beta) / dt_k^2. `masks` are 0/1, single-channel or matching the
/// frames; pixels masked in every frame take the shortest exposure's estimate.
Image hdr_merge_bracket(const std::vector<Image>& frames, const std::vector<double>& exposures,
                        const std::vector<Image>& masks, double alpha, double beta);

/// For each target EV, the index of the closest not-yet-chosen frame (ties go to the
/// lower index). Throws when there are more targets than frames.
std::vector<int> select_nearest_ev(const std::vector<double>& frame_evs, const std::vector<double>& targets);

} // namespace rawburst
