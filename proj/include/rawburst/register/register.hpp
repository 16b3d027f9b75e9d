#pragma once

#include "rawburst/model/burst.hpp"
#include "rawburst/model/warp.hpp"
#include "rawburst/register/features.hpp"
#include "rawburst/register/lk.hpp"

#include <vector>

namespace rawburst {

struct RegistrationConfig {
    int levels = 4;
    int iters_per_level = 3;
    int tile_size = 200;              // high-resolution pixels
    bool phase_correlation = true;    // global translation init
    bool mtb_init = true;             // phase correlation on MTB features instead of the LK features
    bool lucas_kanade = true;         // pyramid + tile refinement
};

struct TileDiagnostics {
    int frame = 0;
    int tile_y = 0;
    int tile_x = 0;
    LkDiagnostics lk;
};

struct FrameDiagnostics {
    int frame = 0;
    bool no_signal = false;        // features carried no signal; identity returned
    double relative_gain = 1.0;    // reference / frame, from co-located unsaturated samples
    Affine init;                   // phase-correlation init, feature units
    Affine global;                 // pyramid result before tiling, feature units
};

struct RegistrationResult {
    std::vector<AffineWarpField> fields;  // high-resolution units, frame -> reference
    std::vector<FrameDiagnostics> frames;
    std::vector<TileDiagnostics> tiles;   // frame-then-tile order
};

/// Pair of frames clipped at a common scene level, so that saturation looks the same in
/// both. `gain` maps frame values onto reference values.
struct HarmonizedPair {
    RawFrame reference;
    RawFrame frame;
    double gain = 1.0;
    bool ok = true;  // false when no sample is unsaturated in both frames
};

HarmonizedPair harmonize(const RawFrame& reference, const RawFrame& frame,
                         double threshold = kDefaultSaturationThreshold);

/// Feature-map coordinates (half mosaic resolution) to high-resolution pixel units.
Affine feature_to_hr(const Affine& a, int scale);
Affine hr_to_feature(const Affine& a, int scale);

/// Align every frame of the burst on the reference frame.
RegistrationResult register_burst(const Burst& burst, const FeatureExtractor& extractor,
                                  const RegistrationConfig& config = {});

/// One per-tile LK pass at full feature resolution aligning `frame` on a reference rendered at
/// the frame's exposure, starting from `current`. Returns `current` when the pair has no usable overlap.
AffineWarpField refine_field(const RawFrame& rendered_reference, const RawFrame& frame, const AffineWarpField& current,
                             int scale, const FeatureExtractor& extractor, int iterations);

} // namespace rawburst
