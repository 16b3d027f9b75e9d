#pragma once

#include "rawburst/model/sensor.hpp"
#include "rawburst/model/warp.hpp"
#include "rawburst/util/image.hpp"

#include <vector>

namespace rawburst {

struct BurstMeta {
    int frame_count = 1;
    std::vector<double> exposures{1.0};
    int reference = 0;  // zero-based index of the reference frame
    int scale = 1;      // super-resolution factor s

    void validate() const;
};

// Pixel-area integration: s x s box with taps at offsets [0, s) and reflective borders.
// Combined with decimate() at phase (0, 0), low-resolution pixel i integrates high-resolution
// pixels [s*i, s*i + s), i.e. it is centered at s*i + (s - 1) / 2.
Image blur_apply(const Image& x, int scale);
Image blur_adjoint(const Image& r, int scale);

Image decimate(const Image& x, int scale);
/// Zero insertion into an image of `height` x `width`.
Image decimate_adjoint(const Image& r, int scale, int height, int width);

/// Select the channel named by the pattern at each site.
Image cfa_apply(const Image& rgb, const BayerPattern& pattern);
/// Scatter each mosaic sample into its channel, zeros elsewhere.
Image cfa_adjoint(const Image& mosaic, const BayerPattern& pattern);

/// Center of low-resolution pixel `i` in high-resolution coordinates.
inline double lr_to_hr(double i, int scale) { return scale * i + 0.5 * (scale - 1); }

/// a_k = dt_k C D_s B W_k x for a single frame.
class FrameOperator {
public:
    FrameOperator(int lr_height, int lr_width, int scale, double exposure, BayerPattern pattern,
                  AffineWarpField field);

    Image apply(const Image& x) const;
    Image adjoint(const Image& r) const;
    /// out += adjoint(r), without a temporary.
    void adjoint_accumulate(const Image& r, Image& out) const;

    /// 1 at low-resolution sites whose whole footprint is covered by in-bounds warp samples.
    const Image& validity() const { return validity_; }

    int lr_height() const { return lr_height_; }
    int lr_width() const { return lr_width_; }
    int hr_height() const { return lr_height_ * scale_; }
    int hr_width() const { return lr_width_ * scale_; }
    int scale() const { return scale_; }
    double exposure() const { return exposure_; }
    const AffineWarpField& field() const { return field_; }
    const BayerPattern& pattern() const { return pattern_; }

private:
    int lr_height_;
    int lr_width_;
    int scale_;
    double exposure_;
    BayerPattern pattern_;
    AffineWarpField field_;
    Image validity_;
    // Sparse rows of the operator without the exposure/area factor: low-resolution pixel i
    // reads x.data()[tap_index_[t]] * tap_weight_[t] for t in [tap_start_[i], tap_start_[i + 1]).
    std::vector<std::size_t> tap_start_;
    std::vector<std::size_t> tap_index_;
    std::vector<double> tap_weight_;
};

Image forward_A(const Image& x, int k, const BurstMeta& meta, const std::vector<AffineWarpField>& fields,
                const BayerPattern& pattern);
Image adjoint_A(const Image& r, int k, const BurstMeta& meta, const std::vector<AffineWarpField>& fields,
                const BayerPattern& pattern);

} // namespace rawburst
