#pragma once

#include "rawburst/model/warp.hpp"
#include "rawburst/util/image.hpp"

#include <vector>

namespace rawburst {

/// Returned by psnr()/mu_psnr() for identical inputs.
inline constexpr double kPsnrSentinel = 100.0;

/// 10 log10(peak^2 / MSE). A non-positive peak means "max of the reference".
double psnr(const Image& reference, const Image& test, double peak = 0.0);

inline constexpr double kDefaultMu = 5000.0;

/// log(1 + mu v / peak) / log(1 + mu), negative inputs clamped to 0.
double mu_law(double v, double peak, double mu = kDefaultMu);

/// PSNR (peak 1) after mu-law compression of both images with the reference's peak.
double mu_psnr(const Image& reference, const Image& test, double mu = kDefaultMu);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, valid
/// windows only, averaged over channels. Data range defaults to the reference's max.
double ssim(const Image& reference, const Image& test, double data_range = 0.0);

/// Mean over the four image corners of |est(c) - gt(c)|, in the fields' pixel units.
/// Corners sit on the outer pixel edges: (-0.5, -0.5) ... (w - 0.5, h - 0.5).
double geometric_error(const AffineWarpField& estimate, const AffineWarpField& truth);

struct ErrorSummary {
    double mean = 0.0;
    double median = 0.0;
    int count = 0;
};

ErrorSummary summarize(std::vector<double> values);

/// geometric_error per frame, skipping the reference frame (identity by construction).
std::vector<double> frame_errors(const std::vector<AffineWarpField>& estimates,
                                 const std::vector<AffineWarpField>& truth, int reference);

} // namespace rawburst
