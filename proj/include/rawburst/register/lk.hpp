#pragma once

#include "rawburst/model/warp.hpp"
#include "rawburst/util/image.hpp"

namespace rawburst {

struct LkRegion {
    int y0 = 0, y1 = 0, x0 = 0, x1 = 0;  // half-open, template coordinates
};

struct LkDiagnostics {
    int iterations = 0;          // Gauss-Newton iterations run
    int accepted = 0;            // iterations whose (possibly halved) step lowered the objective
    double increment_norm = 0;   // norm of the last proposed increment, in pixels at the region's corners
    double first_increment = 0;  // same, for the first iteration
    double residual = 0;         // final RMS residual over valid samples
    int samples = 0;             // valid samples at the final estimate
    bool singular = false;       // normal matrix unusable; the init was returned
};

struct LkResult {
    Affine warp;
    LkDiagnostics diag;
};

/// Forward-additive Lucas-Kanade for an affine map p minimizing
///   1/2 sum_u (mov(W_p(u)) - ref(u))^2
/// over template pixels u in `region` where ref_mask(u) = 1 and W_p(u) lands on usable
/// mov samples. Runs exactly `iters` iterations; a step that raises the mean squared
/// residual is halved up to 4 times and dropped if it still does not help.
LkResult lk_affine(const Image& ref, const Image& ref_mask, const Image& mov, const Image& mov_mask, const Affine& init,
                   int iters, const LkRegion& region);

/// Whole-image convenience overload with all samples usable.
LkResult lk_affine(const Image& ref, const Image& mov, const Affine& init, int iters);

} // namespace rawburst
