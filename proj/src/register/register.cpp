#include "rawburst/register/register.hpp"

#include "rawburst/register/phase_correlation.hpp"
#include "rawburst/register/pyramid.hpp"
#include "rawburst/util/errors.hpp"
#include "rawburst/util/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace rawburst {

Affine feature_to_hr(const Affine& a, int scale) { return a.change_of_units(2.0 * scale, scale - 0.5); }

Affine hr_to_feature(const Affine& a, int scale) {
    return a.change_of_units(1.0 / (2.0 * scale), -(scale - 0.5) / (2.0 * scale));
}

HarmonizedPair harmonize(const RawFrame& reference, const RawFrame& frame, double threshold) {
    require(reference.data.same_shape(frame.data), "harmonize: frame sizes differ");
    HarmonizedPair out{reference, frame, 1.0, true};
    double sum_ref = 0.0, sum_frame = 0.0;
    for (std::size_t i = 0; i < reference.data.size(); ++i) {
        const double a = reference.data.values()[i], b = frame.data.values()[i];
        if (a < threshold && b < threshold) {
            sum_ref += a;
            sum_frame += b;
        }
    }
    if (!(sum_ref > 0.0) || !(sum_frame > 0.0)) {
        out.ok = false;
        return out;
    }
    out.gain = sum_ref / sum_frame;
    // Just under the threshold so the extractor does not flag the clipped samples.
    const double level_ref = (1.0 - 1e-3) * threshold * std::min(1.0, out.gain);
    const double level_frame = level_ref / out.gain;
    for (double& v : out.reference.data.values()) v = std::min(v, level_ref);
    for (double& v : out.frame.data.values()) v = std::min(v, level_frame);
    return out;
}

namespace {

// Feature rows/columns whose high-resolution centres fall in [lo, hi).
void feature_span(int lo, int hi, int scale, int limit, bool last, int& a, int& b) {
    const double step = 2.0 * scale, offset = scale - 0.5;
    a = std::clamp(static_cast<int>(std::ceil((lo - offset) / step)), 0, limit);
    b = last ? limit : std::clamp(static_cast<int>(std::ceil((hi - offset) / step)), 0, limit);
}

// Per-tile LK at full feature resolution; `init(ty, tx)` supplies each tile's start in feature units.
template <class Init>
void refine_tiles(int k, const Image& tmpl, const Image& tmpl_mask, const Image& image, const Image& image_mask,
                  int scale, int iterations, Init init, AffineWarpField& field, std::vector<TileDiagnostics>* tiles) {
    for (int ty = 0; ty < field.tiles_y(); ++ty)
        for (int tx = 0; tx < field.tiles_x(); ++tx) {
            int y0, y1, x0, x1;
            field.tile_bounds(ty, tx, y0, y1, x0, x1);
            LkRegion region;
            feature_span(y0, y1, scale, tmpl.height(), ty == field.tiles_y() - 1, region.y0, region.y1);
            feature_span(x0, x1, scale, tmpl.width(), tx == field.tiles_x() - 1, region.x0, region.x1);
            TileDiagnostics td;
            td.frame = k;
            td.tile_y = ty;
            td.tile_x = tx;
            Affine a = init(ty, tx);
            if (region.y0 < region.y1 && region.x0 < region.x1) {
                const LkResult r = lk_affine(tmpl, tmpl_mask, image, image_mask, a, iterations, region);
                a = r.warp;
                td.lk = r.diag;
            } else {
                td.lk.singular = true;
            }
            field.tile(ty, tx) = feature_to_hr(a, scale);
            if (tiles) tiles->push_back(td);
        }
}

struct FrameOutcome {
    AffineWarpField field;
    FrameDiagnostics diag;
    std::vector<TileDiagnostics> tiles;
};

FrameOutcome register_frame(int k, const Burst& burst, const FeatureExtractor& extractor,
                            const RegistrationConfig& config) {
    const int scale = burst.meta.scale;
    FrameOutcome out;
    out.diag.frame = k;
    out.field = AffineWarpField::identity(burst.hr_height(), burst.hr_width(), config.tile_size);

    const HarmonizedPair pair = harmonize(burst.frames[burst.meta.reference], burst.frames[k]);
    out.diag.relative_gain = pair.gain;
    const FeatureMap ref = extractor.extract(pair.reference);
    const FeatureMap mov = extractor.extract(pair.frame);
    require(all_finite(ref.values) && all_finite(mov.values),
            "register_burst: feature extractor produced non-finite values");

    Affine init = Affine::identity();
    if (config.phase_correlation) {
        try {
            // frame(u) ~ reference(u - d), so the frame -> reference map is u - d.
            Shift d;
            if (config.mtb_init) {
                const MtbFeature mtb_features;
                d = phase_correlate(mtb_features.extract(pair.reference).values, mtb_features.extract(pair.frame).values);
            } else {
                d = phase_correlate(fill_masked(ref.values, ref.mask), fill_masked(mov.values, mov.mask));
            }
            init = Affine::translation(-d.dx, -d.dy);
        } catch (const NoSignalError&) {
            out.diag.no_signal = true;
            return out;
        }
    }
    out.diag.init = init;
    out.diag.global = init;
    if (!config.lucas_kanade) {
        out.field.set_all(feature_to_hr(init, scale));
        return out;
    }

    // The frame is the LK template and the reference is sampled, so the estimate is the
    // frame -> reference map directly.
    const GaussianPyramid tmpl(mov.values, mov.mask, config.levels);
    const GaussianPyramid image(ref.values, ref.mask, config.levels);
    const int levels = std::min(tmpl.levels(), image.levels());
    Affine p = init;
    for (int l = 1; l < levels; ++l) p = GaussianPyramid::downscale_affine(p);
    for (int l = levels - 1; l >= 1; --l) {
        const Image& t = tmpl.image(l);
        const LkResult r = lk_affine(t, tmpl.mask(l), image.image(l), image.mask(l), p, config.iters_per_level,
                                     {0, t.height(), 0, t.width()});
        p = GaussianPyramid::upscale_affine(r.warp);
    }
    out.diag.global = p;

    refine_tiles(k, tmpl.image(0), tmpl.mask(0), image.image(0), image.mask(0), scale, config.iters_per_level,
                 [&](int, int) { return p; }, out.field, &out.tiles);
    return out;
}

} // namespace

RegistrationResult register_burst(const Burst& burst, const FeatureExtractor& extractor,
                                  const RegistrationConfig& config) {
    burst.validate();
    require(burst.meta.frame_count >= 2, "register_burst: need at least two frames");
    require(config.levels >= 1 && config.iters_per_level >= 0 && config.tile_size > 0,
            "register_burst: invalid configuration");
    const int K = burst.meta.frame_count, k0 = burst.meta.reference;
    const int hr_h = burst.hr_height(), hr_w = burst.hr_width();

    std::vector<FrameOutcome> outcomes(K);
    parallel_for(K, [&](int k) {
        if (k == k0) {
            outcomes[k].field = AffineWarpField::identity(hr_h, hr_w, config.tile_size);
            outcomes[k].diag.frame = k;
            return;
        }
        outcomes[k] = register_frame(k, burst, extractor, config);
    });

    RegistrationResult result;
    for (FrameOutcome& o : outcomes) {
        result.fields.push_back(std::move(o.field));
        result.frames.push_back(o.diag);
        result.tiles.insert(result.tiles.end(), o.tiles.begin(), o.tiles.end());
    }
    return result;
}

AffineWarpField refine_field(const RawFrame& rendered_reference, const RawFrame& frame, const AffineWarpField& current,
                             int scale, const FeatureExtractor& extractor, int iterations) {
    require(rendered_reference.data.same_shape(frame.data), "refine_field: frame sizes differ");
    require(current.height() == frame.data.height() * scale && current.width() == frame.data.width() * scale,
            "refine_field: field does not match the frame");
    const HarmonizedPair pair = harmonize(rendered_reference, frame);
    if (!pair.ok) return current;
    const FeatureMap ref = extractor.extract(pair.reference);
    const FeatureMap mov = extractor.extract(pair.frame);
    AffineWarpField out = current;
    refine_tiles(0, mov.values, mov.mask, ref.values, ref.mask, scale, iterations,
                 [&](int ty, int tx) { return hr_to_feature(current.tile(ty, tx), scale); }, out, nullptr);
    return out;
}

} // namespace rawburst
