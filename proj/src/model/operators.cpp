#include "rawburst/model/operators.hpp"

#include "rawburst/util/errors.hpp"

#include <cmath>

namespace rawburst {

void BurstMeta::validate() const {
    require(frame_count >= 1, "burst: need at least one frame");
    require(static_cast<int>(exposures.size()) == frame_count, "burst: one exposure per frame required");
    for (double dt : exposures) require(dt > 0.0 && std::isfinite(dt), "burst: exposures must be > 0");
    require(reference >= 0 && reference < frame_count, "burst: reference index out of range");
    require(scale >= 1, "burst: super-resolution factor must be >= 1");
}

Image blur_apply(const Image& x, int scale) {
    require(scale >= 1, "blur: scale must be >= 1");
    if (scale == 1) return x;
    const int h = x.height(), w = x.width(), nc = x.channels();
    const double norm = 1.0 / (scale * scale);
    Image out(h, w, nc);
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int c = 0; c < nc; ++c) {
                double acc = 0.0;
                for (int a = 0; a < scale; ++a) {
                    const int yy = reflect_index(y + a, h);
                    for (int b = 0; b < scale; ++b) acc += x(yy, reflect_index(xx + b, w), c);
                }
                out(y, xx, c) = acc * norm;
            }
    return out;
}

Image blur_adjoint(const Image& r, int scale) {
    require(scale >= 1, "blur: scale must be >= 1");
    if (scale == 1) return r;
    const int h = r.height(), w = r.width(), nc = r.channels();
    const double norm = 1.0 / (scale * scale);
    Image out(h, w, nc);
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int c = 0; c < nc; ++c) {
                const double v = r(y, xx, c) * norm;
                for (int a = 0; a < scale; ++a) {
                    const int yy = reflect_index(y + a, h);
                    for (int b = 0; b < scale; ++b) out(yy, reflect_index(xx + b, w), c) += v;
                }
            }
    return out;
}

Image decimate(const Image& x, int scale) {
    require(scale >= 1, "decimate: scale must be >= 1");
    if (scale == 1) return x;
    const int h = (x.height() + scale - 1) / scale, w = (x.width() + scale - 1) / scale;
    Image out(h, w, x.channels());
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int c = 0; c < x.channels(); ++c) out(y, xx, c) = x(y * scale, xx * scale, c);
    return out;
}

Image decimate_adjoint(const Image& r, int scale, int height, int width) {
    require(scale >= 1, "decimate: scale must be >= 1");
    require((height + scale - 1) / scale == r.height() && (width + scale - 1) / scale == r.width(),
            "decimate_adjoint: size mismatch");
    Image out(height, width, r.channels());
    for (int y = 0; y < r.height(); ++y)
        for (int xx = 0; xx < r.width(); ++xx)
            for (int c = 0; c < r.channels(); ++c) out(y * scale, xx * scale, c) = r(y, xx, c);
    return out;
}

Image cfa_apply(const Image& rgb, const BayerPattern& pattern) {
    require(rgb.channels() == 3, "cfa_apply: expects 3 channels");
    Image out(rgb.height(), rgb.width(), 1);
    for (int y = 0; y < rgb.height(); ++y)
        for (int x = 0; x < rgb.width(); ++x) out(y, x) = rgb(y, x, pattern.channel_at(y, x));
    return out;
}

Image cfa_adjoint(const Image& mosaic, const BayerPattern& pattern) {
    require(mosaic.channels() == 1, "cfa_adjoint: expects a mosaic");
    Image out(mosaic.height(), mosaic.width(), 3);
    for (int y = 0; y < mosaic.height(); ++y)
        for (int x = 0; x < mosaic.width(); ++x) out(y, x, pattern.channel_at(y, x)) = mosaic(y, x);
    return out;
}

namespace {

void check_frame(int k, const BurstMeta& meta, const std::vector<AffineWarpField>& fields) {
    meta.validate();
    require(k >= 0 && k < meta.frame_count, "forward_A: frame index out of range");
    require(static_cast<int>(fields.size()) == meta.frame_count, "forward_A: one warp field per frame required");
}

} // namespace

Image forward_A(const Image& x, int k, const BurstMeta& meta, const std::vector<AffineWarpField>& fields,
                const BayerPattern& pattern) {
    check_frame(k, meta, fields);
    const int s = meta.scale;
    require(x.channels() == 3 && x.height() % s == 0 && x.width() % s == 0,
            "forward_A: x must be (s*h) x (s*w) x 3");
    require(fields[k].height() == x.height() && fields[k].width() == x.width(),
            "forward_A: warp field does not cover x");
    Image warped = warp_apply(x, fields[k]).image;
    Image lr = decimate(blur_apply(warped, s), s);
    return cfa_apply(lr, pattern) * meta.exposures[k];
}

Image adjoint_A(const Image& r, int k, const BurstMeta& meta, const std::vector<AffineWarpField>& fields,
                const BayerPattern& pattern) {
    check_frame(k, meta, fields);
    const int s = meta.scale;
    require(r.channels() == 1, "adjoint_A: expects a mosaic");
    const int hh = r.height() * s, hw = r.width() * s;
    require(fields[k].height() == hh && fields[k].width() == hw, "adjoint_A: warp field does not match");
    Image rgb = cfa_adjoint(r, pattern);
    Image up = blur_adjoint(decimate_adjoint(rgb, s, hh, hw), s);
    return warp_adjoint(up, fields[k], hh, hw) * meta.exposures[k];
}

FrameOperator::FrameOperator(int lr_height, int lr_width, int scale, double exposure, BayerPattern pattern,
                             AffineWarpField field)
    : lr_height_(lr_height), lr_width_(lr_width), scale_(scale), exposure_(exposure), pattern_(pattern),
      field_(std::move(field)) {
    require(lr_height > 0 && lr_width > 0 && scale >= 1, "FrameOperator: invalid dimensions");
    require(exposure > 0.0, "FrameOperator: exposure must be > 0");
    require(field_.height() == hr_height() && field_.width() == hr_width(),
            "FrameOperator: warp field does not cover the high-resolution grid");
    field_.validate();
    const Image ones(hr_height(), hr_width(), 1, 1.0);
    const Image valid_hr = warp_apply(ones, field_).validity;
    validity_ = Image(lr_height, lr_width, 1);
    for (int i = 0; i < lr_height; ++i)
        for (int j = 0; j < lr_width; ++j) {
            double v = 1.0;
            for (int a = 0; a < scale; ++a)
                for (int b = 0; b < scale; ++b) v = std::min(v, valid_hr(i * scale + a, j * scale + b));
            validity_(i, j) = v;
        }

    // Bilinear taps with zero padding, as in sample_bilinear.
    const int hh = hr_height(), hw = hr_width();
    const bool ident = field_.is_identity();
    tap_start_.reserve(static_cast<std::size_t>(lr_height) * lr_width + 1);
    tap_start_.push_back(0);
    for (int i = 0; i < lr_height; ++i)
        for (int j = 0; j < lr_width; ++j) {
            const int c = pattern_.channel_at(i, j);
            for (int a = 0; a < scale; ++a)
                for (int b = 0; b < scale; ++b) {
                    const int y = i * scale + a, xx = j * scale + b;
                    if (ident) {
                        tap_index_.push_back((static_cast<std::size_t>(y) * hw + xx) * 3 + c);
                        tap_weight_.push_back(1.0);
                        continue;
                    }
                    const Point p = field_.at(y, xx).apply({static_cast<double>(xx), static_cast<double>(y)});
                    const double fx0 = std::floor(p.x), fy0 = std::floor(p.y);
                    if (!(fx0 > -2.0 && fy0 > -2.0 && fx0 < hw && fy0 < hh)) continue;
                    const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
                    const double ax = p.x - fx0, ay = p.y - fy0;
                    const double wx[2] = {1.0 - ax, ax};
                    const double wy[2] = {1.0 - ay, ay};
                    for (int dy = 0; dy < 2; ++dy) {
                        const int yy = y0 + dy;
                        if (wy[dy] == 0.0 || yy < 0 || yy >= hh) continue;
                        for (int dx = 0; dx < 2; ++dx) {
                            const int xs = x0 + dx;
                            if (wx[dx] == 0.0 || xs < 0 || xs >= hw) continue;
                            tap_index_.push_back((static_cast<std::size_t>(yy) * hw + xs) * 3 + c);
                            tap_weight_.push_back(wy[dy] * wx[dx]);
                        }
                    }
                }
            tap_start_.push_back(tap_index_.size());
        }
}

// The composite C D_s B W is stored as a sparse gather: B and D fuse into a block mean (the
// low-resolution grid tiles the high-resolution one exactly, so reflection never triggers) and
// the warp is evaluated only for the channel the CFA keeps.
Image FrameOperator::apply(const Image& x) const {
    require(x.height() == hr_height() && x.width() == hr_width() && x.channels() == 3,
            "FrameOperator::apply: x has the wrong shape");
    Image out(lr_height_, lr_width_, 1);
    const double norm = exposure_ / (scale_ * scale_);
    const double* src = x.data();
    double* dst = out.data();
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t t = tap_start_[i]; t < tap_start_[i + 1]; ++t) acc += tap_weight_[t] * src[tap_index_[t]];
        dst[i] = acc * norm;
    }
    return out;
}

Image FrameOperator::adjoint(const Image& r) const {
    Image out(hr_height(), hr_width(), 3);
    adjoint_accumulate(r, out);
    return out;
}

void FrameOperator::adjoint_accumulate(const Image& r, Image& out) const {
    require(r.height() == lr_height_ && r.width() == lr_width_ && r.channels() == 1,
            "FrameOperator::adjoint: residual has the wrong shape");
    require(out.height() == hr_height() && out.width() == hr_width() && out.channels() == 3,
            "FrameOperator::adjoint: output has the wrong shape");
    const double norm = exposure_ / (scale_ * scale_);
    const double* src = r.data();
    double* dst = out.data();
    const std::size_t n = r.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = src[i] * norm;
        if (v == 0.0) continue;
        for (std::size_t t = tap_start_[i]; t < tap_start_[i + 1]; ++t) dst[tap_index_[t]] += tap_weight_[t] * v;
    }
}

} // namespace rawburst
