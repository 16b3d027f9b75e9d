#include "rawburst/merge/hdr.hpp"

#include "rawburst/util/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rawburst {

WarpResult align_to_reference(const Image& frame, const AffineWarpField& hr_field, int scale) {
    require(scale >= 1, "align_to_reference: scale must be positive");
    require(hr_field.height() == frame.height() * scale && hr_field.width() == frame.width() * scale,
            "align_to_reference: field does not match the frame size");
    const int h = frame.height(), w = frame.width(), ch = frame.channels();
    WarpResult out{Image(h, w, ch), Image(h, w, 1)};
    const double half = 0.5 * (scale - 1);
    auto clamp_to = [](double v, int n) { return std::clamp(static_cast<int>(std::floor(v)), 0, n - 1); };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Point ref{scale * x + half, scale * y + half};
            // The field is tiled on the frame domain; pick the tile at the reference
            // position, then re-pick at the first estimate of the frame position.
            Point p = hr_field.at(clamp_to(ref.y, hr_field.height()), clamp_to(ref.x, hr_field.width()))
                          .inverse()
                          .apply(ref);
            p = hr_field.at(clamp_to(p.y, hr_field.height()), clamp_to(p.x, hr_field.width())).inverse().apply(ref);
            const double fx = (p.x - half) / scale, fy = (p.y - half) / scale;
            const bool inside = fx >= 0.0 && fy >= 0.0 && fx <= w - 1 && fy <= h - 1;
            out.validity(y, x) = inside ? 1.0 : 0.0;
            for (int c = 0; c < ch; ++c) out.image(y, x, c) = sample_bilinear(frame, fx, fy, c);
        }
    return out;
}

Image hdr_merge_bracket(const std::vector<Image>& frames, const std::vector<double>& exposures,
                        const std::vector<Image>& masks, double alpha, double beta) {
    require(!frames.empty(), "hdr_merge_bracket: no frames");
    require(exposures.size() == frames.size() && masks.size() == frames.size(),
            "hdr_merge_bracket: frames, exposures and masks differ in length");
    require(alpha >= 0.0 && beta > 0.0, "hdr_merge_bracket: need alpha >= 0 and beta > 0");
    const Image& first = frames.front();
    std::size_t shortest = 0;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        require(frames[k].same_shape(first), "hdr_merge_bracket: frame shapes differ");
        require(exposures[k] > 0.0 && std::isfinite(exposures[k]), "hdr_merge_bracket: exposures must be positive");
        const Image& m = masks[k];
        require(m.height() == first.height() && m.width() == first.width() &&
                    (m.channels() == 1 || m.channels() == first.channels()),
                "hdr_merge_bracket: mask shape does not match frame");
        if (exposures[k] < exposures[shortest]) shortest = k;
    }

    const int h = first.height(), w = first.width(), ch = first.channels();
    Image out(h, w, ch);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double num = 0.0, den = 0.0;
                for (std::size_t k = 0; k < frames.size(); ++k) {
                    const Image& m = masks[k];
                    const double mk = m(y, x, m.channels() == 1 ? 0 : c);
                    if (mk <= 0.0) continue;
                    const double yk = frames[k](y, x, c), dt = exposures[k];
                    const double variance = (alpha * std::max(yk, 0.0) + beta) / (dt * dt);
                    num += mk * (yk / dt) / variance;
                    den += mk / variance;
                }
                out(y, x, c) = den > 0.0 ? num / den : frames[shortest](y, x, c) / exposures[shortest];
            }
    return out;
}

std::vector<int> select_nearest_ev(const std::vector<double>& frame_evs, const std::vector<double>& targets) {
    require(targets.size() <= frame_evs.size(), "select_nearest_ev: more targets than frames");
    std::vector<bool> used(frame_evs.size(), false);
    std::vector<int> chosen;
    for (double t : targets) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < frame_evs.size(); ++i) {
            const double d = std::abs(frame_evs[i] - t);
            if (!used[i] && d < best_d) {
                best = static_cast<int>(i);
                best_d = d;
            }
        }
        used[best] = true;
        chosen.push_back(best);
    }
    return chosen;
}

} // namespace rawburst
