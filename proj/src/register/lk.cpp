#include "rawburst/register/lk.hpp"

#include "rawburst/util/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rawburst {

namespace {

struct Gradients {
    Image gx, gy, usable;
};

// Central differences; a sample is usable when it and its four neighbours are unmasked.
Gradients gradients(const Image& img, const Image& mask) {
    const int h = img.height(), w = img.width();
    Gradients g{Image(h, w), Image(h, w), Image(h, w)};
    for (int y = 1; y + 1 < h; ++y)
        for (int x = 1; x + 1 < w; ++x) {
            g.gx(y, x) = 0.5 * (img(y, x + 1) - img(y, x - 1));
            g.gy(y, x) = 0.5 * (img(y + 1, x) - img(y - 1, x));
            const bool ok = mask(y, x) > 0 && mask(y, x - 1) > 0 && mask(y, x + 1) > 0 && mask(y - 1, x) > 0 &&
                            mask(y + 1, x) > 0;
            g.usable(y, x) = ok ? 1.0 : 0.0;
        }
    return g;
}

struct Frame {
    double cx, cy, scale;
};

struct Accum {
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
    double sse = 0.0;
    int n = 0;
    double mse() const { return n > 0 ? sse / n : std::numeric_limits<double>::infinity(); }
};

Accum accumulate(const Image& ref, const Image& ref_mask, const Image& mov, const Gradients& g, const Affine& p,
                 const LkRegion& r, const Frame& f, bool jacobian) {
    Accum acc;
    const int h = mov.height(), w = mov.width();
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) {
            if (ref_mask(y, x) <= 0.0) continue;
            const Point q = p.apply({static_cast<double>(x), static_cast<double>(y)});
            if (!(q.x >= 0.0 && q.y >= 0.0 && q.x <= w - 1 && q.y <= h - 1)) continue;
            const int qx0 = std::min(static_cast<int>(q.x), w - 1), qy0 = std::min(static_cast<int>(q.y), h - 1);
            const int qx1 = std::min(qx0 + 1, w - 1), qy1 = std::min(qy0 + 1, h - 1);
            if (g.usable(qy0, qx0) <= 0 || g.usable(qy0, qx1) <= 0 || g.usable(qy1, qx0) <= 0 || g.usable(qy1, qx1) <= 0)
                continue;
            const double ax = q.x - qx0, ay = q.y - qy0;
            auto lerp = [&](const Image& im) {
                return (1 - ay) * ((1 - ax) * im(qy0, qx0) + ax * im(qy0, qx1)) +
                       ay * ((1 - ax) * im(qy1, qx0) + ax * im(qy1, qx1));
            };
            const double res = lerp(mov) - ref(y, x);
            acc.sse += res * res;
            ++acc.n;
            if (!jacobian) continue;
            const double ix = lerp(g.gx), iy = lerp(g.gy);
            const double xt = (x - f.cx) / f.scale, yt = (y - f.cy) / f.scale;
            Eigen::Matrix<double, 6, 1> J;
            J << ix * xt, ix * yt, ix, iy * xt, iy * yt, iy;
            acc.H.selfadjointView<Eigen::Lower>().rankUpdate(J);
            acc.b += J * res;
        }
    acc.H = acc.H.selfadjointView<Eigen::Lower>();
    return acc;
}

Affine apply_increment(const Affine& p, const Eigen::Matrix<double, 6, 1>& d, const Frame& f) {
    Affine q = p;
    q.m[0] += d(0) / f.scale;
    q.m[1] += d(1) / f.scale;
    q.m[2] += d(2) - (d(0) * f.cx + d(1) * f.cy) / f.scale;
    q.m[3] += d(3) / f.scale;
    q.m[4] += d(4) / f.scale;
    q.m[5] += d(5) - (d(3) * f.cx + d(4) * f.cy) / f.scale;
    return q;
}

// Largest displacement the increment causes at the region's corners.
double corner_norm(const Eigen::Matrix<double, 6, 1>& d) {
    double best = 0.0;
    for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0})
            best = std::max(best, std::hypot(d(0) * sx + d(1) * sy + d(2), d(3) * sx + d(4) * sy + d(5)));
    return best;
}

} // namespace

LkResult lk_affine(const Image& ref, const Image& ref_mask, const Image& mov, const Image& mov_mask, const Affine& init,
                   int iters, const LkRegion& region) {
    require(ref.channels() == 1 && mov.channels() == 1, "lk_affine: expects single-channel feature maps");
    require(ref.same_shape(ref_mask) && mov.same_shape(mov_mask), "lk_affine: mask shape mismatch");
    require(iters >= 0, "lk_affine: iteration count must be non-negative");
    require(region.y0 >= 0 && region.x0 >= 0 && region.y1 <= ref.height() && region.x1 <= ref.width() &&
                region.y0 < region.y1 && region.x0 < region.x1,
            "lk_affine: region outside the template");
    require(all_finite(ref) && all_finite(mov), "lk_affine: feature maps must be finite");

    const Gradients g = gradients(mov, mov_mask);
    Frame f;
    f.cx = 0.5 * (region.x0 + region.x1 - 1);
    f.cy = 0.5 * (region.y0 + region.y1 - 1);
    f.scale = std::max(1.0, 0.5 * std::max(region.x1 - region.x0, region.y1 - region.y0));

    LkResult out{init, {}};
    Affine p = init;
    Accum cur = accumulate(ref, ref_mask, mov, g, p, region, f, true);
    for (int it = 0; it < iters; ++it) {
        ++out.diag.iterations;
        const double trace = cur.H.trace();
        if (cur.n < 6 || !(trace > 0.0) || !std::isfinite(trace)) {
            out.warp = init;
            out.diag.singular = true;
            break;
        }
        Eigen::Matrix<double, 6, 6> A = cur.H;
        A.diagonal().array() += 1e-6 * trace;
        const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(A);
        Eigen::Matrix<double, 6, 1> delta = ldlt.solve(-cur.b);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !delta.allFinite()) {
            out.warp = init;
            out.diag.singular = true;
            break;
        }
        out.diag.increment_norm = corner_norm(delta);
        if (it == 0) out.diag.first_increment = out.diag.increment_norm;

        bool accepted = false;
        for (int halving = 0; halving <= 4 && !accepted; ++halving, delta *= 0.5) {
            const Affine cand = apply_increment(p, delta, f);
            if (std::abs(cand.det()) < 1e-6) continue;
            const Accum trial = accumulate(ref, ref_mask, mov, g, cand, region, f, false);
            if (trial.n >= 6 && trial.mse() <= cur.mse()) {
                p = cand;
                accepted = true;
            }
        }
        if (accepted) {
            ++out.diag.accepted;
            cur = accumulate(ref, ref_mask, mov, g, p, region, f, it + 1 < iters);
        }
        out.warp = p;
    }
    if (!out.diag.singular) out.warp = p;
    out.diag.samples = cur.n;
    out.diag.residual = cur.n > 0 ? std::sqrt(cur.mse()) : 0.0;
    return out;
}

LkResult lk_affine(const Image& ref, const Image& mov, const Affine& init, int iters) {
    const Image ones_ref(ref.height(), ref.width(), 1, 1.0);
    const Image ones_mov(mov.height(), mov.width(), 1, 1.0);
    return lk_affine(ref, ones_ref, mov, ones_mov, init, iters, {0, ref.height(), 0, ref.width()});
}

} // namespace rawburst
