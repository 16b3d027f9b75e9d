#pragma once

// Test-only reference routines. Nothing here calls into the code paths it is used to check.

#include "rawburst/util/image.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using rawburst::Image;
using LinearMap = std::function<Image(const Image&)>;

inline Image random_image(int h, int w, int c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(h, w, c);
    for (double& v : img.values()) v = u(rng);
    return img;
}

/// Dense matrix of a linear map, built column by column from basis images.
/// Rows index the flattened output, columns the flattened input.
struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;
    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

inline DenseMatrix densify(const LinearMap& f, int in_h, int in_w, int in_c) {
    Image e(in_h, in_w, in_c);
    DenseMatrix m;
    m.cols = static_cast<int>(e.size());
    for (int col = 0; col < m.cols; ++col) {
        e.values()[col] = 1.0;
        const Image out = f(e);
        e.values()[col] = 0.0;
        if (col == 0) {
            m.rows = static_cast<int>(out.size());
            m.a.assign(static_cast<std::size_t>(m.rows) * m.cols, 0.0);
        }
        for (int r = 0; r < m.rows; ++r) m.at(r, col) = out.values()[r];
    }
    return m;
}

/// max |N - M^T| where M densifies `forward` and N densifies `adjoint`.
inline double transpose_mismatch(const LinearMap& forward, const LinearMap& adjoint, int in_h, int in_w, int in_c,
                                 int out_h, int out_w, int out_c) {
    const DenseMatrix m = densify(forward, in_h, in_w, in_c);
    const DenseMatrix n = densify(adjoint, out_h, out_w, out_c);
    if (n.rows != m.cols || n.cols != m.rows) return INFINITY;
    double worst = 0.0;
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) worst = std::max(worst, std::abs(m.at(r, c) - n.at(c, r)));
    return worst;
}

/// Plain sum of products, independent of rawburst::dot.
inline double naive_dot(const Image& a, const Image& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
    return s;
}

/// Textured test pattern: sum of a few oriented sinusoids plus a blob, values in (0, 1).
inline Image textured(int h, int w, double phase = 0.0) {
    Image img(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = 0.5 + 0.15 * std::sin(0.21 * x + 0.13 * y + phase) +
                             0.12 * std::cos(0.07 * x - 0.29 * y + 2 * phase) +
                             0.1 * std::sin(0.05 * x * 0.7 + 0.011 * x * y / 8.0) +
                             0.08 * std::exp(-((x - w * 0.4) * (x - w * 0.4) + (y - h * 0.6) * (y - h * 0.6)) /
                                             (0.02 * w * h));
            img(y, x) = v;
        }
    return img;
}

/// Conjugate gradient on a symmetric positive semi-definite map: solves H x = b from x0.
inline Image conjugate_gradient(const LinearMap& H, const Image& b, Image x, int max_iters, double rel_tol = 1e-12) {
    Image r = b;
    const Image hx = H(x);
    for (std::size_t i = 0; i < r.size(); ++i) r.values()[i] -= hx.values()[i];
    Image p = r;
    double rr = naive_dot(r, r);
    const double stop = rel_tol * rel_tol * naive_dot(b, b);
    for (int it = 0; it < max_iters && rr > stop; ++it) {
        const Image hp = H(p);
        const double php = naive_dot(p, hp);
        if (!(php > 0.0)) break;
        const double a = rr / php;
        for (std::size_t i = 0; i < x.size(); ++i) {
            x.values()[i] += a * p.values()[i];
            r.values()[i] -= a * hp.values()[i];
        }
        const double rr_next = naive_dot(r, r);
        for (std::size_t i = 0; i < p.size(); ++i) p.values()[i] = r.values()[i] + rr_next / rr * p.values()[i];
        rr = rr_next;
    }
    return x;
}

/// Exact 1-D TV proximal map argmin 1/2 ||x - z||^2 + gamma sum |x[i+1] - x[i]|, by coordinate
/// descent on the box-constrained dual run until nothing moves.
inline std::vector<double> tv_prox_1d(const std::vector<double>& z, double gamma) {
    const std::size_t n = z.size();
    std::vector<double> u(n > 0 ? n - 1 : 0, 0.0), x = z;
    for (int sweep = 0; sweep < 1000000; ++sweep) {
        double moved = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double next = std::clamp(u[i] + 0.5 * (x[i + 1] - x[i]), -gamma, gamma);
            const double d = next - u[i];
            u[i] = next;
            x[i] += d;
            x[i + 1] -= d;
            moved = std::max(moved, std::abs(d));
        }
        if (moved < 1e-15) break;
    }
    return x;
}

/// 2-D anisotropic TV prox of a single-channel image by plain projected gradient on the dual,
/// run for a fixed, large number of iterations.
inline Image tv_prox_2d(const Image& z, double gamma, int iterations = 20000) {
    const int h = z.height(), w = z.width();
    std::vector<double> px(static_cast<std::size_t>(h) * w, 0.0), py(px.size(), 0.0);
    Image x = z;
    auto at = [w](int i, int j) { return static_cast<std::size_t>(i) * w + j; };
    auto primal = [&] {
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double d = 0.0;
                if (j + 1 < w) d -= px[at(i, j)];
                if (j > 0) d += px[at(i, j - 1)];
                if (i + 1 < h) d -= py[at(i, j)];
                if (i > 0) d += py[at(i - 1, j)];
                x(i, j) = z(i, j) - gamma * d;
            }
    };
    const double step = 1.0 / (8.0 * gamma);
    for (int it = 0; it < iterations; ++it) {
        primal();
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                if (j + 1 < w) px[at(i, j)] = std::clamp(px[at(i, j)] + step * (x(i, j + 1) - x(i, j)), -1.0, 1.0);
                if (i + 1 < h) py[at(i, j)] = std::clamp(py[at(i, j)] + step * (x(i + 1, j) - x(i, j)), -1.0, 1.0);
            }
    }
    primal();
    return x;
}

} // namespace oracle
