#include "rawburst/metrics/metrics.hpp"

#include "rawburst/util/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace rawburst {

double psnr(const Image& reference, const Image& test, double peak) {
    require(reference.same_shape(test), "psnr: shape mismatch");
    require(!reference.empty(), "psnr: empty image");
    if (peak <= 0.0) peak = max_value(reference);
    require(peak > 0.0, "psnr: peak must be positive");
    const Image diff = reference - test;
    const double mse = squared_norm(diff) / static_cast<double>(diff.size());
    if (mse == 0.0) return kPsnrSentinel;
    return std::min(kPsnrSentinel, 10.0 * std::log10(peak * peak / mse));
}

double mu_law(double v, double peak, double mu) {
    return std::log1p(mu * std::max(0.0, v) / peak) / std::log1p(mu);
}

double mu_psnr(const Image& reference, const Image& test, double mu) {
    require(reference.same_shape(test), "mu_psnr: shape mismatch");
    const double peak = max_value(reference);
    require(peak > 0.0, "mu_psnr: reference must have a positive maximum");
    Image a = reference, b = test;
    for (double& v : a.values()) v = mu_law(v, peak, mu);
    for (double& v : b.values()) v = mu_law(v, peak, mu);
    return psnr(a, b, 1.0);
}

namespace {

constexpr int kWindow = 11;

std::array<double, kWindow> gaussian_window() {
    std::array<double, kWindow> g{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += g[i];
    }
    for (double& v : g) v /= sum;
    return g;
}

// Separable 'valid' filtering of a single plane.
Image filter_valid(const Image& img, const std::array<double, kWindow>& g) {
    const int h = img.height(), w = img.width();
    const int oh = h - kWindow + 1, ow = w - kWindow + 1;
    Image rows(h, ow, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWindow; ++i) acc += g[i] * img(y, x + i);
            rows(y, x) = acc;
        }
    Image out(oh, ow, 1);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWindow; ++i) acc += g[i] * rows(y + i, x);
            out(y, x) = acc;
        }
    return out;
}

Image product(const Image& a, const Image& b) {
    Image out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= b.values()[i];
    return out;
}

} // namespace

double ssim(const Image& reference, const Image& test, double data_range) {
    require(reference.same_shape(test), "ssim: shape mismatch");
    require(reference.height() >= kWindow && reference.width() >= kWindow, "ssim: image smaller than the window");
    if (data_range <= 0.0) data_range = max_value(reference);
    if (data_range <= 0.0) data_range = 1.0;
    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);
    const auto g = gaussian_window();
    double total = 0.0;
    for (int c = 0; c < reference.channels(); ++c) {
        const Image a = reference.channel(c), b = test.channel(c);
        const Image mu_a = filter_valid(a, g), mu_b = filter_valid(b, g);
        const Image saa = filter_valid(product(a, a), g), sbb = filter_valid(product(b, b), g);
        const Image sab = filter_valid(product(a, b), g);
        double acc = 0.0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a.values()[i], mb = mu_b.values()[i];
            const double va = saa.values()[i] - ma * ma;
            const double vb = sbb.values()[i] - mb * mb;
            const double cov = sab.values()[i] - ma * mb;
            acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += acc / static_cast<double>(mu_a.size());
    }
    return total / reference.channels();
}

double geometric_error(const AffineWarpField& estimate, const AffineWarpField& truth) {
    require(estimate.height() == truth.height() && estimate.width() == truth.width(),
            "geometric_error: fields cover different domains");
    const int h = truth.height(), w = truth.width();
    const std::array<std::array<int, 2>, 4> px{{{0, 0}, {0, w - 1}, {h - 1, 0}, {h - 1, w - 1}}};
    const std::array<Point, 4> corners{{{-0.5, -0.5}, {w - 0.5, -0.5}, {-0.5, h - 0.5}, {w - 0.5, h - 0.5}}};
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
        const Point a = estimate.at(px[i][0], px[i][1]).apply(corners[i]);
        const Point b = truth.at(px[i][0], px[i][1]).apply(corners[i]);
        sum += std::hypot(a.x - b.x, a.y - b.y);
    }
    return sum / 4.0;
}

ErrorSummary summarize(std::vector<double> values) {
    ErrorSummary s;
    s.count = static_cast<int>(values.size());
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / values.size();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    return s;
}

std::vector<double> frame_errors(const std::vector<AffineWarpField>& estimates,
                                 const std::vector<AffineWarpField>& truth, int reference) {
    require(estimates.size() == truth.size(), "frame_errors: frame counts differ");
    std::vector<double> out;
    for (std::size_t k = 0; k < truth.size(); ++k)
        if (static_cast<int>(k) != reference) out.push_back(geometric_error(estimates[k], truth[k]));
    return out;
}

} // namespace rawburst
