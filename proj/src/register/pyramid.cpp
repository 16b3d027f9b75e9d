#include "rawburst/register/pyramid.hpp"

#include "rawburst/util/errors.hpp"

namespace rawburst {

namespace {

constexpr double kTaps[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

} // namespace

Image binomial_blur(const Image& img) {
    const int h = img.height(), w = img.width(), ch = img.channels();
    Image tmp(h, w, ch);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int t = -2; t <= 2; ++t) acc += kTaps[t + 2] * img(y, reflect_index(x + t, w), c);
                tmp(y, x, c) = acc;
            }
    Image out(h, w, ch);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int t = -2; t <= 2; ++t) acc += kTaps[t + 2] * tmp(reflect_index(y + t, h), x, c);
                out(y, x, c) = acc;
            }
    return out;
}

Image pyr_down(const Image& img) {
    require(img.height() >= 2 && img.width() >= 2, "pyr_down: image too small");
    const Image blurred = binomial_blur(img);
    Image out(img.height() / 2, img.width() / 2, img.channels());
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            for (int c = 0; c < img.channels(); ++c) out(y, x, c) = blurred(2 * y, 2 * x, c);
    return out;
}

GaussianPyramid::GaussianPyramid(const Image& base, const Image& mask, int levels) {
    require(levels >= 1, "GaussianPyramid: need at least one level");
    require(base.channels() == 1 && mask.same_shape(base), "GaussianPyramid: expects a single-channel image and mask");
    images_.push_back(base);
    masks_.push_back(mask);
    for (int l = 1; l < levels; ++l) {
        const Image& prev = images_.back();
        if (prev.height() < 8 || prev.width() < 8) break;
        images_.push_back(pyr_down(prev));
        // A coarse sample is usable only if every fine sample under its kernel was.
        Image m = pyr_down(masks_.back());
        for (double& v : m.values()) v = v > 1.0 - 1e-9 ? 1.0 : 0.0;
        masks_.push_back(std::move(m));
    }
}

} // namespace rawburst
