#include "rawburst/util/image.hpp"

#include "rawburst/util/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rawburst {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    require(height >= 0 && width >= 0 && channels >= 1, "Image: invalid dimensions");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

void Image::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Image Image::channel(int c) const {
    require(c >= 0 && c < channels_, "Image::channel: index out of range");
    Image out(height_, width_, 1);
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) out(y, x) = (*this)(y, x, c);
    return out;
}

void Image::set_channel(int c, const Image& plane) {
    require(c >= 0 && c < channels_, "Image::set_channel: index out of range");
    require(plane.height() == height_ && plane.width() == width_ && plane.channels() == 1,
            "Image::set_channel: shape mismatch");
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) (*this)(y, x, c) = plane(y, x);
}

Image& Image::operator+=(const Image& other) {
    require(same_shape(other), "Image +=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Image& Image::operator-=(const Image& other) {
    require(same_shape(other), "Image -=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Image& Image::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Image operator+(Image a, const Image& b) { return a += b; }
Image operator-(Image a, const Image& b) { return a -= b; }
Image operator*(Image a, double s) { return a *= s; }
Image operator*(double s, Image a) { return a *= s; }

double dot(const Image& a, const Image& b) {
    require(a.same_shape(b), "dot: shape mismatch");
    const std::size_t row = static_cast<std::size_t>(a.width()) * a.channels();
    const double* pa = a.data();
    const double* pb = b.data();
    double total = 0.0;
    for (int y = 0; y < a.height(); ++y) {
        double acc = 0.0;
        for (std::size_t i = 0; i < row; ++i) acc += pa[i] * pb[i];
        total += acc;
        pa += row;
        pb += row;
    }
    return total;
}

double squared_norm(const Image& a) { return dot(a, a); }

double max_value(const Image& a) {
    if (a.empty()) return 0.0;
    return *std::max_element(a.values().begin(), a.values().end());
}

double min_value(const Image& a) {
    if (a.empty()) return 0.0;
    return *std::min_element(a.values().begin(), a.values().end());
}

double mean_value(const Image& a) {
    if (a.empty()) return 0.0;
    const Image ones(a.height(), a.width(), a.channels(), 1.0);
    return dot(a, ones) / static_cast<double>(a.size());
}

bool all_finite(const Image& a) {
    return std::all_of(a.values().begin(), a.values().end(),
                       [](double v) { return std::isfinite(v); });
}

Image crop_border(const Image& a, int margin) {
    require(margin >= 0 && 2 * margin < a.height() && 2 * margin < a.width(), "crop_border: margin leaves no pixels");
    Image out(a.height() - 2 * margin, a.width() - 2 * margin, a.channels());
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            for (int c = 0; c < a.channels(); ++c) out(y, x, c) = a(y + margin, x + margin, c);
    return out;
}

} // namespace rawburst
