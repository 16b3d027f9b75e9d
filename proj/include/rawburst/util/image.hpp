#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rawburst {

/// Dense row-major image with interleaved channels, double precision.
/// Used for irradiance images, raw mosaics, feature maps and masks alike.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels = 1, double fill = 0.0);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int y, int x, int c = 0) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    double operator()(int y, int x, int c = 0) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    void fill(double v);
    Image channel(int c) const;
    void set_channel(int c, const Image& plane);

    Image& operator+=(const Image& other);
    Image& operator-=(const Image& other);
    Image& operator*=(double s);

    bool operator==(const Image& other) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

Image operator+(Image a, const Image& b);
Image operator-(Image a, const Image& b);
Image operator*(Image a, double s);
Image operator*(double s, Image a);

/// Inner product accumulated row by row, then across rows, for reproducible sums.
double dot(const Image& a, const Image& b);
double squared_norm(const Image& a);
double max_value(const Image& a);
double min_value(const Image& a);
double mean_value(const Image& a);
bool all_finite(const Image& a);

/// Drops `margin` pixels on every side.
Image crop_border(const Image& a, int margin);

/// Reflect an index into [0, n) (edge sample not repeated: -1 -> 1).
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

} // namespace rawburst
