#pragma once

#include "rawburst/util/image.hpp"

#include <array>
#include <vector>

namespace rawburst {

struct Point {
    double x = 0.0;  // column
    double y = 0.0;  // row
};

/// 2x3 affine map on (x, y) pixel coordinates, stored row-major:
///   x' = m[0] x + m[1] y + m[2]
///   y' = m[3] x + m[4] y + m[5]
struct Affine {
    std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

    static Affine identity() { return {}; }
    static Affine translation(double tx, double ty) { return {{1.0, 0.0, tx, 0.0, 1.0, ty}}; }
    /// Rotation by `radians` about `center`.
    static Affine rotation(double radians, Point center);

    Point apply(Point p) const { return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]}; }
    double det() const { return m[0] * m[4] - m[1] * m[3]; }
    bool is_identity() const { return *this == identity(); }
    Affine inverse() const;

    /// (*this)(other(p))
    Affine compose(const Affine& other) const;

    /// Re-express a map on coordinates u into coordinates v = scale * u + offset.
    Affine change_of_units(double scale, double offset) const;

    bool operator==(const Affine&) const = default;
};

/// Piecewise-affine warp over an image domain. Each tile carries an affine map from
/// output (frame) coordinates to source (reference) coordinates; the warped image is
/// (W x)(u) = x(T_tile(u)(u)).
class AffineWarpField {
public:
    AffineWarpField() = default;
    /// Uniform field over a height x width domain. Tiles per axis are floor(size / tile),
    /// at least one; the last tile absorbs the remainder.
    AffineWarpField(int height, int width, int tile_size = 200, const Affine& global = Affine::identity());

    static AffineWarpField identity(int height, int width, int tile_size = 200);

    int height() const { return height_; }
    int width() const { return width_; }
    int tile_size() const { return tile_size_; }
    int tiles_y() const { return tiles_y_; }
    int tiles_x() const { return tiles_x_; }

    int tile_row(int y) const;
    int tile_col(int x) const;
    const Affine& tile(int ty, int tx) const { return tiles_[static_cast<std::size_t>(ty) * tiles_x_ + tx]; }
    Affine& tile(int ty, int tx) { return tiles_[static_cast<std::size_t>(ty) * tiles_x_ + tx]; }
    const Affine& at(int y, int x) const { return tile(tile_row(y), tile_col(x)); }
    const std::vector<Affine>& tiles() const { return tiles_; }

    /// Pixel bounds of tile (ty, tx): [y0, y1) x [x0, x1).
    void tile_bounds(int ty, int tx, int& y0, int& y1, int& x0, int& x1) const;

    bool is_identity() const;
    /// Throws ValidationError when any tile has |det| <= 1e-6.
    void validate() const;

    void set_all(const Affine& a);

    bool operator==(const AffineWarpField&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    int tile_size_ = 200;
    int tiles_y_ = 1;
    int tiles_x_ = 1;
    std::vector<Affine> tiles_{Affine::identity()};
};

struct WarpResult {
    Image image;
    Image validity;  // 1 where the sample point lies inside the source, else 0
};

/// Bilinear resampling with zero padding. The output has the field's domain size and the
/// source's channel count.
WarpResult warp_apply(const Image& source, const AffineWarpField& field);

/// Exact transpose of warp_apply's linear map; returns an image of `source_height` x `source_width`.
Image warp_adjoint(const Image& residual, const AffineWarpField& field, int source_height, int source_width);

/// Bilinear sample with zero padding outside the image.
double sample_bilinear(const Image& img, double x, double y, int c = 0);

} // namespace rawburst
