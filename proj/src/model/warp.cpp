#include "rawburst/model/warp.hpp"

#include "rawburst/util/errors.hpp"

#include <algorithm>
#include <cmath>

namespace rawburst {

Affine Affine::rotation(double radians, Point center) {
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    // p' = R (p - center) + center
    return {{c, -s, center.x - c * center.x + s * center.y, s, c, center.y - s * center.x - c * center.y}};
}

Affine Affine::inverse() const {
    const double d = det();
    if (std::abs(d) <= 1e-12) throw NumericalError("Affine::inverse: singular matrix");
    const double a = m[4] / d, b = -m[1] / d, c = -m[3] / d, e = m[0] / d;
    return {{a, b, -(a * m[2] + b * m[5]), c, e, -(c * m[2] + e * m[5])}};
}

Affine Affine::compose(const Affine& o) const {
    return {{m[0] * o.m[0] + m[1] * o.m[3], m[0] * o.m[1] + m[1] * o.m[4], m[0] * o.m[2] + m[1] * o.m[5] + m[2],
             m[3] * o.m[0] + m[4] * o.m[3], m[3] * o.m[1] + m[4] * o.m[4], m[3] * o.m[2] + m[4] * o.m[5] + m[5]}};
}

Affine Affine::change_of_units(double scale, double offset) const {
    // T_v(v) = scale * T((v - offset) / scale) + offset
    Affine out = *this;
    out.m[2] = scale * m[2] + offset - (m[0] + m[1]) * offset;
    out.m[5] = scale * m[5] + offset - (m[3] + m[4]) * offset;
    return out;
}

AffineWarpField::AffineWarpField(int height, int width, int tile_size, const Affine& global)
    : height_(height), width_(width), tile_size_(tile_size) {
    require(height > 0 && width > 0, "AffineWarpField: empty domain");
    require(tile_size > 0, "AffineWarpField: tile size must be positive");
    tiles_y_ = std::max(1, height / tile_size);
    tiles_x_ = std::max(1, width / tile_size);
    tiles_.assign(static_cast<std::size_t>(tiles_y_) * tiles_x_, global);
}

AffineWarpField AffineWarpField::identity(int height, int width, int tile_size) {
    return AffineWarpField(height, width, tile_size);
}

int AffineWarpField::tile_row(int y) const { return std::clamp(y / tile_size_, 0, tiles_y_ - 1); }
int AffineWarpField::tile_col(int x) const { return std::clamp(x / tile_size_, 0, tiles_x_ - 1); }

void AffineWarpField::tile_bounds(int ty, int tx, int& y0, int& y1, int& x0, int& x1) const {
    y0 = ty * tile_size_;
    x0 = tx * tile_size_;
    y1 = ty == tiles_y_ - 1 ? height_ : y0 + tile_size_;
    x1 = tx == tiles_x_ - 1 ? width_ : x0 + tile_size_;
}

bool AffineWarpField::is_identity() const {
    return std::all_of(tiles_.begin(), tiles_.end(), [](const Affine& a) { return a.is_identity(); });
}

void AffineWarpField::validate() const {
    for (const Affine& a : tiles_)
        if (!(std::abs(a.det()) > 1e-6) || !std::all_of(a.m.begin(), a.m.end(), [](double v) { return std::isfinite(v); }))
            throw ValidationError("AffineWarpField: non-invertible tile affine");
}

void AffineWarpField::set_all(const Affine& a) { std::fill(tiles_.begin(), tiles_.end(), a); }

namespace {

struct Taps {
    int count = 0;
    int y[4];
    int x[4];
    double w[4];
};

// Non-zero-weight in-bounds bilinear taps at (px, py). Shared by forward and adjoint
// so that the two stay exact transposes of each other.
inline Taps bilinear_taps(double px, double py, int h, int w) {
    Taps t;
    const double fx0 = std::floor(px);
    const double fy0 = std::floor(py);
    if (!(fx0 > -2.0 && fy0 > -2.0 && fx0 < w && fy0 < h)) return t;
    const int x0 = static_cast<int>(fx0);
    const int y0 = static_cast<int>(fy0);
    const double ax = px - fx0;
    const double ay = py - fy0;
    const double wx[2] = {1.0 - ax, ax};
    const double wy[2] = {1.0 - ay, ay};
    for (int j = 0; j < 2; ++j) {
        const int yy = y0 + j;
        if (wy[j] == 0.0 || yy < 0 || yy >= h) continue;
        for (int i = 0; i < 2; ++i) {
            const int xx = x0 + i;
            if (wx[i] == 0.0 || xx < 0 || xx >= w) continue;
            t.y[t.count] = yy;
            t.x[t.count] = xx;
            t.w[t.count] = wy[j] * wx[i];
            ++t.count;
        }
    }
    return t;
}

inline bool inside(double px, double py, int h, int w) {
    return px >= 0.0 && py >= 0.0 && px <= w - 1 && py <= h - 1;
}

} // namespace

double sample_bilinear(const Image& img, double x, double y, int c) {
    const Taps t = bilinear_taps(x, y, img.height(), img.width());
    double v = 0.0;
    for (int i = 0; i < t.count; ++i) v += t.w[i] * img(t.y[i], t.x[i], c);
    return v;
}

WarpResult warp_apply(const Image& source, const AffineWarpField& field) {
    field.validate();
    const int h = field.height(), w = field.width(), nc = source.channels();
    WarpResult out{Image(h, w, nc), Image(h, w, 1)};
    if (field.is_identity() && source.height() == h && source.width() == w) {
        out.image = source;
        out.validity.fill(1.0);
        return out;
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Point p = field.at(y, x).apply({static_cast<double>(x), static_cast<double>(y)});
            out.validity(y, x) = inside(p.x, p.y, source.height(), source.width()) ? 1.0 : 0.0;
            const Taps t = bilinear_taps(p.x, p.y, source.height(), source.width());
            for (int c = 0; c < nc; ++c) {
                double v = 0.0;
                for (int i = 0; i < t.count; ++i) v += t.w[i] * source(t.y[i], t.x[i], c);
                out.image(y, x, c) = v;
            }
        }
    }
    return out;
}

Image warp_adjoint(const Image& residual, const AffineWarpField& field, int source_height, int source_width) {
    field.validate();
    require(residual.height() == field.height() && residual.width() == field.width(),
            "warp_adjoint: residual does not match the field domain");
    const int nc = residual.channels();
    if (field.is_identity() && source_height == field.height() && source_width == field.width()) return residual;
    Image out(source_height, source_width, nc);
    for (int y = 0; y < field.height(); ++y) {
        for (int x = 0; x < field.width(); ++x) {
            const Point p = field.at(y, x).apply({static_cast<double>(x), static_cast<double>(y)});
            const Taps t = bilinear_taps(p.x, p.y, source_height, source_width);
            for (int i = 0; i < t.count; ++i)
                for (int c = 0; c < nc; ++c) out(t.y[i], t.x[i], c) += t.w[i] * residual(y, x, c);
        }
    }
    return out;
}

} // namespace rawburst
