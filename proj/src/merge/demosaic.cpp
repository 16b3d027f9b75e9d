#include "rawburst/merge/demosaic.hpp"

#include "rawburst/util/errors.hpp"

namespace rawburst {

namespace {

void check_mosaic(const Image& raw) {
    require(raw.channels() == 1, "demosaic: expects a single-channel mosaic");
    require(raw.height() >= 2 && raw.width() >= 2, "demosaic: mosaic smaller than one Bayer tile");
}

// Kernels are indexed [dy + 2][dx + 2] and expressed in eighths.
using Kernel = double[5][5];

// Green at red or blue sites.
constexpr Kernel kGreenAtRb = {{0, 0, -1, 0, 0}, {0, 0, 2, 0, 0}, {-1, 2, 4, 2, -1}, {0, 0, 2, 0, 0}, {0, 0, -1, 0, 0}};
// Red/blue at a green site whose horizontal neighbours carry that colour.
constexpr Kernel kRowNeighbour = {
    {0, 0, 0.5, 0, 0}, {0, -1, 0, -1, 0}, {-1, 4, 5, 4, -1}, {0, -1, 0, -1, 0}, {0, 0, 0.5, 0, 0}};
// Red/blue at a green site whose vertical neighbours carry that colour.
constexpr Kernel kColumnNeighbour = {
    {0, 0, -1, 0, 0}, {0, -1, 4, -1, 0}, {0.5, 0, 5, 0, 0.5}, {0, -1, 4, -1, 0}, {0, 0, -1, 0, 0}};
// Red at blue sites and blue at red sites.
constexpr Kernel kDiagonal = {
    {0, 0, -1.5, 0, 0}, {0, 2, 0, 2, 0}, {-1.5, 0, 6, 0, -1.5}, {0, 2, 0, 2, 0}, {0, 0, -1.5, 0, 0}};

double filter(const Image& raw, int y, int x, const Kernel& k) {
    const int h = raw.height(), w = raw.width();
    double acc = 0.0;
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
            const double c = k[dy + 2][dx + 2];
            if (c != 0.0) acc += c * raw(reflect_index(y + dy, h), reflect_index(x + dx, w));
        }
    return acc / 8.0;
}

} // namespace

Image demosaic_bilinear(const Image& raw, const BayerPattern& pattern) {
    check_mosaic(raw);
    const int h = raw.height(), w = raw.width();
    Image out(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int site = pattern.channel_at(y, x);
            for (int c = 0; c < 3; ++c) {
                if (c == site) {
                    out(y, x, c) = raw(y, x);
                    continue;
                }
                // Average of the nearest same-channel samples in the 3x3 neighbourhood:
                // 2 (row or column), 4 (cross, for green) or 4 (diagonals).
                double sum = 0.0;
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        const int yy = reflect_index(y + dy, h), xx = reflect_index(x + dx, w);
                        if (pattern.channel_at(yy, xx) != c) continue;
                        // Green sits on the cross only; diagonal green would be at distance sqrt(2).
                        if (c == 1 && dy != 0 && dx != 0) continue;
                        sum += raw(yy, xx);
                        ++n;
                    }
                out(y, x, c) = sum / n;
            }
        }
    return out;
}

Image demosaic_malvar(const Image& raw, const BayerPattern& pattern) {
    check_mosaic(raw);
    const int h = raw.height(), w = raw.width();
    Image out(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int site = pattern.channel_at(y, x);
            const double v = raw(y, x);
            if (site == 1) {
                const int row_colour = pattern.channel_at(y, x ^ 1);
                const int col_colour = 2 - row_colour;
                out(y, x, 1) = v;
                out(y, x, row_colour) = filter(raw, y, x, kRowNeighbour);
                out(y, x, col_colour) = filter(raw, y, x, kColumnNeighbour);
            } else {
                out(y, x, site) = v;
                out(y, x, 1) = filter(raw, y, x, kGreenAtRb);
                out(y, x, 2 - site) = filter(raw, y, x, kDiagonal);
            }
        }
    return out;
}

Image demosaic(const Image& raw, const BayerPattern& pattern, const std::string& method) {
    if (method == "bilinear") return demosaic_bilinear(raw, pattern);
    if (method == "malvar") return demosaic_malvar(raw, pattern);
    throw ValidationError("unknown demosaicking method '" + method + "' (expected bilinear or malvar)");
}

} // namespace rawburst
