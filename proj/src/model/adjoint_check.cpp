#include "rawburst/model/adjoint_check.hpp"

#include "rawburst/model/operators.hpp"
#include "rawburst/util/errors.hpp"
#include "rawburst/util/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace rawburst {

namespace {

using LinearMap = std::function<Image(const Image&)>;

struct Shape {
    int h, w, c;
    std::size_t count() const { return static_cast<std::size_t>(h) * w * c; }
};

Image random_image(const Shape& s, Rng& rng) {
    Image img(s.h, s.w, s.c);
    for (double& v : img.values()) v = rng.uniform(-1.0, 1.0);
    return img;
}

AdjointCase check(const std::string& op, const std::string& layout, int size, int scale, const LinearMap& forward,
                  const LinearMap& adjoint, Shape in, Shape out, Rng& rng, double tolerance) {
    AdjointCase result{op, layout, size, scale};

    // dense(A), column j = A e_j, stored column-major
    const std::size_t n = in.count(), m = out.count();
    std::vector<double> dense(n * m);
    Image unit(in.h, in.w, in.c);
    for (std::size_t j = 0; j < n; ++j) {
        unit.data()[j] = 1.0;
        const Image col = forward(unit);
        require(col.size() == m, "check_adjoints: forward output has the wrong size");
        std::copy(col.data(), col.data() + m, dense.begin() + static_cast<std::ptrdiff_t>(j * m));
        unit.data()[j] = 0.0;
    }
    double scale_max = 0.0, worst = 0.0;
    for (double v : dense) scale_max = std::max(scale_max, std::abs(v));
    Image out_unit(out.h, out.w, out.c);
    for (std::size_t i = 0; i < m; ++i) {
        out_unit.data()[i] = 1.0;
        const Image row = adjoint(out_unit);  // row i of A, as the adjoint sees it
        require(row.size() == n, "check_adjoints: adjoint output has the wrong size");
        for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(row.data()[j] - dense[j * m + i]));
        out_unit.data()[i] = 0.0;
    }
    result.matrix_error = scale_max > 0.0 ? worst / scale_max : worst;

    const Image x = random_image(in, rng), r = random_image(out, rng);
    const Image ax = forward(x), atr = adjoint(r);
    const double norm = std::sqrt(dot(ax, ax) * dot(r, r));
    const double gap = std::abs(dot(ax, r) - dot(x, atr));
    result.dot_error = norm > 0.0 ? gap / norm : gap;
    result.passed = result.dot_error <= tolerance && result.matrix_error <= tolerance;
    return result;
}

AffineWarpField random_field(int size, Rng& rng) {
    // two tiles per axis so tile boundaries are exercised
    AffineWarpField field(size, size, std::max(1, size / 2));
    const Point centre{0.5 * (size - 1), 0.5 * (size - 1)};
    for (int ty = 0; ty < field.tiles_y(); ++ty)
        for (int tx = 0; tx < field.tiles_x(); ++tx) {
            const double angle = rng.uniform(-2.0, 2.0) * std::numbers::pi / 180.0;
            field.tile(ty, tx) = Affine::translation(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
                                     .compose(Affine::rotation(angle, centre));
        }
    return field;
}

} // namespace

bool AdjointReport::passed() const {
    return !cases.empty() && std::all_of(cases.begin(), cases.end(), [](const AdjointCase& c) { return c.passed; });
}

AdjointReport check_adjoints(int size, int scale, std::uint64_t seed, double tolerance) {
    require(scale == 1 || scale == 2 || scale == 4, "check_adjoints: scale must be 1, 2 or 4");
    require(size >= 2 * scale && size % (2 * scale) == 0, "check_adjoints: size must be a multiple of 2 * scale");
    require(tolerance > 0.0, "check_adjoints: tolerance must be positive");
    Rng rng(seed);
    AdjointReport report;
    report.tolerance = tolerance;
    const int lr = size / scale;
    const Shape hr1{size, size, 1}, hr3{size, size, 3}, lr1{lr, lr, 1};

    const AffineWarpField field = random_field(size, rng);
    report.cases.push_back(check(
        "warp", "", size, scale, [&](const Image& x) { return warp_apply(x, field).image; },
        [&](const Image& r) { return warp_adjoint(r, field, size, size); }, hr1, hr1, rng, tolerance));
    report.cases.push_back(check(
        "blur", "", size, scale, [&](const Image& x) { return blur_apply(x, scale); },
        [&](const Image& r) { return blur_adjoint(r, scale); }, hr1, hr1, rng, tolerance));
    report.cases.push_back(check(
        "decimate", "", size, scale, [&](const Image& x) { return decimate(x, scale); },
        [&](const Image& r) { return decimate_adjoint(r, scale, size, size); }, hr1, lr1, rng, tolerance));

    for (BayerLayout layout : BayerPattern::all_layouts()) {
        const BayerPattern pattern(layout);
        const std::string name = pattern.name();
        report.cases.push_back(check(
            "cfa", name, size, scale, [&](const Image& x) { return cfa_apply(x, pattern); },
            [&](const Image& r) { return cfa_adjoint(r, pattern); }, {lr, lr, 3}, lr1, rng, tolerance));
        const FrameOperator op(lr, lr, scale, rng.uniform(0.25, 4.0), pattern, random_field(size, rng));
        report.cases.push_back(check(
            "frame", name, size, scale, [&](const Image& x) { return op.apply(x); },
            [&](const Image& r) { return op.adjoint(r); }, hr3, lr1, rng, tolerance));
    }
    return report;
}

} // namespace rawburst
